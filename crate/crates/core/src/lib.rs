//! SMASH: a value-driven agent for smart homes.

pub mod acting;
pub mod env;
pub mod goals;
pub mod logic;
pub mod planning;
pub mod runtime;
pub mod scenario;
pub mod values;
