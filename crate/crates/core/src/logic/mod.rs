//! Terms, atoms, the belief base and the condition language shared by every
//! rule family.

mod belief;
mod eval;
mod formula;
mod parse;
mod term;

pub use belief::BeliefBase;
pub use eval::{evaluate, evaluate_from, holds};
pub use formula::{to_dnf, Clause, CmpOp, Formula};
pub use parse::{parse_atom, parse_formula, parse_ground_atom};
pub(crate) use parse::{Parser, Tok};
pub use term::{normalize_identifier, Atom, Constant, Substitution, Term};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogicError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("variable `{0}` is not bound by a positive atom of the enclosing conjunction")]
    RangeRestriction(String),
    #[error("atom `{0}` is not ground")]
    NonGround(String),
    #[error("ordering comparison between non-numeric constants in `{0}`")]
    NonNumericOrdering(String),
}

impl LogicError {
    pub(crate) fn syntax(line: usize, col: usize, message: String) -> Self {
        LogicError::Syntax { line, col, message }
    }
}
