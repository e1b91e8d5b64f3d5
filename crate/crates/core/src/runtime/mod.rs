//! Reasoning cycle orchestration for one or more agents sharing a bus.

mod agent;
mod config;
mod runner;
mod trace;

pub use agent::{Agent, AgentCore, AgentError, AgentEvent};
pub use config::{check_agents, AgentConfig, ConfigError, DEFAULT_COMMAND_TIMEOUT_MS};
pub use runner::{run_agents, EventKind, ObservedTransition, RunOutput, ScheduledEvent};
pub use trace::{
    CommandEntry, CycleTrace, FailureEntry, GoalEntry, OutcomeEntry, PlanEntry, Timings, TraceSink, WriteEntry,
};
