use std::io::Write;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

/// Wall-clock cost of one cycle, in seconds. `total_s` spans the four layers;
/// planning lists one entry per goal of G(t).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub value_goal_s: f64,
    pub planning_s: Vec<f64>,
    pub acting_s: f64,
    pub total_s: f64,
}

impl Timings {
    pub fn sum_of_parts(&self) -> f64 {
        self.value_goal_s + self.planning_s.iter().sum::<f64>() + self.acting_s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalEntry {
    pub goal: String,
    pub status: String,
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub goal: String,
    pub source: String,
    pub target: String,
    pub actions: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandEntry {
    pub goal: String,
    pub action: String,
    pub command: String,
    pub beliefs_before: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureEntry {
    pub goal: String,
    pub source: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeEntry {
    pub goal: String,
    pub source: String,
    pub outcome: String,
    pub target: String,
    pub reason: Option<String>,
    pub beliefs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WriteEntry {
    pub goal: String,
    pub source: String,
    pub from: Option<String>,
    pub to: String,
    pub kind: String,
}

/// Record of one reasoning cycle. Everything except `timings` is a pure
/// function of the agent state and the trigger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleTrace {
    pub agent: String,
    pub cycle: usize,
    pub trigger: String,
    pub beliefs_at_start: Vec<String>,
    pub iv: Vec<Vec<String>>,
    pub gs_before: Vec<GoalEntry>,
    pub goals: Vec<GoalEntry>,
    pub forbidden: Vec<String>,
    pub plans: Vec<PlanEntry>,
    pub failures: Vec<FailureEntry>,
    pub commands: Vec<CommandEntry>,
    pub outcomes: Vec<OutcomeEntry>,
    pub gs_after: Vec<GoalEntry>,
    pub status_writes: Vec<WriteEntry>,
    pub notes: Vec<String>,
    pub panicked: bool,
    pub timings: Timings,
}

impl CycleTrace {
    /// Copy with the wall-clock fields cleared, for comparing runs.
    pub fn without_timings(&self) -> CycleTrace {
        CycleTrace { timings: Timings::default(), ..self.clone() }
    }
}

/// Append-only JSON-lines sink; safe to share between threads.
pub struct TraceSink<W: Write> {
    out: Mutex<W>,
}

impl<W: Write> TraceSink<W> {
    pub fn new(out: W) -> Self {
        TraceSink { out: Mutex::new(out) }
    }

    pub fn append(&self, trace: &CycleTrace) -> std::io::Result<()> {
        let line = serde_json::to_string(trace).map_err(std::io::Error::other)?;
        let mut out = self.out.lock().expect("trace sink poisoned");
        writeln!(out, "{line}")?;
        out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out.into_inner().expect("trace sink poisoned")
    }
}
