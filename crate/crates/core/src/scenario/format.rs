use serde::{Deserialize, Serialize};

use crate::env::DeviceSpec;
use crate::goals::{GoalOrderPolicy, Impact};
use crate::planning::Strategy;
use crate::values::Value;

fn always() -> String {
    "true".into()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: String,
    /// Seed for device noise.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub values: ValuesSection,
    #[serde(default)]
    pub goals: GoalsSection,
    #[serde(default)]
    pub planning: PlanningSection,
    #[serde(default)]
    pub acting: ActingSection,
    #[serde(default)]
    pub devices: Vec<DeviceSpec>,
    /// Extra constants for grounding.
    #[serde(default)]
    pub constants: Vec<String>,
    /// Static beliefs no device owns.
    #[serde(default)]
    pub beliefs: Vec<String>,
    /// Agents and the devices they own. One agent owning every device if absent.
    #[serde(default)]
    pub agents: Vec<AgentSection>,
    #[serde(default)]
    pub events: Vec<EventEntry>,
    #[serde(default)]
    pub expect: Vec<ExpectedTransition>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValuesSection {
    #[serde(default)]
    pub iv_d: Vec<Vec<Value>>,
    #[serde(default)]
    pub vo: Vec<RuleEntry>,
}

/// `if` condition with a list of bodies: order ops or goal templates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleEntry {
    #[serde(rename = "if", default = "always")]
    pub condition: String,
    pub then: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalsSection {
    #[serde(default)]
    pub policy: GoalOrderPolicy,
    #[serde(default)]
    pub ga: Vec<RuleEntry>,
    #[serde(default)]
    pub gi: Vec<GoalImpactEntry>,
    #[serde(default)]
    pub goal_conditions: Vec<GoalConditionEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalImpactEntry {
    #[serde(rename = "if", default = "always")]
    pub condition: String,
    pub goal: String,
    pub impact: Impact,
    pub value: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalConditionEntry {
    pub goal: String,
    pub condition: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanningSection {
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default)]
    pub max_nodes: Option<usize>,
    #[serde(default)]
    pub max_time_s: Option<f64>,
    #[serde(default)]
    pub kw: Vec<ActionEntry>,
    #[serde(default)]
    pub ai: Vec<ActionImpactEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionEntry {
    pub action: String,
    #[serde(default = "always")]
    pub pre: String,
    #[serde(default)]
    pub add: Vec<String>,
    #[serde(default)]
    pub del: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionImpactEntry {
    #[serde(rename = "if", default = "always")]
    pub condition: String,
    pub action: String,
    pub impact: Impact,
    pub value: Value,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActingSection {
    #[serde(default)]
    pub timeout_ms: Option<u64>,
    #[serde(default)]
    pub kh: Vec<RefinementEntry>,
    #[serde(default)]
    pub ci: Vec<CommandImpactEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinementEntry {
    pub action: String,
    #[serde(rename = "if", default = "always")]
    pub condition: String,
    pub body: Vec<BodyEntry>,
}

/// A bare string is a device command; `{"action": ...}` is a sub-action.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BodyEntry {
    Command(String),
    Action { action: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandImpactEntry {
    #[serde(rename = "if", default = "always")]
    pub condition: String,
    pub command: String,
    pub impact: Impact,
    pub value: Value,
}

/// Sections left out fall back to the top-level ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    pub id: String,
    pub devices: Vec<String>,
    #[serde(default)]
    pub values: Option<ValuesSection>,
    #[serde(default)]
    pub goals: Option<GoalsSection>,
    #[serde(default)]
    pub planning: Option<PlanningSection>,
    #[serde(default)]
    pub acting: Option<ActingSection>,
    #[serde(default)]
    pub beliefs: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventEntry {
    pub at: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<String>,
    #[serde(flatten)]
    pub event: EventBody,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventBody {
    UserGoal {
        goal: String,
    },
    /// Entries are `+atom` or `-atom`.
    Belief {
        changes: Vec<String>,
    },
    Device {
        device: String,
        trigger: String,
        #[serde(default)]
        args: Vec<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedTransition {
    pub device: String,
    #[serde(default = "status")]
    pub property: String,
    #[serde(default)]
    pub from: Option<String>,
    pub to: String,
}

fn status() -> String {
    "status".into()
}
