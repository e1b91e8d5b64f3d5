use std::collections::BTreeSet;

use thiserror::Error;

use crate::acting::{BodyItem, CommandImpactRule, Refinement};
use crate::goals::{GoalActivationRule, GoalImpactRule, GoalOrderPolicy};
use crate::logic::{Atom, Constant};
use crate::planning::{ActionImpactRule, ActionModel, GoalCondition, PlanningOptions};
use crate::values::{ImportanceOrder, ValueOrderingRule};

pub const DEFAULT_COMMAND_TIMEOUT_MS: u64 = 2000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("agent `{agent}`: action `{action}` has no refinement")]
    UnrefinedAction { agent: String, action: String },
    #[error("agent `{agent}`: refinement for `{action}` matches no action model or sub-action")]
    DanglingRefinement { agent: String, action: String },
    #[error("agent `{agent}`: static belief `{belief}` is not ground")]
    NonGroundBelief { agent: String, belief: String },
    #[error("device `{device}` is claimed by agents `{first}` and `{second}`")]
    SharedDevice { device: String, first: String, second: String },
    #[error("agent `{0}` declared twice")]
    DuplicateAgent(String),
}

/// Everything one agent knows before the first event.
#[derive(Clone, Debug, Default)]
pub struct AgentConfig {
    pub id: String,
    /// Devices whose properties and signals this agent observes and operates.
    pub devices: Vec<String>,
    pub iv_d: ImportanceOrder,
    pub vo: Vec<ValueOrderingRule>,
    pub ga: Vec<GoalActivationRule>,
    pub gi: Vec<GoalImpactRule>,
    pub policy: GoalOrderPolicy,
    pub kw: Vec<ActionModel>,
    pub ai: Vec<ActionImpactRule>,
    pub goal_conditions: Vec<GoalCondition>,
    pub kh: Vec<Refinement>,
    pub ci: Vec<CommandImpactRule>,
    /// Beliefs that hold from the start and are not owned by any device.
    pub beliefs: Vec<Atom>,
    pub planning: PlanningOptions,
    pub command_timeout_ms: u64,
}

impl AgentConfig {
    pub fn new(id: &str) -> Self {
        AgentConfig {
            id: id.to_string(),
            command_timeout_ms: DEFAULT_COMMAND_TIMEOUT_MS,
            ..Default::default()
        }
    }

    pub fn with_constants(mut self, constants: impl IntoIterator<Item = Constant>) -> Self {
        self.planning.constants.extend(constants);
        self
    }

    /// Checks that know-what and know-how line up.
    pub fn check(&self) -> Result<(), ConfigError> {
        if let Some(a) = self.beliefs.iter().find(|a| !a.is_ground()) {
            return Err(ConfigError::NonGroundBelief { agent: self.id.clone(), belief: a.to_string() });
        }
        for m in &self.kw {
            let head = m.head();
            if !self.kh.iter().any(|r| r.action.unifiable(&head)) {
                return Err(ConfigError::UnrefinedAction { agent: self.id.clone(), action: head.to_string() });
            }
        }
        let subactions: Vec<&Atom> = self
            .kh
            .iter()
            .flat_map(|r| &r.body)
            .filter_map(|i| match i {
                BodyItem::Action(a) => Some(a),
                BodyItem::Command(_) => None,
            })
            .collect();
        for r in &self.kh {
            let known = self.kw.iter().any(|m| m.head().unifiable(&r.action))
                || subactions.iter().any(|a| a.unifiable(&r.action));
            if !known {
                return Err(ConfigError::DanglingRefinement { agent: self.id.clone(), action: r.action.to_string() });
            }
        }
        Ok(())
    }
}

/// Checks every agent and rejects devices claimed by more than one agent.
pub fn check_agents(configs: &[AgentConfig]) -> Result<(), ConfigError> {
    let mut ids = BTreeSet::new();
    for c in configs {
        if !ids.insert(&c.id) {
            return Err(ConfigError::DuplicateAgent(c.id.clone()));
        }
        c.check()?;
    }
    for (i, a) in configs.iter().enumerate() {
        for b in &configs[i + 1..] {
            if let Some(d) = a.devices.iter().find(|d| b.devices.contains(d)) {
                return Err(ConfigError::SharedDevice { device: d.clone(), first: a.id.clone(), second: b.id.clone() });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> AgentConfig {
        let mut c = AgentConfig::new("a");
        c.kw = vec![ActionModel::parse("turn_on(D)", "status(D, off)", &["status(D, on)"], &["status(D, off)"]).unwrap()];
        c.kh = vec![Refinement::parse("turn_on(D)", "true", &["set_status(D, on)"]).unwrap()];
        c
    }

    #[test]
    fn consistent_config_passes() {
        assert_eq!(config().check(), Ok(()));
    }

    #[test]
    fn missing_and_dangling_refinements() {
        let mut c = config();
        c.kh.clear();
        assert!(matches!(c.check(), Err(ConfigError::UnrefinedAction { .. })));
        let mut c = config();
        c.kh.push(Refinement::parse("dance(X)", "true", &["spin(X)"]).unwrap());
        assert!(matches!(c.check(), Err(ConfigError::DanglingRefinement { .. })));
    }

    #[test]
    fn shared_devices_rejected() {
        let mut a = config();
        a.devices = vec!["tv".into()];
        let mut b = config();
        b.id = "b".into();
        b.devices = vec!["phone".into(), "tv".into()];
        assert!(matches!(check_agents(&[a.clone(), b.clone()]), Err(ConfigError::SharedDevice { .. })));
        b.devices = vec!["phone".into()];
        assert_eq!(check_agents(&[a.clone(), b]), Ok(()));
        assert!(matches!(check_agents(&[a.clone(), a]), Err(ConfigError::DuplicateAgent(_))));
    }
}
