use std::path::Path;
use std::time::Duration;

use thiserror::Error;

use crate::acting::{ActError, BodyItem, CommandImpactRule, Refinement};
use crate::env::{Bus, DeviceSpec, Environment};
use crate::goals::{GoalActivationRule, GoalImpactRule};
use crate::logic::{normalize_identifier, parse_atom, parse_formula, parse_ground_atom, Constant};
use crate::planning::{ActionImpactRule, ActionModel, GoalCondition, PlanningOptions, SearchLimits};
use crate::runtime::{check_agents, AgentConfig, EventKind, ScheduledEvent, DEFAULT_COMMAND_TIMEOUT_MS};
use crate::values::{ImportanceOrder, ValueOrderingRule};

use super::format::{
    ActingSection, AgentSection, BodyEntry, EventBody, ExpectedTransition, GoalsSection, PlanningSection, ScenarioFile,
    ValuesSection,
};

pub const BUNDLED_POC: &str = include_str!("../../scenarios/smash_poc.json");
pub const SCHEMA: &str = include_str!("../../scenarios/scenario.schema.json");

/// Anything that makes a scenario unusable before it runs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}, column {col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("{at}: {message}")]
    Invalid { at: String, message: String },
}

fn invalid(at: impl Into<String>, e: impl ToString) -> ScenarioError {
    ScenarioError::Invalid { at: at.into(), message: e.to_string() }
}

/// A checked scenario, ready to run.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub seed: Option<u64>,
    pub devices: Vec<DeviceSpec>,
    pub agents: Vec<AgentConfig>,
    pub events: Vec<ScheduledEvent>,
    pub expect: Vec<ExpectedTransition>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ScenarioError::Syntax {
            line: e.line(),
            col: e.column(),
            message: e.to_string(),
        })?;
        Scenario::from_file(&file)
    }

    /// Reads a scenario from disk; the name `smash_poc` selects the bundled one
    /// unless a file of that name exists.
    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        if !path.exists() && path.as_os_str() == "smash_poc" {
            return Scenario::parse(BUNDLED_POC);
        }
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Scenario::parse(&text)
    }

    pub fn bundled_poc() -> Scenario {
        Scenario::parse(BUNDLED_POC).expect("bundled scenario is valid")
    }

    pub fn from_file(file: &ScenarioFile) -> Result<Scenario, ScenarioError> {
        let devices = file.devices.clone();
        Environment::new(Bus::new(), &devices, None).map_err(|e| invalid("devices", e))?;
        let sections: Vec<AgentSection> = if file.agents.is_empty() {
            vec![AgentSection {
                id: "smash".into(),
                devices: devices.iter().map(|d| normalize_identifier(&d.id)).collect(),
                values: None,
                goals: None,
                planning: None,
                acting: None,
                beliefs: None,
            }]
        } else {
            file.agents.clone()
        };
        let constants: Vec<Constant> = file.constants.iter().map(|c| Constant::symbol(c)).collect();
        let mut agents = Vec::new();
        for s in &sections {
            let mut cfg = AgentConfig::new(&s.id);
            cfg.devices = s.devices.iter().map(|d| normalize_identifier(d)).collect();
            let at = |what: &str| format!("agent {}: {what}", s.id);
            load_values(&mut cfg, s.values.as_ref().unwrap_or(&file.values)).map_err(|e| invalid(at("values"), e))?;
            load_goals(&mut cfg, s.goals.as_ref().unwrap_or(&file.goals)).map_err(|e| invalid(at("goals"), e))?;
            load_planning(&mut cfg, s.planning.as_ref().unwrap_or(&file.planning))
                .map_err(|e| invalid(at("planning"), e))?;
            load_acting(&mut cfg, s.acting.as_ref().unwrap_or(&file.acting)).map_err(|e| invalid(at("acting"), e))?;
            for b in s.beliefs.as_ref().unwrap_or(&file.beliefs) {
                cfg.beliefs.push(parse_ground_atom(b).map_err(|e| invalid(at("beliefs"), e))?);
            }
            cfg.planning.constants.extend(constants.iter().cloned());
            if let Some(d) = cfg.devices.iter().find(|d| !devices.iter().any(|x| normalize_identifier(&x.id) == **d)) {
                return Err(invalid(at("devices"), format!("unknown device `{d}`")));
            }
            agents.push(cfg);
        }
        check_agents(&agents).map_err(|e| invalid("agents", e))?;

        let mut events = Vec::new();
        for (i, e) in file.events.iter().enumerate() {
            let at = format!("events[{i}]");
            if let Some(a) = &e.agent {
                if !agents.iter().any(|c| &c.id == a) {
                    return Err(invalid(at, format!("unknown agent `{a}`")));
                }
            }
            let kind = match &e.event {
                EventBody::UserGoal { goal } => EventKind::UserGoal(parse_ground_atom(goal).map_err(|x| invalid(&at, x))?),
                EventBody::Belief { changes } => {
                    let (mut assert, mut retract) = (Vec::new(), Vec::new());
                    for c in changes {
                        let t = c.trim();
                        let target = match t.chars().next() {
                            Some('+') => &mut assert,
                            Some('-') => &mut retract,
                            _ => return Err(invalid(&at, format!("`{c}` must start with + or -"))),
                        };
                        target.push(parse_ground_atom(&t[1..]).map_err(|x| invalid(&at, x))?);
                    }
                    EventKind::Belief { assert, retract }
                }
                EventBody::Device { device, trigger, args } => {
                    let id = normalize_identifier(device);
                    if !devices.iter().any(|d| normalize_identifier(&d.id) == id) {
                        return Err(invalid(&at, format!("unknown device `{device}`")));
                    }
                    EventKind::Device { device: id, trigger: trigger.clone(), args: args.clone() }
                }
            };
            events.push(ScheduledEvent { at: e.at, agent: e.agent.clone(), kind });
        }
        let expect = file
            .expect
            .iter()
            .map(|x| ExpectedTransition {
                device: normalize_identifier(&x.device),
                property: x.property.clone(),
                from: x.from.as_deref().map(normalize_identifier),
                to: normalize_identifier(&x.to),
            })
            .collect();
        Ok(Scenario { name: file.name.clone(), seed: file.seed, devices, agents, events, expect })
    }
}

fn load_values(cfg: &mut AgentConfig, s: &ValuesSection) -> Result<(), String> {
    cfg.iv_d = ImportanceOrder::from_buckets(s.iv_d.clone()).map_err(|e| e.to_string())?;
    for r in &s.vo {
        cfg.vo.push(ValueOrderingRule::parse(&r.condition, &r.then).map_err(|e| e.to_string())?);
    }
    Ok(())
}

fn load_goals(cfg: &mut AgentConfig, s: &GoalsSection) -> Result<(), String> {
    cfg.policy = s.policy;
    for r in &s.ga {
        cfg.ga.push(GoalActivationRule::parse(&r.condition, &r.then).map_err(|e| e.to_string())?);
    }
    for r in &s.gi {
        cfg.gi.push(GoalImpactRule::parse(&r.condition, &r.goal, r.impact, r.value).map_err(|e| e.to_string())?);
    }
    for c in &s.goal_conditions {
        cfg.goal_conditions.push(GoalCondition::parse(&c.goal, &c.condition).map_err(|e| e.to_string())?);
    }
    Ok(())
}

fn load_planning(cfg: &mut AgentConfig, s: &PlanningSection) -> Result<(), String> {
    let mut limits = SearchLimits::default();
    if let Some(n) = s.max_nodes {
        limits.max_nodes = n;
    }
    if let Some(t) = s.max_time_s {
        limits.max_time = Duration::try_from_secs_f64(t).map_err(|e| format!("max_time_s: {e}"))?;
    }
    cfg.planning = PlanningOptions { strategy: s.strategy, limits, constants: Vec::new() };
    for a in &s.kw {
        cfg.kw.push(ActionModel::parse(&a.action, &a.pre, &a.add, &a.del).map_err(|e| e.to_string())?);
    }
    for r in &s.ai {
        cfg.ai.push(ActionImpactRule::parse(&r.condition, &r.action, r.impact, r.value).map_err(|e| e.to_string())?);
    }
    Ok(())
}

fn load_acting(cfg: &mut AgentConfig, s: &ActingSection) -> Result<(), String> {
    cfg.command_timeout_ms = s.timeout_ms.unwrap_or(DEFAULT_COMMAND_TIMEOUT_MS);
    for r in &s.kh {
        let body = r
            .body
            .iter()
            .map(|b| match b {
                BodyEntry::Command(c) => parse_atom(c).map(BodyItem::Command),
                BodyEntry::Action { action } => parse_atom(action).map(BodyItem::Action),
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let condition = parse_formula(&r.condition).map_err(|e| e.to_string())?;
        let action = parse_atom(&r.action).map_err(|e| e.to_string())?;
        cfg.kh.push(Refinement::new(action, condition, body).map_err(|e: ActError| e.to_string())?);
    }
    for r in &s.ci {
        cfg.ci.push(CommandImpactRule::parse(&r.condition, &r.command, r.impact, r.value).map_err(|e| e.to_string())?);
    }
    Ok(())
}
