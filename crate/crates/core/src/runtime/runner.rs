use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::env::{Environment, Subscription, Topic};
use crate::logic::Atom;

use super::agent::{Agent, AgentError, AgentEvent};
use super::config::{check_agents, AgentConfig};
use super::trace::CycleTrace;

#[derive(Clone, Debug, PartialEq)]
pub enum EventKind {
    /// Published on the agent's goal topic.
    UserGoal(Atom),
    /// Handed straight to the agent and mirrored in the context store.
    Belief { assert: Vec<Atom>, retract: Vec<Atom> },
    /// A scripted device behaviour, such as a sofa reading.
    Device { device: String, trigger: String, args: Vec<String> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduledEvent {
    /// Logical time; ties keep declaration order.
    pub at: u64,
    /// Addressee of goal and belief events; the first agent if absent.
    pub agent: Option<String>,
    pub kind: EventKind,
}

/// A device property change seen on the bus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservedTransition {
    pub device: String,
    pub property: String,
    pub from: Option<String>,
    pub to: String,
    /// Index of the scheduled event being processed, after sorting.
    pub event: usize,
    /// Agent and cycle that caused it; absent for scripted device changes.
    pub agent: Option<String>,
    pub cycle: Option<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub traces: Vec<CycleTrace>,
    pub transitions: Vec<ObservedTransition>,
    pub anomalies: Vec<String>,
    /// Bus messages consumed per agent, in configuration order.
    pub consumed: Vec<(String, u64)>,
    /// Beliefs of each agent at the end of the run.
    pub final_beliefs: Vec<(String, Vec<Atom>)>,
}

fn record(rec: &Subscription, event: usize, agent: Option<&str>, cycle: Option<usize>, out: &mut Vec<ObservedTransition>) {
    for msg in rec.drain() {
        let Ok(Topic::Property { device, name }) = Topic::parse(&msg.topic) else { continue };
        let text = |k: &str| msg.payload.get(k).and_then(|v| v.as_str()).map(str::to_string);
        out.push(ObservedTransition {
            device,
            property: name,
            from: text("previous"),
            to: text("value").unwrap_or_default(),
            event,
            agent: agent.map(str::to_string),
            cycle,
        });
    }
}

/// Runs agents over a shared environment, one scheduled event at a time. After
/// each event every agent handles its queue to exhaustion, in configuration order.
pub fn run_agents(
    configs: Vec<AgentConfig>,
    env: &mut Environment,
    events: &[ScheduledEvent],
    pddl_out: Option<PathBuf>,
) -> Result<RunOutput, AgentError> {
    check_agents(&configs)?;
    for c in &configs {
        for a in &c.beliefs {
            env.store_mut().assert_atom(a);
        }
    }
    let recorder = env.bus().subscribe("devices/+/properties/#")?;
    let mut agents = configs
        .into_iter()
        .map(|c| Agent::attach(c, env))
        .collect::<Result<Vec<_>, _>>()?;
    for a in &mut agents {
        a.core_mut().set_pddl_out(pddl_out.clone());
    }

    let mut order: Vec<&ScheduledEvent> = events.iter().collect();
    order.sort_by_key(|e| e.at);
    let mut out = RunOutput::default();
    for (i, ev) in order.into_iter().enumerate() {
        let target = match &ev.agent {
            Some(id) => agents
                .iter()
                .position(|a| a.id() == id)
                .ok_or_else(|| AgentError::UnknownAgent(id.clone()))?,
            None => 0,
        };
        match &ev.kind {
            EventKind::UserGoal(g) => {
                let Some(agent) = agents.get(target) else { continue };
                let topic = Topic::Goals { agent: agent.id().to_string() }.to_string();
                env.bus().publish(&topic, json!({ "goal": g.to_string() }))?;
            }
            EventKind::Belief { assert, retract } => {
                for a in retract {
                    env.store_mut().retract_atom(a);
                }
                for a in assert {
                    env.store_mut().assert_atom(a);
                }
                if let Some(agent) = agents.get_mut(target) {
                    agent.push_event(AgentEvent::Beliefs {
                        assert: assert.clone(),
                        retract: retract.clone(),
                        origin: format!("event {i}"),
                    });
                }
            }
            EventKind::Device { device, trigger, args } => {
                env.trigger(device, trigger, args)?;
            }
        }
        record(&recorder, i, None, None, &mut out.transitions);
        for agent in &mut agents {
            loop {
                agent.poll();
                if agent.pending() == 0 {
                    break;
                }
                if let Some(t) = agent.step(env) {
                    record(&recorder, i, Some(agent.id()), Some(t.cycle), &mut out.transitions);
                    out.traces.push(t);
                }
            }
        }
    }
    for a in &agents {
        out.anomalies.extend(a.anomalies().iter().map(|n| format!("{}: {n}", a.id())));
        out.consumed.push((a.id().to_string(), a.consumed()));
        out.final_beliefs.push((a.id().to_string(), a.core().beliefs().iter().cloned().collect()));
    }
    Ok(out)
}
