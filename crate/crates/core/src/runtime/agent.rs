use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use serde_json::json;

use crate::acting::{acting, CommandExecutor, ExecFailure};
use crate::env::{BusMessage, EnvError, Environment, FailureCode, Subscription, Topic};
use crate::goals::{goal_reasoning, GoalList, GoalStatus, GoalStatusSet, Outcome, StatusWrite, WriteKind};
use crate::logic::{parse_ground_atom, Atom, BeliefBase};
use crate::planning::{emit_pddl, planning, project, PddlTask, PlanningReport};
use crate::values::{value_reasoning_traced, ImportanceOrder};

use super::config::{AgentConfig, ConfigError};
use super::trace::{
    CommandEntry, CycleTrace, FailureEntry, GoalEntry, OutcomeEntry, PlanEntry, Timings, WriteEntry,
};

/// Something that may start a reasoning cycle.
#[derive(Clone, Debug, PartialEq)]
pub enum AgentEvent {
    Goal(Atom),
    Beliefs { assert: Vec<Atom>, retract: Vec<Atom>, origin: String },
}

/// Beliefs, goal statuses and rules of one agent; independent of any transport.
pub struct AgentCore {
    config: AgentConfig,
    beliefs: BeliefBase,
    gs: GoalStatusSet,
    cycles: usize,
    pddl_out: Option<PathBuf>,
}

/// What a cycle managed to compute before it finished or panicked.
#[derive(Default)]
struct Partial {
    iv: Option<ImportanceOrder>,
    goals: GoalList,
    report: Option<PlanningReport>,
    acting: Option<crate::acting::ActingReport>,
    notes: Vec<String>,
    marks: Vec<Instant>,
}

impl AgentCore {
    pub fn new(config: AgentConfig, initial: impl IntoIterator<Item = Atom>) -> Result<Self, ConfigError> {
        config.check()?;
        let mut beliefs = BeliefBase::new();
        for a in config.beliefs.iter().cloned().chain(initial) {
            beliefs.assert_belief(a).map_err(|_| ConfigError::NonGroundBelief {
                agent: config.id.clone(),
                belief: String::new(),
            })?;
        }
        Ok(AgentCore { config, beliefs, gs: GoalStatusSet::new(), cycles: 0, pddl_out: None })
    }

    pub fn id(&self) -> &str {
        &self.config.id
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn beliefs(&self) -> &BeliefBase {
        &self.beliefs
    }

    pub fn goal_status(&self) -> &GoalStatusSet {
        &self.gs
    }

    pub fn cycles(&self) -> usize {
        self.cycles
    }

    /// Writes a domain and problem file per planned goal into `dir`.
    pub fn set_pddl_out(&mut self, dir: Option<PathBuf>) {
        self.pddl_out = dir;
    }

    /// Applies a belief delta; true if the base changed.
    pub fn absorb(&mut self, assert: &[Atom], retract: &[Atom]) -> bool {
        apply_delta(&mut self.beliefs, assert, retract)
    }

    /// One pass through the four layers. A panic in any layer is contained:
    /// the goals still active are failed and the trace is marked.
    pub fn run_cycle(&mut self, trigger: &str, gg: &[Atom], exec: &mut dyn CommandExecutor) -> CycleTrace {
        self.cycles += 1;
        self.gs.take_log();
        let gs_before = goal_entries(&self.gs);
        let beliefs_at_start = self.beliefs.strings();
        let snapshot = self.pddl_out.as_ref().map(|_| self.beliefs.clone());

        let mut p = Partial::default();
        let cfg = &self.config;
        let beliefs = &mut self.beliefs;
        let gs = &mut self.gs;
        p.marks.push(Instant::now());
        let run = catch_unwind(AssertUnwindSafe(|| {
            let (iv, notes) = value_reasoning_traced(beliefs, &cfg.iv_d, &cfg.vo);
            p.notes.extend(notes);
            let augmented = iv.extend_beliefs(beliefs);
            match goal_reasoning(&augmented, gg, &iv, gs, &cfg.ga, &cfg.gi, cfg.policy) {
                Ok((goals, notes)) => {
                    p.goals = goals;
                    p.notes.extend(notes);
                }
                Err(e) => p.notes.push(format!("goal reasoning: {e}")),
            }
            p.iv = Some(iv);
            p.marks.push(Instant::now());
            let iv = p.iv.as_ref().expect("set above");
            let report = planning(beliefs, iv, &p.goals, &cfg.kw, &cfg.ai, &cfg.goal_conditions, &cfg.planning);
            p.marks.push(Instant::now());
            let act = acting(beliefs, iv, &report.plans, &cfg.kw, &cfg.kh, &cfg.ci, exec);
            p.marks.push(Instant::now());
            p.report = Some(report);
            p.acting = Some(act);
        }));
        let panicked = run.is_err();

        let mut notes = std::mem::take(&mut p.notes);
        if panicked {
            notes.push("cycle aborted by a panic; active goals failed".into());
            for s in self.gs.states().into_iter().filter(|s| s.status == GoalStatus::Active) {
                let _ = self.gs.set_outcome(&s.goal, s.source, Outcome::Fail);
            }
        } else {
            let report = p.report.as_ref().expect("completed cycle");
            let act = p.acting.as_ref().expect("completed cycle");
            for (g, _) in &report.failures {
                if let Err(e) = self.gs.set_outcome(&g.goal, g.source, Outcome::Fail) {
                    notes.push(e.to_string());
                }
            }
            for o in &act.outcomes {
                if let Err(e) = self.gs.set_outcome(&o.goal.goal, o.goal.source, o.outcome) {
                    notes.push(e.to_string());
                }
            }
            notes.extend(act.notes.iter().cloned());
        }

        let timings = timings(&p.marks, p.report.as_ref());
        if let (Some(dir), Some(b), Some(report)) = (&self.pddl_out, snapshot, p.report.as_ref()) {
            if let Err(e) = write_pddl(dir, &self.config, self.cycles, &b, &p.goals, report) {
                notes.push(format!("pddl output: {e}"));
            }
        }

        let report = p.report.unwrap_or_default();
        let act = p.acting.unwrap_or_default();
        CycleTrace {
            agent: self.config.id.clone(),
            cycle: self.cycles,
            trigger: trigger.to_string(),
            beliefs_at_start,
            iv: p.iv.map(|iv| iv.to_strings()).unwrap_or_default(),
            gs_before,
            goals: p
                .goals
                .goals
                .iter()
                .map(|g| GoalEntry { goal: g.goal.to_string(), status: "active".into(), source: g.source.name().into() })
                .collect(),
            forbidden: report.admissibility.forbidden().iter().map(|a| a.to_string()).collect(),
            plans: report
                .plans
                .iter()
                .map(|pl| PlanEntry {
                    goal: pl.goal.goal.to_string(),
                    source: pl.goal.source.name().into(),
                    target: pl.target.to_string(),
                    actions: pl.body.iter().map(|a| a.to_string()).collect(),
                })
                .collect(),
            failures: report
                .failures
                .iter()
                .map(|(g, why)| FailureEntry {
                    goal: g.goal.to_string(),
                    source: g.source.name().into(),
                    reason: why.to_string(),
                })
                .collect(),
            commands: act
                .executed
                .iter()
                .map(|c| CommandEntry {
                    goal: c.goal.goal.to_string(),
                    action: c.action.to_string(),
                    command: c.command.to_string(),
                    beliefs_before: c.beliefs_before.iter().map(|a| a.to_string()).collect(),
                })
                .collect(),
            outcomes: act
                .outcomes
                .iter()
                .map(|o| OutcomeEntry {
                    goal: o.goal.goal.to_string(),
                    source: o.goal.source.name().into(),
                    outcome: match o.outcome {
                        Outcome::Success => "success".into(),
                        Outcome::Fail => "fail".into(),
                    },
                    target: o.target.to_string(),
                    reason: o.reason.clone(),
                    beliefs: o.beliefs.iter().map(|a| a.to_string()).collect(),
                })
                .collect(),
            gs_after: goal_entries(&self.gs),
            status_writes: self.gs.take_log().iter().map(write_entry).collect(),
            notes,
            panicked,
            timings,
        }
    }
}

fn apply_delta(b: &mut BeliefBase, assert: &[Atom], retract: &[Atom]) -> bool {
    let mut changed = false;
    for a in retract {
        changed |= b.retract_belief(a).unwrap_or(false);
    }
    for a in assert {
        changed |= b.assert_belief(a.clone()).unwrap_or(false);
    }
    changed
}

fn goal_entries(gs: &GoalStatusSet) -> Vec<GoalEntry> {
    gs.states()
        .into_iter()
        .map(|s| GoalEntry { goal: s.goal.to_string(), status: s.status.name().into(), source: s.source.name().into() })
        .collect()
}

fn write_entry(w: &StatusWrite) -> WriteEntry {
    WriteEntry {
        goal: w.goal.to_string(),
        source: w.source.name().into(),
        from: w.from.map(|s| s.name().into()),
        to: w.to.name().into(),
        kind: match w.kind {
            WriteKind::Insert => "insert",
            WriteKind::Transition => "transition",
            WriteKind::Renew => "renew",
        }
        .into(),
    }
}

fn timings(marks: &[Instant], report: Option<&PlanningReport>) -> Timings {
    let span = |a: usize, b: usize| match (marks.get(a), marks.get(b)) {
        (Some(x), Some(y)) => (*y - *x).as_secs_f64(),
        _ => 0.0,
    };
    Timings {
        value_goal_s: span(0, 1),
        planning_s: report
            .map(|r| r.durations.iter().map(|(_, d)| d.as_secs_f64()).collect())
            .unwrap_or_default(),
        acting_s: span(2, 3),
        total_s: span(0, marks.len().saturating_sub(1)),
    }
}

fn file_stem(a: &Atom) -> String {
    a.to_string()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect::<String>()
        .split('_')
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join("_")
}

fn write_pddl(
    dir: &std::path::Path,
    cfg: &AgentConfig,
    cycle: usize,
    b: &BeliefBase,
    goals: &GoalList,
    report: &PlanningReport,
) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    let mut state = b.atoms();
    for g in &goals.goals {
        let target = crate::planning::resolve_goal(&g.goal, &cfg.goal_conditions);
        let init = BeliefBase::from_atoms(state.iter().cloned()).map_err(|e| e.to_string())?;
        let task = PddlTask::filtered(&cfg.id, &cfg.kw, &report.admissibility, &report.actions, &init, target);
        let (domain, problem) = emit_pddl(&task).map_err(|e| format!("{}: {e}", g.goal))?;
        let stem = format!("{}_c{cycle}_{}", cfg.id, file_stem(&g.goal));
        std::fs::write(dir.join(format!("domain_{stem}.pddl")), domain).map_err(|e| e.to_string())?;
        std::fs::write(dir.join(format!("problem_{stem}.pddl")), problem).map_err(|e| e.to_string())?;
        if let Some(plan) = report.plans.iter().find(|p| &p.goal == g) {
            state = project(&state, &report.actions, &plan.body).expect("planned bodies are applicable");
        }
    }
    Ok(())
}

/// Bus subscription with per-topic sequence accounting.
struct Inbox {
    sub: Subscription,
    seqs: BTreeMap<String, u64>,
    anomalies: Vec<String>,
    consumed: u64,
}

impl Inbox {
    fn drain(&mut self) -> Vec<BusMessage> {
        let msgs = self.sub.drain();
        for m in &msgs {
            let last = self.seqs.insert(m.topic.clone(), m.seq).unwrap_or(0);
            if m.seq != last + 1 {
                let note = format!("{}: expected seq {}, got {}", m.topic, last + 1, m.seq);
                log::warn!("{note}");
                self.anomalies.push(note);
            }
            self.consumed += 1;
        }
        msgs
    }
}

fn strings(v: Option<&serde_json::Value>) -> Vec<Atom> {
    v.and_then(|v| v.as_array())
        .map(|xs| xs.iter().filter_map(|x| x.as_str()).filter_map(|s| parse_ground_atom(s).ok()).collect())
        .unwrap_or_default()
}

/// Translates an inbound message into an event; signals are not events.
fn to_event(msg: &BusMessage) -> Option<AgentEvent> {
    match Topic::parse(&msg.topic).ok()? {
        Topic::Property { .. } => Some(AgentEvent::Beliefs {
            assert: strings(msg.payload.get("assert")),
            retract: strings(msg.payload.get("retract")),
            origin: msg.topic.clone(),
        }),
        Topic::Goals { .. } => {
            let text = msg.payload.get("goal").and_then(|g| g.as_str());
            match text.map(parse_ground_atom) {
                Some(Ok(g)) => Some(AgentEvent::Goal(g)),
                _ => {
                    log::warn!("{}: ignoring malformed goal message {}", msg.topic, msg.payload);
                    None
                }
            }
        }
        Topic::Signals { .. } | Topic::Operations { .. } => None,
    }
}

/// Sends commands over the bus and waits, in simulated time, for the reply.
struct BusExecutor<'a> {
    env: &'a mut Environment,
    inbox: &'a mut Inbox,
    queue: &'a mut VecDeque<AgentEvent>,
    owned: &'a BTreeSet<String>,
    next_req: &'a mut u64,
    timeout_ms: u64,
}

impl CommandExecutor for BusExecutor<'_> {
    fn execute(&mut self, cmd: &Atom, beliefs: &mut BeliefBase) -> Result<(), ExecFailure> {
        let mut args = cmd.args.iter().map(|t| t.to_string());
        let device = args.next().unwrap_or_default();
        if !self.owned.contains(&device) || !self.env.has_device(&device) {
            return Err(ExecFailure::new(FailureCode::UnknownDevice, device));
        }
        *self.next_req += 1;
        let req = *self.next_req;
        let payload = json!({"device": device, "op": cmd.predicate, "args": args.collect::<Vec<_>>(), "req": req});
        let topic = Topic::Operations { device: device.clone() }.to_string();
        self.env
            .bus()
            .publish(&topic, payload)
            .map_err(|e| ExecFailure::new(FailureCode::DeviceError, e.to_string()))?;
        self.env.pump();
        let mut reply = None;
        for msg in self.inbox.drain() {
            if let Ok(Topic::Signals { device: d }) = Topic::parse(&msg.topic) {
                if d == device && msg.payload.get("req").and_then(|r| r.as_u64()) == Some(req) {
                    reply = Some(msg.payload);
                }
                continue;
            }
            match to_event(&msg) {
                // the agent's own doing: absorbed without a new cycle
                Some(AgentEvent::Beliefs { assert, retract, .. }) => {
                    apply_delta(beliefs, &assert, &retract);
                }
                Some(goal) => self.queue.push_back(goal),
                None => {}
            }
        }
        let Some(reply) = reply else {
            self.env.advance(self.timeout_ms);
            return Err(ExecFailure::new(FailureCode::Timeout, format!("no reply after {} ms", self.timeout_ms)));
        };
        if reply.get("ok").and_then(|v| v.as_bool()) == Some(true) {
            return Ok(());
        }
        let err = reply.get("err").and_then(|v| v.as_str()).unwrap_or("");
        Err(ExecFailure::new(FailureCode::from_code(err).unwrap_or(FailureCode::DeviceError), err))
    }
}

/// An agent attached to a bus: it observes the properties and signals of its
/// devices and its own goal topic.
pub struct Agent {
    core: AgentCore,
    inbox: Inbox,
    queue: VecDeque<AgentEvent>,
    owned: BTreeSet<String>,
    next_req: u64,
}

impl Agent {
    /// Subscribes to the bus of `env` and takes the current state of the owned
    /// devices as initial beliefs.
    pub fn attach(config: AgentConfig, env: &Environment) -> Result<Self, AgentError> {
        if let Some(d) = config.devices.iter().find(|d| !env.has_device(d)) {
            return Err(AgentError::Env(EnvError::UnknownDevice(d.clone())));
        }
        let mut patterns = vec![Topic::Goals { agent: config.id.clone() }.to_string()];
        for d in &config.devices {
            patterns.push(format!("devices/{d}/properties/#"));
            patterns.push(Topic::Signals { device: d.clone() }.to_string());
        }
        let refs: Vec<&str> = patterns.iter().map(String::as_str).collect();
        let sub = env.bus().subscribe_all(&refs)?;
        let owned: BTreeSet<String> = config.devices.iter().cloned().collect();
        let initial = env.beliefs_of(&owned);
        let core = AgentCore::new(config, initial)?;
        Ok(Agent {
            core,
            inbox: Inbox { sub, seqs: BTreeMap::new(), anomalies: Vec::new(), consumed: 0 },
            queue: VecDeque::new(),
            owned,
            next_req: 0,
        })
    }

    pub fn core(&self) -> &AgentCore {
        &self.core
    }

    pub fn core_mut(&mut self) -> &mut AgentCore {
        &mut self.core
    }

    pub fn id(&self) -> &str {
        self.core.id()
    }

    pub fn owns(&self, device: &str) -> bool {
        self.owned.contains(device)
    }

    /// Messages taken off the bus so far.
    pub fn consumed(&self) -> u64 {
        self.inbox.consumed
    }

    /// Gaps or repeats in per-topic sequence numbers seen so far.
    pub fn anomalies(&self) -> &[String] {
        &self.inbox.anomalies
    }

    pub fn push_event(&mut self, event: AgentEvent) {
        self.queue.push_back(event);
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Moves inbound bus messages onto the event queue.
    pub fn poll(&mut self) {
        for msg in self.inbox.drain() {
            if let Some(e) = to_event(&msg) {
                self.queue.push_back(e);
            }
        }
    }

    /// Handles the oldest queued event; returns a trace if it started a cycle.
    pub fn step(&mut self, env: &mut Environment) -> Option<CycleTrace> {
        let event = self.queue.pop_front()?;
        let (trigger, gg) = match event {
            AgentEvent::Goal(g) => (format!("goal {g}"), vec![g]),
            AgentEvent::Beliefs { assert, retract, origin } => {
                if !self.core.absorb(&assert, &retract) {
                    return None;
                }
                let delta: Vec<String> = retract
                    .iter()
                    .map(|a| format!("-{a}"))
                    .chain(assert.iter().map(|a| format!("+{a}")))
                    .collect();
                (format!("{origin} {}", delta.join(" ")), vec![])
            }
        };
        let mut exec = BusExecutor {
            env,
            inbox: &mut self.inbox,
            queue: &mut self.queue,
            owned: &self.owned,
            next_req: &mut self.next_req,
            timeout_ms: self.core.config.command_timeout_ms,
        };
        Some(self.core.run_cycle(&trigger, &gg, &mut exec))
    }

    /// Polls the bus and handles events until the queue is empty.
    pub fn run_pending(&mut self, env: &mut Environment) -> Vec<CycleTrace> {
        let mut traces = Vec::new();
        loop {
            self.poll();
            if self.queue.is_empty() {
                return traces;
            }
            while !self.queue.is_empty() {
                traces.extend(self.step(env));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("no agent `{0}`")]
    UnknownAgent(String),
}
