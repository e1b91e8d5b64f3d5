use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::env::{Bus, Environment, TcpBridge};
use crate::planning::Strategy;
use crate::runtime::{run_agents, AgentError, ObservedTransition, RunOutput};

use super::format::ExpectedTransition;
use super::loader::Scenario;

#[derive(Clone, Debug, Default)]
pub struct RunSettings {
    /// Overrides every agent's search strategy.
    pub strategy: Option<Strategy>,
    /// Overrides the scenario seed.
    pub seed: Option<u64>,
    pub pddl_out: Option<PathBuf>,
    /// Also expose the bus over TCP on this port for outside observers.
    pub tcp_port: Option<u16>,
}

#[derive(Clone, Debug)]
pub struct ScenarioRun {
    pub output: RunOutput,
    pub wall: Duration,
}

pub fn run_scenario(scn: &Scenario, settings: &RunSettings) -> Result<ScenarioRun, AgentError> {
    let start = Instant::now();
    let bus = Bus::new();
    let _bridge = settings.tcp_port.map(|p| TcpBridge::start(bus.clone(), p)).transpose()?;
    let mut env = Environment::new(bus, &scn.devices, settings.seed.or(scn.seed))?;
    let mut agents = scn.agents.clone();
    if let Some(s) = settings.strategy {
        for a in &mut agents {
            a.planning.strategy = s;
        }
    }
    let output = run_agents(agents, &mut env, &scn.events, settings.pddl_out.clone())?;
    Ok(ScenarioRun { output, wall: start.elapsed() })
}

/// First point where the observed transitions leave the expected ones.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Divergence {
    /// Position in the expected list.
    pub index: usize,
    pub expected: Option<ExpectedTransition>,
    pub observed: Option<ObservedTransition>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub compared: usize,
    pub divergence: Option<Divergence>,
    pub warning: Option<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.divergence.is_none()
    }
}

fn matches(e: &ExpectedTransition, o: &ObservedTransition) -> bool {
    e.device == o.device && e.property == o.property && e.to == o.to && e.from.as_ref().is_none_or(|f| o.from.as_ref() == Some(f))
}

/// Compares expectations with observations, looking only at the (device,
/// property) pairs the expectations mention.
pub fn validate(expect: &[ExpectedTransition], observed: &[ObservedTransition]) -> ValidationReport {
    if expect.is_empty() {
        return ValidationReport {
            compared: 0,
            divergence: None,
            warning: Some("no expected transitions; nothing to compare".into()),
        };
    }
    let relevant: Vec<&ObservedTransition> = observed
        .iter()
        .filter(|o| expect.iter().any(|e| e.device == o.device && e.property == o.property))
        .collect();
    let n = expect.len().max(relevant.len());
    for i in 0..n {
        let (e, o) = (expect.get(i), relevant.get(i).copied());
        let same = matches!((e, o), (Some(e), Some(o)) if matches(e, o));
        if !same {
            return ValidationReport {
                compared: i,
                divergence: Some(Divergence { index: i, expected: e.cloned(), observed: o.cloned() }),
                warning: None,
            };
        }
    }
    ValidationReport { compared: n, divergence: None, warning: None }
}

impl std::fmt::Display for Divergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let exp = match &self.expected {
            Some(e) => format!("{}.{}: {} -> {}", e.device, e.property, e.from.as_deref().unwrap_or("*"), e.to),
            None => "nothing".into(),
        };
        let obs = match &self.observed {
            Some(o) => {
                let at = match (&o.agent, o.cycle) {
                    (Some(a), Some(c)) => format!(" (event {}, {a} cycle {c})", o.event),
                    _ => format!(" (event {}, scripted)", o.event),
                };
                format!("{}.{}: {} -> {}{at}", o.device, o.property, o.from.as_deref().unwrap_or("?"), o.to)
            }
            None => "nothing".into(),
        };
        write!(f, "step {}: expected {exp}, observed {obs}", self.index)
    }
}

/// Per-layer times of one execution, summed over cycles.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ExecutionTiming {
    pub cycles: usize,
    /// One entry per planned goal, in cycle order.
    pub planning_s: Vec<(String, f64)>,
    pub value_goal_s: f64,
    pub max_cycle_value_goal_s: f64,
    pub acting_s: f64,
    pub total_s: f64,
    pub wall_s: f64,
}

impl ExecutionTiming {
    pub fn from_run(run: &ScenarioRun) -> Self {
        let mut t = ExecutionTiming { wall_s: run.wall.as_secs_f64(), ..Default::default() };
        for c in &run.output.traces {
            t.cycles += 1;
            for (g, s) in c.goals.iter().zip(&c.timings.planning_s) {
                t.planning_s.push((format!("{} [{}]", g.goal, c.agent), *s));
            }
            t.value_goal_s += c.timings.value_goal_s;
            t.max_cycle_value_goal_s = t.max_cycle_value_goal_s.max(c.timings.value_goal_s);
            t.acting_s += c.timings.acting_s;
            t.total_s += c.timings.total_s;
        }
        t
    }

    pub fn sum_of_parts(&self) -> f64 {
        self.value_goal_s + self.planning_s.iter().map(|(_, s)| s).sum::<f64>() + self.acting_s
    }

    pub fn max_goal_planning_s(&self) -> f64 {
        self.planning_s.iter().map(|(_, s)| *s).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BenchReport {
    pub executions: Vec<ExecutionTiming>,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

impl BenchReport {
    /// Rows are layers, columns are executions followed by mean and standard deviation.
    pub fn table(&self) -> String {
        let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
        let goals = self.executions.first().map(|e| e.planning_s.len()).unwrap_or(0);
        for i in 0..goals {
            let label = format!("planning {}", self.executions[0].planning_s[i].0);
            rows.push((label, self.executions.iter().map(|e| e.planning_s.get(i).map_or(0.0, |p| p.1)).collect()));
        }
        let col = |f: fn(&ExecutionTiming) -> f64| self.executions.iter().map(f).collect::<Vec<_>>();
        rows.push(("value+goal reasoning".into(), col(|e| e.value_goal_s)));
        rows.push(("value+goal reasoning, worst cycle".into(), col(|e| e.max_cycle_value_goal_s)));
        rows.push(("acting".into(), col(|e| e.acting_s)));
        rows.push(("total".into(), col(|e| e.total_s)));
        rows.push(("sum of parts".into(), col(ExecutionTiming::sum_of_parts)));

        let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(8);
        let mut out = format!("{:width$}", "seconds");
        for i in 0..self.executions.len() {
            let _ = write!(out, " {:>12}", format!("exec #{}", i + 1));
        }
        let _ = writeln!(out, " {:>12} {:>12}", "mean", "stddev");
        for (label, xs) in rows {
            let _ = write!(out, "{label:width$}");
            for x in &xs {
                let _ = write!(out, " {x:>12.6}");
            }
            let (m, sd) = mean_sd(&xs);
            let _ = writeln!(out, " {m:>12.6} {sd:>12.6}");
        }
        out
    }
}

pub fn bench(scn: &Scenario, settings: &RunSettings, repetitions: usize) -> Result<BenchReport, AgentError> {
    let mut report = BenchReport::default();
    for _ in 0..repetitions {
        let run = run_scenario(scn, settings)?;
        report.executions.push(ExecutionTiming::from_run(&run));
    }
    Ok(report)
}
