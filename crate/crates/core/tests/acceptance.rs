//! Acceptance criteria. Runs as a plain binary so the PASS/FAIL lines always
//! show up in the test output.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{atom, audit_gates, audit_lifecycle, base, flat_apply, random_scenario, FlatOrder, GateAudit, StripsInstance};
use smash_core::logic::{parse_formula, to_dnf, Atom, BeliefBase};
use smash_core::planning::{
    emit_pddl, ground, parse_pddl, plan_for_goal, universe, validate_plan, ActionModel, Admissibility, PddlTask,
    SearchLimits, SearchResult, Strategy as SearchStrategy,
};
use smash_core::runtime::CycleTrace;
use smash_core::scenario::{bench, run_scenario, validate, RunSettings, Scenario};
use smash_core::values::{value_reasoning, ImportanceOrder, Value, ValueOrderingRule};

const GOLDEN_WALL_S: f64 = 5.0;
const VALUE_GOAL_BOUND_S: f64 = 0.425;
const PLANNING_BOUND_S: f64 = 1.124;
const ADDITIVITY_TOLERANCE: f64 = 0.05;
const BENCH_REPETITIONS: usize = 4;
const PLANNER_INSTANCES: u64 = 200;
const RANDOM_SCENARIOS: u64 = 100;
const VALUE_CASES: u32 = 1000;
const PDDL_MODELS: u64 = 50;
const COUNTERFACTUAL_STEP: usize = 2;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ac1_golden_trace() -> Outcome {
    let scn = Scenario::bundled_poc();
    let run = run_scenario(&scn, &RunSettings::default()).map_err(|e| e.to_string())?;
    let report = validate(&scn.expect, &run.output.transitions);
    if let Some(d) = &report.divergence {
        return Err(d.to_string());
    }
    ensure(report.compared == scn.expect.len(), || format!("compared {} of {}", report.compared, scn.expect.len()))?;
    let wall = run.wall.as_secs_f64();
    ensure(wall < GOLDEN_WALL_S, || format!("took {wall:.3} s"))?;
    Ok(format!("{} transitions match, {} cycles, {wall:.3} s", report.compared, run.output.traces.len()))
}

fn ac2_timing() -> Outcome {
    let scn = Scenario::bundled_poc();
    let started = Instant::now();
    let report = bench(&scn, &RunSettings::default(), BENCH_REPETITIONS).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed().as_secs_f64();
    ensure(report.executions.len() == BENCH_REPETITIONS, || "missing executions".into())?;
    let mut worst_vg: f64 = 0.0;
    let mut worst_plan: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    for (i, e) in report.executions.iter().enumerate() {
        ensure(e.cycles > 0 && !e.planning_s.is_empty(), || format!("exec {i}: nothing timed"))?;
        worst_vg = worst_vg.max(e.max_cycle_value_goal_s);
        worst_plan = worst_plan.max(e.max_goal_planning_s());
        let gap = (e.total_s - e.sum_of_parts()).abs() / e.total_s;
        worst_gap = worst_gap.max(gap);
        ensure(e.wall_s < GOLDEN_WALL_S, || format!("exec {i}: {:.3} s", e.wall_s))?;
    }
    ensure(worst_vg <= VALUE_GOAL_BOUND_S, || format!("value+goal cycle {worst_vg:.6} s"))?;
    ensure(worst_plan <= PLANNING_BOUND_S, || format!("planning {worst_plan:.6} s"))?;
    ensure(worst_gap <= ADDITIVITY_TOLERANCE, || format!("parts differ from total by {:.2}%", worst_gap * 100.0))?;
    Ok(format!(
        "worst value+goal cycle {worst_vg:.6} s, worst goal planning {worst_plan:.6} s, additivity gap {:.2}%, {elapsed:.3} s for {BENCH_REPETITIONS} runs",
        worst_gap * 100.0
    ))
}

fn strips_models(inst: &StripsInstance) -> Vec<ActionModel> {
    inst.schema_texts()
        .iter()
        .map(|(h, p, a, d)| ActionModel::parse(h, p, a, d).unwrap())
        .collect()
}

fn ac3_planner() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut total_len = 0;
    let mut longest = 0;
    let mut nontrivial = 0;
    for k in 0..PLANNER_INSTANCES {
        let inst = StripsInstance::random(&mut rng);
        let models = strips_models(&inst);
        let init = inst.state_atoms(inst.init);
        let b = BeliefBase::from_atoms(init.iter().cloned()).unwrap();
        let actions = ground(&models, &b, &universe(&b, &models, &[]), &Admissibility::all());
        let goal = parse_formula(&inst.goal_text()).unwrap();
        let optimum = inst.distances()[inst.init as usize].ok_or_else(|| format!("instance {k}: generator broke"))?;
        for strategy in [SearchStrategy::Bfs, SearchStrategy::Gbfs] {
            let r = plan_for_goal(&init, &goal, &actions, strategy, SearchLimits::default()).map_err(|e| e.to_string())?;
            let SearchResult::Found(plan) = r else {
                return Err(format!("instance {k}: {strategy} returned {r:?}"));
            };
            validate_plan(&init, &models, &goal, &plan).map_err(|e| format!("instance {k}: {strategy} plan invalid: {e}"))?;
            if strategy == SearchStrategy::Bfs {
                ensure(plan.len() == optimum, || format!("instance {k}: bfs length {} vs optimum {optimum}", plan.len()))?;
                total_len += plan.len();
                longest = longest.max(plan.len());
                nontrivial += usize::from(!plan.is_empty());
            }
        }
    }
    Ok(format!(
        "{PLANNER_INSTANCES} instances ({nontrivial} needing actions, longest {longest}), bfs optimal, every plan validated, mean length {:.2}",
        total_len as f64 / PLANNER_INSTANCES as f64
    ))
}

fn random_runs() -> Result<Vec<(Scenario, Vec<CycleTrace>)>, String> {
    (0..RANDOM_SCENARIOS)
        .map(|seed| {
            let scn = Scenario::parse(&random_scenario(seed)).map_err(|e| format!("scenario {seed}: {e}"))?;
            let run = run_scenario(&scn, &RunSettings::default()).map_err(|e| format!("scenario {seed}: {e}"))?;
            Ok((scn, run.output.traces))
        })
        .collect()
}

fn ac4_value_gates(runs: &[(Scenario, Vec<CycleTrace>)]) -> Outcome {
    let mut audit = GateAudit::default();
    for (scn, traces) in runs {
        for cfg in &scn.agents {
            audit_gates(cfg, traces, &mut audit);
        }
    }
    if let Some(v) = audit.violations.first() {
        return Err(format!("{} violations, first: {v}", audit.violations.len()));
    }
    ensure(audit.planned_actions > 0 && audit.executed_commands > 0, || "nothing was planned or executed".into())?;
    ensure(audit.forbidden_patterns > 0 && audit.blocked_commands > 0, || {
        format!("gates never fired ({} forbidden, {} blocked)", audit.forbidden_patterns, audit.blocked_commands)
    })?;
    Ok(format!(
        "{RANDOM_SCENARIOS} scenarios, 0 violations over {} planned actions and {} commands ({} forbidden patterns, {} blocked commands)",
        audit.planned_actions, audit.executed_commands, audit.forbidden_patterns, audit.blocked_commands
    ))
}

fn ac5_lifecycle(runs: &[(Scenario, Vec<CycleTrace>)]) -> Outcome {
    let mut traces: Vec<CycleTrace> = runs.iter().flat_map(|(_, t)| t.iter().cloned()).collect();
    for scn in [Scenario::bundled_poc(), counterfactual()] {
        traces.extend(run_scenario(&scn, &RunSettings::default()).map_err(|e| e.to_string())?.output.traces);
    }
    let (writes, successes, bad) = audit_lifecycle(&traces);
    if let Some(v) = bad.first() {
        return Err(format!("{} violations, first: {v}", bad.len()));
    }
    ensure(writes > 0 && successes > 0, || "no writes or successes seen".into())?;
    Ok(format!("{writes} status writes legal, {successes} successes hold in their beliefs"))
}

const VALUES: [Value; 6] = [
    Value::Hedonism,
    Value::ConformityRules,
    Value::BenevolenceCaring,
    Value::Face,
    Value::Achievement,
    Value::Tradition,
];

fn value_op() -> impl Strategy<Value = String> {
    let v = || (0..VALUES.len()).prop_map(|i| VALUES[i].name());
    prop_oneof![
        v().prop_map(|a| format!("make_most({a})")),
        v().prop_map(|a| format!("make_least({a})")),
        v().prop_map(|a| format!("remove({a})")),
        (v(), v()).prop_map(|(a, b)| format!("above({a}, {b})")),
        (v(), v()).prop_map(|(a, b)| format!("below({a}, {b})")),
        (v(), v()).prop_map(|(a, b)| format!("same({a}, {b})")),
    ]
}

/// Buckets from a value permutation prefix and bucket breaks.
fn initial_order() -> impl Strategy<Value = Vec<Vec<Value>>> {
    (Just(VALUES.to_vec()).prop_shuffle(), 0..=VALUES.len(), proptest::collection::vec(any::<bool>(), VALUES.len()))
        .prop_map(|(vals, n, breaks)| {
            let mut out: Vec<Vec<Value>> = Vec::new();
            for (v, brk) in vals.into_iter().take(n).zip(breaks) {
                match out.last_mut() {
                    Some(b) if !brk => b.push(v),
                    _ => out.push(vec![v]),
                }
            }
            out
        })
}

const CONDITIONS: [&str; 6] = ["true", "c0", "not c1", "c2", "p(X)", "p(X) & not q(X)"];
const FACTS: [&str; 9] = ["c0", "c1", "c2", "p(a0)", "p(a1)", "p(a2)", "q(a0)", "q(a1)", "q(a2)"];

/// Times a rule with this condition fires, counted directly from the facts.
fn firings(cond: &str, facts: &BTreeSet<&str>) -> usize {
    let has = |f: &str| facts.contains(f);
    let xs = ["a0", "a1", "a2"];
    match cond {
        "true" => 1,
        "not c1" => usize::from(!has("c1")),
        "p(X)" => xs.iter().filter(|x| has(&format!("p({x})"))).count(),
        "p(X) & not q(X)" => xs.iter().filter(|x| has(&format!("p({x})")) && !has(&format!("q({x})"))).count(),
        c => usize::from(has(c)),
    }
}

fn ac6_value_oracle() -> Outcome {
    let rules = proptest::collection::vec((0..CONDITIONS.len(), proptest::collection::vec(value_op(), 1..4)), 0..5);
    let facts = proptest::collection::btree_set(0..FACTS.len(), 0..FACTS.len());
    let mut runner = TestRunner::new(Config { cases: VALUE_CASES, failure_persistence: None, ..Config::default() });
    let cases = std::cell::Cell::new(0u32);
    runner
        .run(&(initial_order(), rules, facts), |(iv_d, rules, facts)| {
            cases.set(cases.get() + 1);
            let facts: BTreeSet<&str> = facts.into_iter().map(|i| FACTS[i]).collect();
            let b = base(&facts.iter().copied().collect::<Vec<_>>());
            let vo: Vec<ValueOrderingRule> =
                rules.iter().map(|(c, ops)| ValueOrderingRule::parse(CONDITIONS[*c], ops).unwrap()).collect();
            let got = value_reasoning(&b, &ImportanceOrder::from_buckets(iv_d.clone()).unwrap(), &vo);
            let mut oracle = FlatOrder::new(&iv_d);
            for (c, ops) in &rules {
                for _ in 0..firings(CONDITIONS[*c], &facts) {
                    for op in ops {
                        flat_apply(&mut oracle, op);
                    }
                }
            }
            if got.buckets() != oracle.buckets().as_slice() {
                return Err(TestCaseError::fail(format!("{iv_d:?} {rules:?} {facts:?}: got {got}, oracle {:?}", oracle.buckets())));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{} cases agree with the list-surgery oracle", cases.get()))
}

fn literal_sets(f: &smash_core::logic::Formula) -> Vec<(BTreeSet<Atom>, BTreeSet<Atom>)> {
    to_dnf(f)
        .into_iter()
        .map(|c| (c.pos.into_iter().collect(), c.neg.into_iter().collect()))
        .collect()
}

/// An action model over fixed predicates q0/1, q1/2, q2/0, q3/1.
fn random_model(rng: &mut ChaCha8Rng, i: u64) -> ActionModel {
    use rand::seq::SliceRandom;
    use rand::Rng;
    let mut params = vec!["A", "B", "C"];
    params.shuffle(rng);
    params.truncate(rng.gen_range(0..=3));
    let consts = ["k0", "k1"];
    let arg = |rng: &mut ChaCha8Rng, vars: &[&str]| -> String {
        if vars.is_empty() || rng.gen_bool(0.25) {
            consts.choose(rng).unwrap().to_string()
        } else {
            vars.choose(rng).unwrap().to_string()
        }
    };
    let lit = |rng: &mut ChaCha8Rng, vars: &[&str]| -> String {
        match rng.gen_range(0..4) {
            0 => format!("q0({})", arg(rng, vars)),
            1 => format!("q1({}, {})", arg(rng, vars), arg(rng, vars)),
            2 => "q2".to_string(),
            _ => format!("q3({})", arg(rng, vars)),
        }
    };
    let mut scope: Vec<&str> = params.clone();
    if rng.gen_bool(0.3) {
        scope.push("D");
    }
    let mut pre = vec![lit(rng, &scope)];
    let bound: Vec<&str> = scope.iter().copied().filter(|v| pre[0].contains(v)).collect();
    for _ in 0..rng.gen_range(0..3) {
        if rng.gen_bool(0.5) {
            pre.push(format!("not {}", lit(rng, &bound)));
        } else {
            pre.push(lit(rng, &bound));
        }
    }
    let head = if params.is_empty() { format!("act{i}") } else { format!("act{i}({})", params.join(", ")) };
    let mut effect_scope = params.clone();
    effect_scope.extend(bound.iter().filter(|v| !params.contains(v)));
    let add: Vec<String> = (0..rng.gen_range(0..=2)).map(|_| lit(rng, &effect_scope)).collect();
    let del: Vec<String> = (0..rng.gen_range(0..=2)).map(|_| lit(rng, &effect_scope)).collect();
    ActionModel::parse(&head, &pre.join(" & "), &add, &del).unwrap()
}

fn ac7_pddl() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..PDDL_MODELS {
        let m = random_model(&mut rng, i);
        let init = base(&["q0(k0)", "q1(k0, k1)", "q3(k2)"]);
        let task = PddlTask::new("rt", vec![m.clone()], &init, parse_formula("q2 & not q0(k1)").unwrap());
        let (d, p) = emit_pddl(&task).map_err(|e| format!("model {i} ({m}): {e}"))?;
        let back = parse_pddl(&d, &p).map_err(|e| format!("model {i}: {e}\n{d}"))?;
        let [n] = back.actions.as_slice() else {
            return Err(format!("model {i}: {} actions came back", back.actions.len()));
        };
        let same = n.name == m.name
            && n.params == m.params
            && literal_sets(&n.precondition) == literal_sets(&m.precondition)
            && n.add.iter().collect::<BTreeSet<_>>() == m.add.iter().collect::<BTreeSet<_>>()
            && n.delete.iter().collect::<BTreeSet<_>>() == m.delete.iter().collect::<BTreeSet<_>>()
            && back.init == task.init
            && literal_sets(&back.goal) == literal_sets(&task.goal);
        ensure(same, || format!("model {i} changed: {m} became {n}"))?;
        ensure(emit_pddl(&back).map_err(|e| e.to_string())? == (d, p), || format!("model {i}: re-emission differs"))?;
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let settings = RunSettings { pddl_out: Some(dir.path().to_path_buf()), ..Default::default() };
    let run = run_scenario(&Scenario::bundled_poc(), &settings).map_err(|e| e.to_string())?;
    let mut tasks: Vec<(String, PddlTask)> = Vec::new();
    for entry in std::fs::read_dir(dir.path()).map_err(|e| e.to_string())? {
        let name = entry.map_err(|e| e.to_string())?.file_name().to_string_lossy().into_owned();
        let Some(stem) = name.strip_prefix("domain_").and_then(|s| s.strip_suffix(".pddl")) else { continue };
        let d = std::fs::read_to_string(dir.path().join(&name)).map_err(|e| e.to_string())?;
        let p = std::fs::read_to_string(dir.path().join(format!("problem_{stem}.pddl"))).map_err(|e| format!("{stem}: {e}"))?;
        tasks.push((stem.to_string(), parse_pddl(&d, &p).map_err(|e| format!("{stem}: {e}"))?));
    }
    let mut checked = 0;
    for t in &run.output.traces {
        let prefix = format!("{}_c{}_", t.agent, t.cycle);
        for plan in &t.plans {
            let body: Vec<Atom> = plan.actions.iter().map(|a| atom(a)).collect();
            let ok = tasks
                .iter()
                .filter(|(stem, _)| stem.starts_with(&prefix))
                .any(|(_, task)| validate_plan(&task.init, &task.actions, &task.goal, &body).is_ok());
            ensure(ok, || format!("cycle {}: plan {:?} fails against every emitted task", t.cycle, plan.actions))?;
            checked += 1;
        }
    }
    ensure(checked > 0, || "no plans in the golden run".into())?;
    Ok(format!(
        "{PDDL_MODELS} models round-trip intact; {} emitted task files parse, {checked} plans validate against them",
        tasks.len()
    ))
}

/// The bundled scenario with conformity ranked above hedonism.
fn counterfactual() -> Scenario {
    let mut scn = Scenario::bundled_poc();
    for a in &mut scn.agents {
        a.iv_d = ImportanceOrder::from_buckets(vec![
            vec![Value::BenevolenceCaring],
            vec![Value::ConformityRules],
            vec![Value::Hedonism],
        ])
        .unwrap();
    }
    scn
}

fn ac8_counterfactual() -> Outcome {
    let scn = counterfactual();
    let run = run_scenario(&scn, &RunSettings::default()).map_err(|e| e.to_string())?;
    let report = validate(&scn.expect, &run.output.transitions);
    let d = report.divergence.ok_or("counterfactual matched the golden trace")?;
    ensure(d.index == COUNTERFACTUAL_STEP, || format!("diverged at {d}"))?;
    let o = d.observed.as_ref().ok_or("nothing observed at the divergence")?;
    ensure(o.device == "phone" && o.to == "ringing" && o.event == COUNTERFACTUAL_STEP, || format!("unexpected divergence {d}"))?;
    Ok(format!("{d}"))
}

fn run(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    match result {
        Ok(detail) => {
            println!("{name} PASS: {detail}");
            true
        }
        Err(why) => {
            println!("{name} FAIL: {why}");
            false
        }
    }
}

fn main() {
    let runs = random_runs();
    let results = [
        run("AC1 golden trace", ac1_golden_trace),
        run("AC2 layer timings", ac2_timing),
        run("AC3 planner soundness", ac3_planner),
        run("AC4 value gates", || ac4_value_gates(runs.as_ref().map_err(Clone::clone)?)),
        run("AC5 goal lifecycle", || ac5_lifecycle(runs.as_ref().map_err(Clone::clone)?)),
        run("AC6 value reasoning", ac6_value_oracle),
        run("AC7 PDDL round trip", ac7_pddl),
        run("AC8 counterfactual order", ac8_counterfactual),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("{} of {} acceptance criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
