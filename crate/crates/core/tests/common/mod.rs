//! Reference implementations and generators shared by the integration tests.
//! Each oracle is written from the rules it checks, not from the library code.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use smash_core::logic::{evaluate, parse_formula, parse_ground_atom, Atom, BeliefBase, Substitution};
use smash_core::runtime::{AgentConfig, CycleTrace};
use smash_core::values::{ImportanceOrder, Value};

pub fn atom(s: &str) -> Atom {
    parse_ground_atom(s).unwrap()
}

pub fn base<S: AsRef<str>>(atoms: &[S]) -> BeliefBase {
    BeliefBase::from_atoms(atoms.iter().map(|a| atom(a.as_ref()))).unwrap()
}

// ---------------------------------------------------------------------------
// Value order as a flat list of (value, tie group), groups contiguous.

#[derive(Clone, Debug)]
pub struct FlatOrder {
    items: Vec<(Value, u32)>,
    fresh: u32,
}

impl FlatOrder {
    pub fn new(buckets: &[Vec<Value>]) -> Self {
        let mut items = Vec::new();
        for (g, b) in buckets.iter().enumerate() {
            for v in b {
                items.push((*v, g as u32));
            }
        }
        FlatOrder { items, fresh: buckets.len() as u32 }
    }

    fn tag(&mut self) -> u32 {
        self.fresh += 1;
        self.fresh
    }

    fn group_of(&self, v: Value) -> Option<u32> {
        self.items.iter().find(|(x, _)| *x == v).map(|(_, g)| *g)
    }

    fn drop_value(&mut self, v: Value) {
        self.items.retain(|(x, _)| *x != v);
    }

    pub fn make_most(&mut self, v: Value) {
        self.drop_value(v);
        let t = self.tag();
        self.items.insert(0, (v, t));
    }

    pub fn make_least(&mut self, v: Value) {
        self.drop_value(v);
        let t = self.tag();
        self.items.push((v, t));
    }

    /// `kind` is "above", "below" or "same". Returns false when the op is skipped.
    pub fn relate(&mut self, kind: &str, v1: Value, v2: Value) -> bool {
        if v1 == v2 || self.group_of(v2).is_none() {
            return false;
        }
        self.drop_value(v1);
        let g = self.group_of(v2).unwrap();
        let first = self.items.iter().position(|(_, x)| *x == g).unwrap();
        let last = self.items.iter().rposition(|(_, x)| *x == g).unwrap();
        match kind {
            "above" => {
                let t = self.tag();
                self.items.insert(first, (v1, t));
            }
            "below" => {
                let t = self.tag();
                self.items.insert(last + 1, (v1, t));
            }
            _ => self.items.insert(last + 1, (v1, g)),
        }
        true
    }

    pub fn remove(&mut self, v: Value) {
        self.drop_value(v);
    }

    pub fn buckets(&self) -> Vec<BTreeSet<Value>> {
        let mut out: Vec<BTreeSet<Value>> = Vec::new();
        let mut prev = None;
        for (v, g) in &self.items {
            if prev != Some(*g) {
                out.push(BTreeSet::new());
                prev = Some(*g);
            }
            out.last_mut().unwrap().insert(*v);
        }
        out
    }
}

/// Applies an op given in rule syntax, e.g. `above(hedonism, face)`.
pub fn flat_apply(o: &mut FlatOrder, op: &str) -> bool {
    let (name, rest) = op.split_once('(').unwrap();
    let args: Vec<Value> = rest
        .trim_end_matches(')')
        .split(',')
        .map(|s| s.trim().parse().unwrap())
        .collect();
    match name {
        "make_most" => o.make_most(args[0]),
        "make_least" => o.make_least(args[0]),
        "remove" => o.remove(args[0]),
        k => return o.relate(k, args[0], args[1]),
    }
    true
}

// ---------------------------------------------------------------------------
// Small propositional STRIPS instances over fluents p0..p7, as bitmasks.

#[derive(Clone, Debug)]
pub struct StripsAction {
    /// (required true, required false) per alternative.
    pub alternatives: Vec<(u8, u8)>,
    pub add: u8,
    pub del: u8,
}

#[derive(Clone, Debug)]
pub struct StripsInstance {
    pub fluents: usize,
    pub actions: Vec<StripsAction>,
    pub init: u8,
    pub goal_pos: u8,
    pub goal_neg: u8,
}

fn random_mask(rng: &mut ChaCha8Rng, n: usize, p: f64) -> u8 {
    (0..n).filter(|_| rng.gen_bool(p)).fold(0u8, |m, i| m | (1 << i))
}

impl StripsAction {
    pub fn applicable(&self, s: u8) -> bool {
        self.alternatives.iter().any(|(p, n)| s & p == *p && s & n == 0)
    }

    pub fn apply(&self, s: u8) -> u8 {
        (s & !self.del) | self.add
    }
}

impl StripsInstance {
    /// Solvable by construction: the goal is read off a random walk from `init`.
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let fluents = rng.gen_range(3..=8);
        let count = rng.gen_range(1..=12);
        let mut actions = Vec::new();
        for _ in 0..count {
            let alts = if rng.gen_bool(0.2) { 2 } else { 1 };
            let alternatives = (0..alts)
                .map(|_| {
                    let p = random_mask(rng, fluents, 0.25);
                    let n = random_mask(rng, fluents, 0.15) & !p;
                    (p, n)
                })
                .collect();
            let mut add = random_mask(rng, fluents, 0.3);
            let del = random_mask(rng, fluents, 0.2);
            if add == 0 && del == 0 {
                add = 1 << rng.gen_range(0..fluents);
            }
            actions.push(StripsAction { alternatives, add, del });
        }
        let init = random_mask(rng, fluents, 0.4);
        let mut s = init;
        for _ in 0..rng.gen_range(1..=6) {
            let enabled: Vec<&StripsAction> = actions.iter().filter(|a| a.applicable(s)).collect();
            match enabled.choose(rng) {
                Some(a) => s = a.apply(s),
                None => break,
            }
        }
        // walk further so the goal usually differs from the start
        for _ in 0..8 {
            if s != init {
                break;
            }
            let enabled: Vec<&StripsAction> = actions.iter().filter(|a| a.applicable(s)).collect();
            match enabled.choose(rng) {
                Some(a) => s = a.apply(s),
                None => break,
            }
        }
        let mut chosen: Vec<usize> = (0..fluents).collect();
        chosen.shuffle(rng);
        // changed fluents first, so the goal is not met at the start
        chosen.sort_by_key(|i| (s ^ init) & (1 << i) == 0);
        chosen.truncate(rng.gen_range(1..=3.min(fluents)));
        let (mut goal_pos, mut goal_neg) = (0, 0);
        for i in chosen {
            if s & (1 << i) != 0 {
                goal_pos |= 1 << i;
            } else {
                goal_neg |= 1 << i;
            }
        }
        StripsInstance { fluents, actions, init, goal_pos, goal_neg }
    }

    pub fn is_goal(&self, s: u8) -> bool {
        s & self.goal_pos == self.goal_pos && s & self.goal_neg == 0
    }

    pub fn action_name(i: usize) -> String {
        format!("a{i:02}")
    }

    fn literals(mask: u8, positive: bool, n: usize) -> Vec<String> {
        (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| if positive { format!("p{i}") } else { format!("not p{i}") })
            .collect()
    }

    /// Action schema texts: (head, precondition, add, del).
    pub fn schema_texts(&self) -> Vec<(String, String, Vec<String>, Vec<String>)> {
        let n = self.fluents;
        self.actions
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let alts: Vec<String> = a
                    .alternatives
                    .iter()
                    .map(|(p, q)| {
                        let mut lits = Self::literals(*p, true, n);
                        lits.extend(Self::literals(*q, false, n));
                        if lits.is_empty() {
                            "true".to_string()
                        } else {
                            format!("({})", lits.join(" & "))
                        }
                    })
                    .collect();
                (Self::action_name(i), alts.join(" | "), Self::literals(a.add, true, n), Self::literals(a.del, true, n))
            })
            .collect()
    }

    pub fn goal_text(&self) -> String {
        let mut lits = Self::literals(self.goal_pos, true, self.fluents);
        lits.extend(Self::literals(self.goal_neg, false, self.fluents));
        lits.join(" & ")
    }

    pub fn state_atoms(&self, s: u8) -> BTreeSet<Atom> {
        (0..self.fluents).filter(|i| s & (1 << i) != 0).map(|i| atom(&format!("p{i}"))).collect()
    }

    /// Steps to the nearest goal state from every state, by exhaustive search.
    pub fn distances(&self) -> Vec<Option<usize>> {
        let states = 1usize << self.fluents;
        (0..states)
            .map(|start| {
                let mut seen = vec![false; states];
                let mut q = VecDeque::from([(start as u8, 0usize)]);
                seen[start] = true;
                while let Some((s, d)) = q.pop_front() {
                    if self.is_goal(s) {
                        return Some(d);
                    }
                    for a in &self.actions {
                        if a.applicable(s) {
                            let t = a.apply(s);
                            if !seen[t as usize] {
                                seen[t as usize] = true;
                                q.push_back((t, d + 1));
                            }
                        }
                    }
                }
                None
            })
            .collect()
    }

    /// Shortest plan with the smallest name sequence: at each step take the
    /// first action by name that keeps the distance decreasing.
    pub fn smallest_optimal_plan(&self) -> Option<Vec<String>> {
        let dist = self.distances();
        let mut s = self.init;
        let mut left = dist[s as usize]?;
        let mut plan = Vec::new();
        while left > 0 {
            let (i, a) = self
                .actions
                .iter()
                .enumerate()
                .find(|(_, a)| a.applicable(s) && dist[a.apply(s) as usize] == Some(left - 1))
                .expect("distance decreases along some action");
            plan.push(Self::action_name(i));
            s = a.apply(s);
            left -= 1;
        }
        Some(plan)
    }
}

// ---------------------------------------------------------------------------
// Randomized scenarios exercising the value gates.

pub const POOL: [&str; 5] = ["hedonism", "conformity_rules", "benevolence_caring", "security_personal", "achievement"];
const STATES: [&str; 4] = ["s0", "s1", "s2", "s3"];

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs[rng.gen_range(0..xs.len())]
}

fn random_condition(rng: &mut ChaCha8Rng) -> String {
    match rng.gen_range(0..5) {
        0 => "true".into(),
        1 => format!("deviceStatus(d{}, {})", rng.gen_range(0..3), pick(rng, &STATES)),
        2 => format!("not deviceStatus(d{}, {})", rng.gen_range(0..3), pick(rng, &STATES)),
        3 => {
            let a = pick(rng, &POOL);
            let b = pick(rng, &POOL);
            format!("prefers({a}, {b})")
        }
        _ => format!("valued({})", pick(rng, &POOL)),
    }
}

/// A self-contained scenario: three generic devices, random value rules and
/// random action and command impact rules.
pub fn random_scenario(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<&str> = POOL.to_vec();
    pool.shuffle(&mut rng);
    pool.truncate(rng.gen_range(3..=5));
    let mut iv_d: Vec<Vec<&str>> = Vec::new();
    for v in pool {
        if iv_d.is_empty() || rng.gen_bool(0.6) {
            iv_d.push(vec![v]);
        } else {
            iv_d.last_mut().unwrap().push(v);
        }
    }
    let ops = ["make_most", "make_least", "remove", "above", "below", "same"];
    let vo: Vec<_> = (0..rng.gen_range(0..=2))
        .map(|_| {
            let op = pick(&mut rng, &ops);
            let body = match op {
                "make_most" | "make_least" | "remove" => format!("{op}({})", pick(&mut rng, &POOL)),
                _ => format!("{op}({}, {})", pick(&mut rng, &POOL), pick(&mut rng, &POOL)),
            };
            json!({"if": format!("deviceStatus(d{}, {})", rng.gen_range(0..3), pick(&mut rng, &STATES)), "then": [body]})
        })
        .collect();
    let ga: Vec<_> = (0..rng.gen_range(1..=4))
        .map(|_| {
            let d = rng.gen_range(0..3);
            json!({
                "if": format!("deviceStatus(d{d}, {})", pick(&mut rng, &STATES)),
                "then": [format!("state(reach(d{}, {}), active, self)", rng.gen_range(0..3), pick(&mut rng, &STATES))]
            })
        })
        .collect();
    let gi: Vec<_> = (0..rng.gen_range(0..=3))
        .map(|_| {
            json!({
                "if": random_condition(&mut rng),
                "goal": format!("reach(D, {})", pick(&mut rng, &STATES)),
                "impact": if rng.gen_bool(0.5) { -1 } else { 1 },
                "value": pick(&mut rng, &POOL)
            })
        })
        .collect();
    let ai: Vec<_> = (0..rng.gen_range(1..=4))
        .map(|_| {
            let action = match rng.gen_range(0..5) {
                0 => format!("move(d{}, F, T)", rng.gen_range(0..3)),
                1 => format!("move(D, F, {})", pick(&mut rng, &STATES)),
                2 => "jump(D, F, T)".to_string(),
                3 => format!("jump(d{}, s0, {})", rng.gen_range(0..3), pick(&mut rng, &STATES)),
                _ => "move(D, F, T)".to_string(),
            };
            json!({
                "if": random_condition(&mut rng),
                "action": action,
                "impact": if rng.gen_bool(0.75) { -1 } else { 1 },
                "value": pick(&mut rng, &POOL)
            })
        })
        .collect();
    let ci: Vec<_> = (0..rng.gen_range(1..=3))
        .map(|_| {
            let command = if rng.gen_bool(0.5) {
                format!("set_status(d{}, {})", rng.gen_range(0..3), pick(&mut rng, &STATES))
            } else {
                format!("set_status(D, {})", pick(&mut rng, &STATES))
            };
            json!({
                "if": random_condition(&mut rng),
                "command": command,
                "impact": if rng.gen_bool(0.75) { -1 } else { 1 },
                "value": pick(&mut rng, &POOL)
            })
        })
        .collect();
    let mut devices = Vec::new();
    for d in 0..3 {
        let mut spec = json!({"id": format!("d{d}"), "kind": "generic", "states": STATES, "status": "s0"});
        if rng.gen_bool(0.15) {
            spec["fault"] = json!({"mode": if rng.gen_bool(0.5) { "reject" } else { "silent" }, "call": rng.gen_range(1..=3)});
        }
        devices.push(spec);
    }
    let mut beliefs = vec!["dev(d0)".to_string(), "dev(d1)".into(), "dev(d2)".into()];
    for a in STATES {
        for b in STATES {
            if a != b {
                beliefs.push(format!("edge({a}, {b})"));
            }
        }
    }
    for b in &STATES[1..] {
        beliefs.push(format!("jumpable(s0, {b})"));
    }
    let events: Vec<_> = (0..rng.gen_range(3..=7))
        .map(|i| {
            let d = rng.gen_range(0..3);
            let s = pick(&mut rng, &STATES);
            if rng.gen_bool(0.6) {
                json!({"at": i, "event": "user_goal", "goal": format!("reach(d{d}, {s})")})
            } else {
                json!({"at": i, "event": "device", "device": format!("d{d}"), "trigger": "set", "args": ["status", s]})
            }
        })
        .collect();
    let pre = |rel: &str| format!("dev(D) & deviceStatus(D, F) & {rel}(F, T)");
    json!({
        "name": format!("random_{seed}"),
        "seed": seed,
        "values": {"iv_d": iv_d, "vo": vo},
        "goals": {
            "policy": if rng.gen_bool(0.5) { "user_first" } else { "self_first" },
            "ga": ga,
            "gi": gi,
            "goal_conditions": [{"goal": "reach(D, S)", "condition": "deviceStatus(D, S)"}]
        },
        "planning": {
            "strategy": if rng.gen_bool(0.5) { "bfs" } else { "gbfs" },
            "kw": [
                {"action": "move(D, F, T)", "pre": pre("edge"), "add": ["deviceStatus(D, T)"], "del": ["deviceStatus(D, F)"]},
                {"action": "jump(D, F, T)", "pre": pre("jumpable"), "add": ["deviceStatus(D, T)"], "del": ["deviceStatus(D, F)"]}
            ],
            "ai": ai
        },
        "acting": {
            "timeout_ms": 50,
            "kh": [
                {"action": "move(D, F, T)", "body": ["set_status(D, T)"]},
                {"action": "jump(D, F, T)", "body": [{"action": "move(D, F, T)"}]}
            ],
            "ci": ci
        },
        "devices": devices,
        "beliefs": beliefs,
        "events": events
    })
    .to_string()
}

// ---------------------------------------------------------------------------
// Post-hoc audits over cycle traces.

pub fn trace_order(t: &CycleTrace) -> ImportanceOrder {
    let buckets: Vec<Vec<Value>> = t.iv.iter().map(|b| b.iter().map(|v| v.parse().unwrap()).collect()).collect();
    ImportanceOrder::from_buckets(buckets).unwrap()
}

fn strings_base(xs: &[String]) -> BeliefBase {
    BeliefBase::from_atoms(xs.iter().map(|s| atom(s))).unwrap()
}

/// Counts of what the gates caught, plus every violation found.
#[derive(Debug, Default)]
pub struct GateAudit {
    pub planned_actions: usize,
    pub executed_commands: usize,
    pub forbidden_patterns: usize,
    pub blocked_commands: usize,
    pub violations: Vec<String>,
}

fn negative_matches(
    condition: &smash_core::logic::Formula,
    pattern: &Atom,
    target: &Atom,
    b: &BeliefBase,
) -> bool {
    evaluate(condition, b)
        .iter()
        .any(|s| pattern.apply(s).match_with(target, &Substitution::new()).is_some())
}

/// No planned action may match a fired negative action rule on a held value,
/// and no executed command a fired negative command rule.
pub fn audit_gates(cfg: &AgentConfig, traces: &[CycleTrace], audit: &mut GateAudit) {
    use smash_core::goals::Impact;
    for t in traces.iter().filter(|t| t.agent == cfg.id) {
        let iv = trace_order(t);
        let b = iv.extend_beliefs(&strings_base(&t.beliefs_at_start));
        audit.forbidden_patterns += t.forbidden.len();
        for p in &t.plans {
            for a in &p.actions {
                audit.planned_actions += 1;
                let a = atom(a);
                for r in cfg.ai.iter().filter(|r| r.impact == Impact::Negative && iv.contains(r.value)) {
                    if negative_matches(&r.condition, &r.action, &a, &b) {
                        audit.violations.push(format!("{} cycle {}: planned {a} despite {}", t.agent, t.cycle, r.action));
                    }
                }
            }
        }
        for c in &t.commands {
            audit.executed_commands += 1;
            let before = strings_base(&c.beliefs_before);
            let cmd = atom(&c.command);
            for r in cfg.ci.iter().filter(|r| r.impact == Impact::Negative && iv.contains(r.value)) {
                if negative_matches(&r.condition, &r.command, &cmd, &before) {
                    audit.violations.push(format!("{} cycle {}: executed {cmd} despite {}", t.agent, t.cycle, r.command));
                }
            }
        }
        audit.blocked_commands += t.outcomes.iter().filter(|o| o.reason.as_deref().is_some_and(|r| r.contains("blocked"))).count();
    }
}

fn legal_edge(from: &str, to: &str) -> bool {
    let allowed: &[(&str, &[&str])] = &[
        ("waiting", &["active", "inactive", "dropped"]),
        ("active", &["success", "fail", "dropped", "inactive"]),
        ("inactive", &["active", "dropped", "waiting"]),
    ];
    allowed.iter().any(|(f, tos)| *f == from && tos.contains(&to))
}

/// Lifecycle legality of every status write and truth of every success claim.
/// Returns (writes checked, successes checked, violations).
pub fn audit_lifecycle(traces: &[CycleTrace]) -> (usize, usize, Vec<String>) {
    let terminal = ["success", "fail", "dropped"];
    let mut writes = 0;
    let mut successes = 0;
    let mut bad = Vec::new();
    for t in traces {
        for w in &t.status_writes {
            writes += 1;
            let to = w.to.as_str();
            let ok = match (w.kind.as_str(), w.from.as_deref()) {
                ("insert", None) => !terminal.contains(&to),
                ("transition", Some(f)) => legal_edge(f, to),
                ("renew", Some(f)) => terminal.contains(&f) && to == "waiting" && w.source == "user",
                _ => false,
            };
            if !ok {
                bad.push(format!("{} cycle {}: {:?}", t.agent, t.cycle, w));
            }
        }
        let iv = trace_order(t);
        for o in &t.outcomes {
            if o.outcome != "success" {
                continue;
            }
            successes += 1;
            let target = parse_formula(&o.target).unwrap();
            let b = iv.extend_beliefs(&strings_base(&o.beliefs));
            if evaluate(&target, &b).is_empty() {
                bad.push(format!("{} cycle {}: {} marked success but {} does not hold", t.agent, t.cycle, o.goal, o.target));
            }
        }
    }
    (writes, successes, bad)
}

/// Final status of every goal after replaying the writes.
pub fn replay_statuses(traces: &[CycleTrace]) -> BTreeMap<(String, String, String), String> {
    let mut out = BTreeMap::new();
    for t in traces {
        for w in &t.status_writes {
            out.insert((t.agent.clone(), w.goal.clone(), w.source.clone()), w.to.clone());
        }
    }
    out
}
