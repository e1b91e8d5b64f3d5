use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::logic::{to_dnf, Atom, Formula, Term};

use super::ground::GroundAction;
use super::PlanError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Breadth-first: shortest plan, ties broken by the action-name sequence.
    #[default]
    Bfs,
    /// Greedy best-first on the number of unsatisfied goal literals.
    Gbfs,
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "bfs" => Ok(Strategy::Bfs),
            "gbfs" => Ok(Strategy::Gbfs),
            other => Err(format!("unknown strategy `{other}` (expected bfs or gbfs)")),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Bfs => "bfs",
            Strategy::Gbfs => "gbfs",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchLimits {
    pub max_nodes: usize,
    pub max_time: Duration,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            max_nodes: 1_000_000,
            max_time: Duration::from_secs(10),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SearchResult {
    Found(Vec<Atom>),
    /// The reachable state space was exhausted without meeting the goal.
    Unsolvable,
    NodeLimit,
    TimeLimit,
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64)])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn covers(&self, other: &Bits) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & b == *b)
    }

    fn disjoint(&self, other: &Bits) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & b == 0)
    }

    fn count_missing(&self, wanted: &Bits) -> u32 {
        self.0.iter().zip(&wanted.0).map(|(a, b)| (b & !a).count_ones()).sum()
    }

    fn count_present(&self, unwanted: &Bits) -> u32 {
        self.0.iter().zip(&unwanted.0).map(|(a, b)| (a & b).count_ones()).sum()
    }

    fn step(&self, del: &Bits, add: &Bits) -> Bits {
        Bits(
            self.0
                .iter()
                .zip(&del.0)
                .zip(&add.0)
                .map(|((s, d), a)| (s & !d) | a)
                .collect(),
        )
    }
}

struct Compiled {
    name: Atom,
    alternatives: Vec<(Bits, Bits)>,
    add: Bits,
    del: Bits,
}

struct Problem {
    actions: Vec<Compiled>,
    goal: Vec<(Bits, Bits)>,
    init: Bits,
}

impl Problem {
    fn new(init: &BTreeSet<Atom>, goal: &Formula, actions: &[GroundAction]) -> Result<Self, PlanError> {
        if !goal.variables().is_empty() {
            return Err(PlanError::NonGroundGoal(goal.to_string()));
        }
        let mut index: BTreeMap<&Atom, usize> = BTreeMap::new();
        let clauses = to_dnf(goal);
        let mut all: BTreeSet<&Atom> = init.iter().collect();
        for a in actions {
            for l in &a.alternatives {
                all.extend(l.pos.iter().chain(&l.neg));
            }
            all.extend(a.add.iter().chain(&a.delete));
        }
        for c in &clauses {
            all.extend(c.pos.iter().chain(&c.neg));
        }
        for (i, a) in all.into_iter().enumerate() {
            index.insert(a, i);
        }
        let n = index.len();
        let bits = |atoms: &mut dyn Iterator<Item = &Atom>| {
            let mut b = Bits::new(n);
            for a in atoms {
                b.set(index[a]);
            }
            b
        };

        let mut order: Vec<&GroundAction> = actions.iter().collect();
        order.sort_by(|a, b| a.name.cmp(&b.name));
        let compiled = order
            .into_iter()
            .map(|a| Compiled {
                name: a.name.clone(),
                alternatives: a
                    .alternatives
                    .iter()
                    .map(|l| (bits(&mut l.pos.iter()), bits(&mut l.neg.iter())))
                    .collect(),
                add: bits(&mut a.add.iter()),
                del: bits(&mut a.delete.iter()),
            })
            .collect();

        let mut goal_bits = Vec::new();
        for c in &clauses {
            let cmps_hold = c.cmps.iter().all(|(op, l, r)| match (l, r) {
                (Term::Const(x), Term::Const(y)) => op.holds(x, y),
                _ => false,
            });
            if cmps_hold {
                goal_bits.push((bits(&mut c.pos.iter()), bits(&mut c.neg.iter())));
            }
        }
        Ok(Problem {
            actions: compiled,
            goal: goal_bits,
            init: bits(&mut init.iter()),
        })
    }

    fn is_goal(&self, s: &Bits) -> bool {
        self.goal.iter().any(|(p, n)| s.covers(p) && s.disjoint(n))
    }

    fn h(&self, s: &Bits) -> u32 {
        self.goal
            .iter()
            .map(|(p, n)| s.count_missing(p) + s.count_present(n))
            .min()
            .unwrap_or(u32::MAX)
    }

    fn successors<'a>(&'a self, s: &'a Bits) -> impl Iterator<Item = (usize, Bits)> + 'a {
        self.actions.iter().enumerate().filter(|&(_i, a)| a.alternatives
                .iter()
                .any(|(p, n)| s.covers(p) && s.disjoint(n))).map(|(i, a)| (i, s.step(&a.del, &a.add)))
    }
}

/// Searches for a plan from `init` to a state satisfying the ground formula `goal`.
pub fn plan_for_goal(
    init: &BTreeSet<Atom>,
    goal: &Formula,
    actions: &[GroundAction],
    strategy: Strategy,
    limits: SearchLimits,
) -> Result<SearchResult, PlanError> {
    let p = Problem::new(init, goal, actions)?;
    if p.is_goal(&p.init) {
        return Ok(SearchResult::Found(Vec::new()));
    }
    if p.goal.is_empty() {
        return Ok(SearchResult::Unsolvable);
    }
    let started = Instant::now();
    // node i: (parent, action index)
    let mut nodes: Vec<(usize, usize)> = vec![(usize::MAX, usize::MAX)];
    let mut seen: HashSet<Bits> = HashSet::new();
    seen.insert(p.init.clone());

    let path = |nodes: &[(usize, usize)], mut i: usize| {
        let mut out = Vec::new();
        while nodes[i].0 != usize::MAX {
            out.push(p.actions[nodes[i].1].name.clone());
            i = nodes[i].0;
        }
        out.reverse();
        out
    };

    let mut bfs: VecDeque<(usize, Bits)> = VecDeque::new();
    let mut gbfs: BinaryHeap<Reverse<(u32, usize)>> = BinaryHeap::new();
    let mut gbfs_states: Vec<Option<Bits>> = Vec::new();
    match strategy {
        Strategy::Bfs => bfs.push_back((0, p.init.clone())),
        Strategy::Gbfs => {
            gbfs.push(Reverse((p.h(&p.init), 0)));
            gbfs_states.push(Some(p.init.clone()));
        }
    }

    loop {
        let (node, state) = match strategy {
            Strategy::Bfs => match bfs.pop_front() {
                Some(x) => x,
                None => return Ok(SearchResult::Unsolvable),
            },
            Strategy::Gbfs => match gbfs.pop() {
                Some(Reverse((_, i))) => (i, gbfs_states[i].take().expect("expanded once")),
                None => return Ok(SearchResult::Unsolvable),
            },
        };
        for (ai, next) in p.successors(&state) {
            if seen.contains(&next) {
                continue;
            }
            nodes.push((node, ai));
            let id = nodes.len() - 1;
            if p.is_goal(&next) {
                return Ok(SearchResult::Found(path(&nodes, id)));
            }
            if nodes.len() >= limits.max_nodes {
                return Ok(SearchResult::NodeLimit);
            }
            if nodes.len().is_multiple_of(1024) && started.elapsed() > limits.max_time {
                return Ok(SearchResult::TimeLimit);
            }
            seen.insert(next.clone());
            match strategy {
                Strategy::Bfs => bfs.push_back((id, next)),
                Strategy::Gbfs => {
                    let h = p.h(&next);
                    gbfs_states.resize(id + 1, None);
                    gbfs_states[id] = Some(next);
                    gbfs.push(Reverse((h, id)));
                }
            }
        }
    }
}

/// The state reached by applying `plan` from `init`, or `None` if some step
/// is unknown or inapplicable.
pub fn project(init: &BTreeSet<Atom>, actions: &[GroundAction], plan: &[Atom]) -> Option<BTreeSet<Atom>> {
    let mut state = init.clone();
    for step in plan {
        let a = actions.iter().find(|a| &a.name == step)?;
        if !a.applicable(&state) {
            return None;
        }
        state = a.apply(&state);
    }
    Some(state)
}
