//! Planning layer: value filtering of actions, grounding, forward search and
//! PDDL interchange.

mod filter;
mod ground;
mod model;
mod pddl;
mod search;
mod validate;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use thiserror::Error;

pub use filter::{filter_actions, Admissibility};
pub use ground::{ground, static_relations, universe, GroundAction, Literals};
pub use model::{resolve_goal, ActionImpactRule, ActionModel, GoalCondition};
pub use pddl::{emit_pddl, parse_pddl, PddlTask};
pub use search::{plan_for_goal, project, SearchLimits, SearchResult, Strategy};
pub use validate::{validate_plan, PlanViolation};

use crate::goals::{GoalList, GoalRef};
use crate::logic::{Atom, BeliefBase, Constant, Formula, LogicError};
use crate::values::ImportanceOrder;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("invalid action model: {0}")]
    Model(String),
    #[error("goal condition `{0}` is not ground")]
    NonGroundGoal(String),
    #[error("not expressible in STRIPS: {0}")]
    NonStrips(String),
    #[error("PDDL error at {line}:{col}: {message}")]
    Pddl { line: usize, col: usize, message: String },
    #[error(transparent)]
    Logic(#[from] LogicError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub goal: GoalRef,
    /// Belief condition the plan achieves.
    pub target: Formula,
    pub body: Vec<Atom>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NoPlan {
    Unsolvable,
    NodeLimit,
    TimeLimit,
    Invalid(String),
}

impl std::fmt::Display for NoPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NoPlan::Unsolvable => f.write_str("no plan exists"),
            NoPlan::NodeLimit => f.write_str("search node limit reached"),
            NoPlan::TimeLimit => f.write_str("search time limit reached"),
            NoPlan::Invalid(m) => write!(f, "invalid goal: {m}"),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct PlanningOptions {
    pub strategy: Strategy,
    pub limits: SearchLimits,
    /// Constants added to the grounding universe besides those in the beliefs.
    pub constants: Vec<Constant>,
}

#[derive(Clone, Debug, Default)]
pub struct PlanningReport {
    pub plans: Vec<Plan>,
    pub failures: Vec<(GoalRef, NoPlan)>,
    /// One entry per goal of the list, in order. Filtering and grounding are
    /// counted in the first goal's entry.
    pub durations: Vec<(GoalRef, Duration)>,
    pub admissibility: Admissibility,
    pub actions: Vec<GroundAction>,
}

/// Plans for each goal in order, each against the state left by the previous plans.
/// Impact rule conditions also see the value facts of `iv`.
pub fn planning(
    b: &BeliefBase,
    iv: &ImportanceOrder,
    g: &GoalList,
    kw: &[ActionModel],
    ai: &[ActionImpactRule],
    goal_conditions: &[GoalCondition],
    options: &PlanningOptions,
) -> PlanningReport {
    let mut report = PlanningReport::default();
    if g.is_empty() {
        return report;
    }
    let mut mark = Instant::now();
    let targets: Vec<Formula> = g.goals.iter().map(|r| resolve_goal(&r.goal, goal_conditions)).collect();
    let mut extra = options.constants.clone();
    for t in &targets {
        extra.extend(t.constants());
    }
    report.admissibility = filter_actions(kw, ai, iv, &iv.extend_beliefs(b));
    report.actions = ground(kw, b, &universe(b, kw, &extra), &report.admissibility);

    let mut state: BTreeSet<Atom> = b.atoms();
    for (goal, target) in g.goals.iter().zip(targets) {
        let result = plan_for_goal(&state, &target, &report.actions, options.strategy, options.limits);
        match result {
            Ok(SearchResult::Found(body)) => {
                state = project(&state, &report.actions, &body).expect("search returns applicable plans");
                report.plans.push(Plan { goal: goal.clone(), target, body });
            }
            Ok(SearchResult::Unsolvable) => report.failures.push((goal.clone(), NoPlan::Unsolvable)),
            Ok(SearchResult::NodeLimit) => report.failures.push((goal.clone(), NoPlan::NodeLimit)),
            Ok(SearchResult::TimeLimit) => report.failures.push((goal.clone(), NoPlan::TimeLimit)),
            Err(e) => report.failures.push((goal.clone(), NoPlan::Invalid(e.to_string()))),
        }
        let now = Instant::now();
        report.durations.push((goal.clone(), now - mark));
        mark = now;
    }
    report
}
