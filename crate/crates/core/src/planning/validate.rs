use std::collections::BTreeSet;

use thiserror::Error;

use crate::logic::{holds, Atom, BeliefBase, Formula, Substitution, Term};

use super::model::ActionModel;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanViolation {
    #[error("step {step}: no action model for `{action}`")]
    UnknownAction { step: usize, action: String },
    #[error("step {step}: precondition of `{action}` does not hold")]
    Precondition { step: usize, action: String },
    #[error("goal not satisfied after the last step")]
    GoalNotSatisfied,
}

fn state_base(state: &BTreeSet<Atom>) -> BeliefBase {
    BeliefBase::from_atoms(state.iter().cloned()).expect("states are ground")
}

/// Replays `plan` against the action schemas, independently of grounding.
/// Returns the final state, or the first violation.
pub fn validate_plan(
    init: &BTreeSet<Atom>,
    models: &[ActionModel],
    goal: &Formula,
    plan: &[Atom],
) -> Result<BTreeSet<Atom>, PlanViolation> {
    let mut state = init.clone();
    for (step, action) in plan.iter().enumerate() {
        let candidates: Vec<(&ActionModel, Substitution)> = models
            .iter()
            .filter(|m| m.name == action.predicate && m.params.len() == action.arity())
            .filter_map(|m| m.head().match_with(action, &Substitution::new()).map(|s| (m, s)))
            .collect();
        if candidates.is_empty() || !action.args.iter().all(Term::is_ground) {
            return Err(PlanViolation::UnknownAction { step, action: action.to_string() });
        }
        let b = state_base(&state);
        let Some((m, s)) = candidates.into_iter().find(|(m, s)| holds(&m.precondition, &b, s)) else {
            return Err(PlanViolation::Precondition { step, action: action.to_string() });
        };
        for d in &m.delete {
            state.remove(&d.apply(&s));
        }
        for a in &m.add {
            state.insert(a.apply(&s));
        }
    }
    if holds(goal, &state_base(&state), &Substitution::new()) {
        Ok(state)
    } else {
        Err(PlanViolation::GoalNotSatisfied)
    }
}
