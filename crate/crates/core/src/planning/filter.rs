use crate::goals::Impact;
use crate::logic::{evaluate, Atom, BeliefBase, Substitution, Term};
use crate::values::ImportanceOrder;

use super::model::{ActionImpactRule, ActionModel};

/// Action patterns ruled out for one cycle because they hurt a held value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Admissibility {
    forbidden: Vec<Atom>,
}

impl Admissibility {
    /// Everything admissible.
    pub fn all() -> Self {
        Self::default()
    }

    pub fn forbidden(&self) -> &[Atom] {
        &self.forbidden
    }

    pub fn is_admissible(&self, action: &Atom) -> bool {
        !self
            .forbidden
            .iter()
            .any(|p| p.match_with(action, &Substitution::new()).is_some())
    }

    /// True when no grounding of `model` survives.
    pub fn forbids_all(&self, model: &ActionModel) -> bool {
        self.forbidden.iter().any(|p| {
            p.predicate == model.name
                && p.arity() == model.params.len()
                && is_most_general(p)
        })
    }

    /// True when some but not necessarily all groundings of `model` are forbidden.
    pub fn restricts(&self, model: &ActionModel) -> bool {
        self.forbidden
            .iter()
            .any(|p| p.predicate == model.name && p.arity() == model.params.len())
    }
}

fn is_most_general(p: &Atom) -> bool {
    let mut seen = Vec::new();
    p.args.iter().all(|t| match t {
        Term::Var(v) if !seen.contains(&v) => {
            seen.push(v);
            true
        }
        _ => false,
    })
}

/// Collects the action patterns of every fired impact rule with a negative
/// impact on a value in `iv`.
pub fn filter_actions(
    kw: &[ActionModel],
    ai: &[ActionImpactRule],
    iv: &ImportanceOrder,
    b: &BeliefBase,
) -> Admissibility {
    let mut forbidden: Vec<Atom> = Vec::new();
    for rule in ai {
        if rule.impact != Impact::Negative || !iv.contains(rule.value) {
            continue;
        }
        if !kw
            .iter()
            .any(|m| m.name == rule.action.predicate && m.params.len() == rule.action.arity())
        {
            continue;
        }
        for s in evaluate(&rule.condition, b) {
            let p = rule.action.apply(&s);
            if !forbidden.contains(&p) {
                forbidden.push(p);
            }
        }
    }
    Admissibility { forbidden }
}
