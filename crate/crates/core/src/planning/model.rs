use std::collections::BTreeSet;
use std::fmt;

use crate::goals::Impact;
use crate::logic::{parse_atom, parse_formula, Atom, Formula, Term};
use crate::values::Value;

use super::PlanError;

/// STRIPS-style action schema. Every variable of the precondition is a parameter:
/// variables that only occur in the condition are appended after the declared ones.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionModel {
    pub name: String,
    pub params: Vec<String>,
    pub precondition: Formula,
    pub add: Vec<Atom>,
    pub delete: Vec<Atom>,
}

impl ActionModel {
    pub fn new(
        head: Atom,
        precondition: Formula,
        add: Vec<Atom>,
        delete: Vec<Atom>,
    ) -> Result<Self, PlanError> {
        let mut params = Vec::new();
        for t in &head.args {
            match t {
                Term::Var(v) if !params.contains(v) => params.push(v.clone()),
                Term::Var(v) => {
                    return Err(PlanError::Model(format!(
                        "action {}: parameter {v} declared twice",
                        head.predicate
                    )))
                }
                Term::Const(c) => {
                    return Err(PlanError::Model(format!(
                        "action {}: parameter `{c}` is not a variable",
                        head.predicate
                    )))
                }
            }
        }
        let mut cond_vars = Vec::new();
        precondition.variables_ordered(&mut cond_vars);
        for v in cond_vars {
            if !params.contains(&v) {
                params.push(v);
            }
        }
        let bound: BTreeSet<&String> = params.iter().collect();
        for e in add.iter().chain(&delete) {
            if let Some(v) = e.variables().iter().find(|v| !bound.contains(v)) {
                return Err(PlanError::Model(format!(
                    "action {}: effect {e} uses unbound variable {v}",
                    head.predicate
                )));
            }
        }
        Ok(ActionModel {
            name: head.predicate,
            params,
            precondition,
            add,
            delete,
        })
    }

    pub fn parse(
        head: &str,
        precondition: &str,
        add: &[impl AsRef<str>],
        delete: &[impl AsRef<str>],
    ) -> Result<Self, PlanError> {
        Self::new(
            parse_atom(head)?,
            parse_formula(precondition)?,
            parse_atoms(add)?,
            parse_atoms(delete)?,
        )
    }

    /// `name(P1, ..., Pn)` over the full parameter list.
    pub fn head(&self) -> Atom {
        Atom::new(&self.name, self.params.iter().map(|p| Term::var(p)).collect())
    }

    /// Predicates this action can change.
    pub fn touched(&self) -> impl Iterator<Item = (String, usize)> + '_ {
        self.add.iter().chain(&self.delete).map(Atom::key)
    }
}

fn parse_atoms(xs: &[impl AsRef<str>]) -> Result<Vec<Atom>, PlanError> {
    xs.iter().map(|s| parse_atom(s.as_ref()).map_err(PlanError::from)).collect()
}

impl fmt::Display for ActionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} :- {}", self.head(), self.precondition)?;
        for a in &self.add {
            write!(f, " +{a}")?;
        }
        for d in &self.delete {
            write!(f, " -{d}")?;
        }
        Ok(())
    }
}

/// Impact of actions matching `action` on `value` while `condition` holds.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionImpactRule {
    pub condition: Formula,
    pub action: Atom,
    pub impact: Impact,
    pub value: Value,
}

impl ActionImpactRule {
    pub fn parse(condition: &str, action: &str, impact: Impact, value: Value) -> Result<Self, PlanError> {
        Ok(ActionImpactRule {
            condition: parse_formula(condition)?,
            action: parse_atom(action)?,
            impact,
            value,
        })
    }
}

/// Maps goal atoms matching `pattern` to the belief condition that achieves them.
#[derive(Clone, Debug, PartialEq)]
pub struct GoalCondition {
    pub pattern: Atom,
    pub condition: Formula,
}

impl GoalCondition {
    pub fn new(pattern: Atom, condition: Formula) -> Result<Self, PlanError> {
        let vars = pattern.variables();
        if let Some(v) = condition.variables().into_iter().find(|v| !vars.contains(v)) {
            return Err(PlanError::Model(format!(
                "goal condition for {pattern}: variable {v} not in the goal pattern"
            )));
        }
        Ok(GoalCondition { pattern, condition })
    }

    pub fn parse(pattern: &str, condition: &str) -> Result<Self, PlanError> {
        Self::new(parse_atom(pattern)?, parse_formula(condition)?)
    }
}

/// Target condition for a ground goal: the first matching mapping, or the goal atom itself.
pub fn resolve_goal(goal: &Atom, conditions: &[GoalCondition]) -> Formula {
    for gc in conditions {
        if let Some(s) = gc.pattern.match_with(goal, &Default::default()) {
            return gc.condition.apply(&s);
        }
    }
    Formula::Atom(goal.clone())
}
