//! Acting layer: refines plan actions into device commands, gates each command
//! on the held values and executes it.

use std::fmt;

use thiserror::Error;

use crate::env::FailureCode;
use crate::goals::{GoalRef, Impact, Outcome};
use crate::logic::{evaluate, evaluate_from, holds, parse_atom, parse_formula, Atom, BeliefBase, Formula, LogicError, Substitution};
use crate::planning::{ActionModel, Plan};
use crate::values::{ImportanceOrder, Value};

pub const DEFAULT_DEPTH: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub enum BodyItem {
    Command(Atom),
    Action(Atom),
}

impl BodyItem {
    pub fn atom(&self) -> &Atom {
        match self {
            BodyItem::Command(a) | BodyItem::Action(a) => a,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActError {
    #[error("refinement of {action}: body variable {var} is not bound")]
    UnboundBodyVariable { action: String, var: String },
    #[error(transparent)]
    Logic(#[from] LogicError),
}

/// How to carry out `action`: the body runs in order when `condition` holds.
#[derive(Clone, Debug, PartialEq)]
pub struct Refinement {
    pub action: Atom,
    pub condition: Formula,
    pub body: Vec<BodyItem>,
}

impl Refinement {
    pub fn new(action: Atom, condition: Formula, body: Vec<BodyItem>) -> Result<Self, ActError> {
        let mut bound = action.variables();
        bound.extend(condition.positive_variables());
        for item in &body {
            if let Some(v) = item.atom().variables().into_iter().find(|v| !bound.contains(v)) {
                return Err(ActError::UnboundBodyVariable { action: action.to_string(), var: v });
            }
        }
        Ok(Refinement { action, condition, body })
    }

    pub fn parse(action: &str, condition: &str, commands: &[&str]) -> Result<Self, ActError> {
        let body = commands
            .iter()
            .map(|c| parse_atom(c).map(BodyItem::Command))
            .collect::<Result<_, _>>()?;
        Self::new(parse_atom(action)?, parse_formula(condition)?, body)
    }
}

/// Impact of commands matching `command` on `value` while `condition` holds.
#[derive(Clone, Debug, PartialEq)]
pub struct CommandImpactRule {
    pub condition: Formula,
    pub command: Atom,
    pub impact: Impact,
    pub value: Value,
}

impl CommandImpactRule {
    pub fn parse(condition: &str, command: &str, impact: Impact, value: Value) -> Result<Self, ActError> {
        Ok(CommandImpactRule {
            condition: parse_formula(condition)?,
            command: parse_atom(command)?,
            impact,
            value,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RefineError {
    #[error("no applicable refinement for {0}")]
    NoRefinement(String),
    #[error("refinement depth exhausted at {0}")]
    DepthExhausted(String),
    #[error("refinement cycle through {0}")]
    Cycle(String),
    #[error("command {command} is blocked: negative impact on {value}")]
    Blocked { command: String, value: Value },
    #[error("refinement produced non-ground {0}")]
    NonGround(String),
}

/// First held value that `cmd` hurts under the current beliefs, if any.
pub fn blocking_value(cmd: &Atom, b: &BeliefBase, ci: &[CommandImpactRule], iv: &ImportanceOrder) -> Option<Value> {
    ci.iter()
        .filter(|r| r.impact == Impact::Negative && iv.contains(r.value))
        .find(|r| {
            evaluate(&r.condition, b)
                .iter()
                .any(|s| r.command.apply(s).match_with(cmd, s).is_some())
        })
        .map(|r| r.value)
}

/// Expands a ground action into ground commands. The first refinement (in
/// declaration order) whose action matches and whose condition holds is used.
/// `b` should carry the value facts of `iv` if conditions mention them.
pub fn refine(
    action: &Atom,
    b: &BeliefBase,
    kh: &[Refinement],
    ci: &[CommandImpactRule],
    iv: &ImportanceOrder,
    depth_budget: usize,
) -> Result<Vec<Atom>, RefineError> {
    let mut out = Vec::new();
    let mut stack = Vec::new();
    expand(action, b, kh, ci, iv, depth_budget, &mut stack, &mut out)?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn expand(
    action: &Atom,
    b: &BeliefBase,
    kh: &[Refinement],
    ci: &[CommandImpactRule],
    iv: &ImportanceOrder,
    budget: usize,
    stack: &mut Vec<Atom>,
    out: &mut Vec<Atom>,
) -> Result<(), RefineError> {
    if stack.contains(action) {
        return Err(RefineError::Cycle(action.to_string()));
    }
    if budget == 0 {
        return Err(RefineError::DepthExhausted(action.to_string()));
    }
    let chosen = kh.iter().find_map(|r| {
        let s = r.action.match_with(action, &Substitution::new())?;
        evaluate_from(&r.condition, b, &s).into_iter().next().map(|s| (r, s))
    });
    let Some((r, s)) = chosen else {
        return Err(RefineError::NoRefinement(action.to_string()));
    };
    stack.push(action.clone());
    for item in &r.body {
        let a = item.atom().apply(&s);
        if !a.is_ground() {
            return Err(RefineError::NonGround(a.to_string()));
        }
        match item {
            BodyItem::Command(_) => {
                if let Some(value) = blocking_value(&a, b, ci, iv) {
                    return Err(RefineError::Blocked { command: a.to_string(), value });
                }
                out.push(a);
            }
            BodyItem::Action(_) => expand(&a, b, kh, ci, iv, budget - 1, stack, out)?,
        }
    }
    stack.pop();
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecFailure {
    pub code: FailureCode,
    pub detail: String,
}

impl ExecFailure {
    pub fn new(code: FailureCode, detail: impl Into<String>) -> Self {
        ExecFailure { code, detail: detail.into() }
    }
}

impl fmt::Display for ExecFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code)?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

/// Carries out one ground command, applying observed belief changes to `beliefs`.
pub trait CommandExecutor {
    fn execute(&mut self, cmd: &Atom, beliefs: &mut BeliefBase) -> Result<(), ExecFailure>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExecutedCommand {
    pub goal: GoalRef,
    pub action: Atom,
    pub command: Atom,
    /// Beliefs the value gate saw just before execution.
    pub beliefs_before: Vec<Atom>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GoalOutcome {
    pub goal: GoalRef,
    pub outcome: Outcome,
    pub target: Formula,
    pub reason: Option<String>,
    /// Beliefs when the outcome was decided.
    pub beliefs: Vec<Atom>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ActingReport {
    pub executed: Vec<ExecutedCommand>,
    pub outcomes: Vec<GoalOutcome>,
    pub notes: Vec<String>,
}

enum Abort {
    Refine(RefineError),
    Exec(Atom, ExecFailure),
}

/// Executes plans in order against the live belief base. A refinement or
/// execution failure abandons the plan and fails its goal; a finished plan
/// succeeds only if its target holds afterwards.
pub fn acting(
    b: &mut BeliefBase,
    iv: &ImportanceOrder,
    plans: &[Plan],
    kw: &[ActionModel],
    kh: &[Refinement],
    ci: &[CommandImpactRule],
    exec: &mut dyn CommandExecutor,
) -> ActingReport {
    let mut report = ActingReport::default();
    for plan in plans {
        let mut abort = None;
        'actions: for action in &plan.body {
            let commands = match refine(action, &iv.extend_beliefs(b), kh, ci, iv, DEFAULT_DEPTH) {
                Ok(c) => c,
                Err(e) => {
                    abort = Some(Abort::Refine(e));
                    break;
                }
            };
            for cmd in commands {
                // beliefs may have moved since refinement
                let before = iv.extend_beliefs(b);
                if let Some(value) = blocking_value(&cmd, &before, ci, iv) {
                    abort = Some(Abort::Refine(RefineError::Blocked { command: cmd.to_string(), value }));
                    break 'actions;
                }
                if let Err(f) = exec.execute(&cmd, b) {
                    abort = Some(Abort::Exec(cmd, f));
                    break 'actions;
                }
                report.executed.push(ExecutedCommand {
                    goal: plan.goal.clone(),
                    action: action.clone(),
                    command: cmd,
                    beliefs_before: before.iter().cloned().collect(),
                });
            }
            if let Some(diff) = effect_mismatch(action, kw, b) {
                report.notes.push(format!("{action}: {diff}"));
            }
        }
        let (outcome, reason) = match abort {
            Some(Abort::Refine(e)) => (Outcome::Fail, Some(e.to_string())),
            Some(Abort::Exec(cmd, f)) => (Outcome::Fail, Some(format!("{cmd}: {f}"))),
            None if holds(&plan.target, &iv.extend_beliefs(b), &Substitution::new()) => (Outcome::Success, None),
            None => (Outcome::Fail, Some(format!("goal condition {} does not hold", plan.target))),
        };
        report.outcomes.push(GoalOutcome {
            goal: plan.goal.clone(),
            outcome,
            target: plan.target.clone(),
            reason,
            beliefs: b.iter().cloned().collect(),
        });
    }
    report
}

/// Projected effects of `action` that the beliefs do not show, if any.
fn effect_mismatch(action: &Atom, kw: &[ActionModel], b: &BeliefBase) -> Option<String> {
    let (m, s) = kw.iter().find_map(|m| {
        (m.name == action.predicate)
            .then(|| m.head().match_with(action, &Substitution::new()))
            .flatten()
            .map(|s| (m, s))
    })?;
    let adds: Vec<Atom> = m.add.iter().map(|a| a.apply(&s)).collect();
    let missing: Vec<String> = adds.iter().filter(|a| !b.contains(a)).map(|a| a.to_string()).collect();
    let lingering: Vec<String> = m
        .delete
        .iter()
        .map(|a| a.apply(&s))
        .filter(|a| b.contains(a) && !adds.contains(a))
        .map(|a| a.to_string())
        .collect();
    if missing.is_empty() && lingering.is_empty() {
        return None;
    }
    Some(format!(
        "projected effects not observed: missing [{}], still present [{}]",
        missing.join(", "),
        lingering.join(", ")
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::goals::Source;
    use crate::logic::parse_ground_atom;

    fn atom(s: &str) -> Atom {
        parse_ground_atom(s).unwrap()
    }

    #[test]
    fn single_command_body() {
        let kh = vec![Refinement::parse("put_voicemail(P)", "true", &["set_status(P, voicemail)"]).unwrap()];
        let cmds = refine(&atom("put_voicemail(phone)"), &BeliefBase::new(), &kh, &[], &ImportanceOrder::new(), 32);
        assert_eq!(cmds.unwrap(), vec![atom("set_status(phone, voicemail)")]);
    }

    #[test]
    fn subactions_expand_in_order() {
        let kh = vec![
            Refinement::new(
                parse_atom("watch(D, C)").unwrap(),
                Formula::True,
                vec![
                    BodyItem::Command(parse_atom("set_channel(D, C)").unwrap()),
                    BodyItem::Action(parse_atom("start(D)").unwrap()),
                ],
            )
            .unwrap(),
            Refinement::parse("start(D)", "true", &["set_status(D, playing)"]).unwrap(),
        ];
        let cmds = refine(&atom("watch(tv, arte)"), &BeliefBase::new(), &kh, &[], &ImportanceOrder::new(), 32).unwrap();
        assert_eq!(cmds, vec![atom("set_channel(tv, arte)"), atom("set_status(tv, playing)")]);
    }

    #[test]
    fn first_applicable_entry_wins() {
        let kh = vec![
            Refinement::parse("a(X)", "quiet", &["soft(X)"]).unwrap(),
            Refinement::parse("a(X)", "true", &["loud(X)"]).unwrap(),
        ];
        let b = BeliefBase::from_atoms([atom("quiet")]).unwrap();
        let iv = ImportanceOrder::new();
        assert_eq!(refine(&atom("a(x)"), &b, &kh, &[], &iv, 32).unwrap(), vec![atom("soft(x)")]);
        assert_eq!(refine(&atom("a(x)"), &BeliefBase::new(), &kh, &[], &iv, 32).unwrap(), vec![atom("loud(x)")]);
    }

    #[test]
    fn cycles_and_budget_fail() {
        let kh = vec![Refinement::new(
            parse_atom("a").unwrap(),
            Formula::True,
            vec![BodyItem::Action(parse_atom("a").unwrap())],
        )
        .unwrap()];
        let iv = ImportanceOrder::new();
        assert!(matches!(refine(&atom("a"), &BeliefBase::new(), &kh, &[], &iv, 32), Err(RefineError::Cycle(_))));
        assert!(matches!(
            refine(&atom("a"), &BeliefBase::new(), &kh, &[], &iv, 0),
            Err(RefineError::DepthExhausted(_))
        ));
        assert!(matches!(
            refine(&atom("b"), &BeliefBase::new(), &kh, &[], &iv, 32),
            Err(RefineError::NoRefinement(_))
        ));
    }

    #[test]
    fn value_gate_aborts_action() {
        let kh = vec![Refinement::parse("off(D)", "true", &["set_channel(D, news)", "set_status(D, off)"]).unwrap()];
        let ci = vec![CommandImpactRule::parse("seated", "set_status(D, off)", Impact::Negative, Value::Hedonism).unwrap()];
        let iv = ImportanceOrder::strict(&[Value::Hedonism]).unwrap();
        let b = BeliefBase::from_atoms([atom("seated")]).unwrap();
        assert!(matches!(refine(&atom("off(tv)"), &b, &kh, &ci, &iv, 32), Err(RefineError::Blocked { .. })));
        assert!(refine(&atom("off(tv)"), &b, &kh, &ci, &ImportanceOrder::new(), 32).is_ok());
    }

    struct Recorder(Vec<Atom>);

    impl CommandExecutor for Recorder {
        fn execute(&mut self, cmd: &Atom, beliefs: &mut BeliefBase) -> Result<(), ExecFailure> {
            if cmd.predicate == "explode" {
                return Err(ExecFailure::new(FailureCode::DeviceError, "boom"));
            }
            self.0.push(cmd.clone());
            beliefs.assert_belief(cmd.clone()).unwrap();
            Ok(())
        }
    }

    #[test]
    fn acting_marks_outcomes() {
        let kh = vec![
            Refinement::parse("go(X)", "true", &["done(X)"]).unwrap(),
            Refinement::parse("bad(X)", "true", &["explode(X)"]).unwrap(),
        ];
        let goal = |s: &str| GoalRef { goal: atom(s), source: Source::Agent };
        let plans = vec![
            Plan { goal: goal("g1"), target: Formula::Atom(atom("done(a)")), body: vec![atom("bad(a)")] },
            Plan { goal: goal("g2"), target: Formula::Atom(atom("done(b)")), body: vec![atom("go(b)")] },
            Plan { goal: goal("g3"), target: Formula::Atom(atom("never")), body: vec![] },
        ];
        let mut b = BeliefBase::new();
        let mut exec = Recorder(vec![]);
        let r = acting(&mut b, &ImportanceOrder::new(), &plans, &[], &kh, &[], &mut exec);
        let outcomes: Vec<Outcome> = r.outcomes.iter().map(|o| o.outcome).collect();
        assert_eq!(outcomes, [Outcome::Fail, Outcome::Success, Outcome::Fail]);
        assert_eq!(exec.0, vec![atom("done(b)")]);
        assert!(acting(&mut b, &ImportanceOrder::new(), &[], &[], &kh, &[], &mut exec).executed.is_empty());
    }
}
