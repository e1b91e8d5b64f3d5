//! Goal reasoning: maintains the goal status set, activates goals from context,
//! drops goals that hurt a held value and emits the ordered goal list.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{evaluate, parse_formula, Atom, BeliefBase, Formula, LogicError, Parser, Tok};
use crate::values::{ImportanceOrder, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalStatus {
    Waiting,
    Active,
    Inactive,
    Success,
    Fail,
    Dropped,
}

impl GoalStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, GoalStatus::Success | GoalStatus::Fail | GoalStatus::Dropped)
    }

    /// Legal lifecycle edges. Terminal statuses have none; a terminal user goal
    /// only comes back through a re-post, which starts a new lifetime.
    pub fn can_transition_to(self, to: GoalStatus) -> bool {
        use GoalStatus::*;
        matches!(
            (self, to),
            (Waiting, Active | Inactive | Dropped)
                | (Active, Success | Fail | Dropped | Inactive)
                | (Inactive, Active | Dropped | Waiting)
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            GoalStatus::Waiting => "waiting",
            GoalStatus::Active => "active",
            GoalStatus::Inactive => "inactive",
            GoalStatus::Success => "success",
            GoalStatus::Fail => "fail",
            GoalStatus::Dropped => "dropped",
        }
    }
}

impl FromStr for GoalStatus {
    type Err = GoalError;
    fn from_str(s: &str) -> Result<Self, GoalError> {
        Ok(match s {
            "waiting" => GoalStatus::Waiting,
            "active" => GoalStatus::Active,
            "inactive" => GoalStatus::Inactive,
            "success" => GoalStatus::Success,
            "fail" => GoalStatus::Fail,
            "dropped" => GoalStatus::Dropped,
            _ => return Err(GoalError::Template(format!("unknown status `{s}`"))),
        })
    }
}

impl fmt::Display for GoalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Who posted a goal: the user directly, or the agent's own reasoning.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "user")]
    User,
    #[serde(rename = "self")]
    Agent,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::User => "user",
            Source::Agent => "self",
        }
    }
}

impl FromStr for Source {
    type Err = GoalError;
    fn from_str(s: &str) -> Result<Self, GoalError> {
        match s {
            "user" => Ok(Source::User),
            "self" => Ok(Source::Agent),
            _ => Err(GoalError::Template(format!("unknown source `{s}`"))),
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Impact level of a goal, action or command on a value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Impact {
    Negative,
    Neutral,
    Positive,
}

impl Impact {
    pub fn score(self) -> i64 {
        match self {
            Impact::Negative => -1,
            Impact::Neutral => 0,
            Impact::Positive => 1,
        }
    }
}

impl TryFrom<i64> for Impact {
    type Error = String;
    fn try_from(v: i64) -> Result<Self, String> {
        match v {
            -1 => Ok(Impact::Negative),
            0 => Ok(Impact::Neutral),
            1 => Ok(Impact::Positive),
            other => Err(format!("impact must be -1, 0 or 1, got {other}")),
        }
    }
}

impl Serialize for Impact {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i64(self.score())
    }
}

impl<'de> Deserialize<'de> for Impact {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Impact::try_from(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GoalError {
    #[error("goal `{0}` is not ground")]
    NonGround(String),
    #[error("no goal `{goal}` from {origin}")]
    Missing { goal: String, origin: Source },
    #[error("goal `{goal}` is {status}, expected active")]
    NotActive { goal: String, status: GoalStatus },
    #[error("malformed goal template: {0}")]
    Template(String),
    #[error("rule body variable `{0}` is not bound by the condition")]
    UnboundBodyVariable(String),
    #[error(transparent)]
    Logic(#[from] LogicError),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GoalRef {
    pub goal: Atom,
    pub source: Source,
}

impl fmt::Display for GoalRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.goal, self.source)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoalState {
    pub goal: Atom,
    pub status: GoalStatus,
    pub source: Source,
}

impl fmt::Display for GoalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "state({}, {}, {})", self.goal, self.status, self.source)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WriteKind {
    Insert,
    Transition,
    /// A terminal user goal re-posted by the user: a fresh lifetime.
    Renew,
}

/// One status write, as recorded in the set's audit log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StatusWrite {
    pub goal: Atom,
    pub source: Source,
    pub from: Option<GoalStatus>,
    pub to: GoalStatus,
    pub kind: WriteKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Entry {
    status: GoalStatus,
    arrival: u64,
}

/// The goal status set, keyed by `(goal, source)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GoalStatusSet {
    entries: BTreeMap<GoalRef, Entry>,
    next_arrival: u64,
    log: Vec<StatusWrite>,
}

impl GoalStatusSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn status(&self, goal: &Atom, source: Source) -> Option<GoalStatus> {
        self.entries
            .get(&GoalRef { goal: goal.clone(), source })
            .map(|e| e.status)
    }

    /// Entries in arrival order.
    pub fn states(&self) -> Vec<GoalState> {
        let mut v: Vec<_> = self.entries.iter().collect();
        v.sort_by_key(|(_, e)| e.arrival);
        v.into_iter()
            .map(|(k, e)| GoalState {
                goal: k.goal.clone(),
                status: e.status,
                source: k.source,
            })
            .collect()
    }

    /// Every status write since construction (or the last [`take_log`](Self::take_log)).
    pub fn log(&self) -> &[StatusWrite] {
        &self.log
    }

    pub fn take_log(&mut self) -> Vec<StatusWrite> {
        std::mem::take(&mut self.log)
    }

    fn insert(&mut self, key: GoalRef, status: GoalStatus) {
        let arrival = self.next_arrival;
        self.next_arrival += 1;
        self.log.push(StatusWrite {
            goal: key.goal.clone(),
            source: key.source,
            from: None,
            to: status,
            kind: WriteKind::Insert,
        });
        self.entries.insert(key, Entry { status, arrival });
    }

    fn renew(&mut self, key: &GoalRef, status: GoalStatus) {
        let arrival = self.next_arrival;
        self.next_arrival += 1;
        let e = self.entries.get_mut(key).expect("renew of existing entry");
        self.log.push(StatusWrite {
            goal: key.goal.clone(),
            source: key.source,
            from: Some(e.status),
            to: status,
            kind: WriteKind::Renew,
        });
        e.status = status;
        e.arrival = arrival;
    }

    /// Checked status change. Returns false (and writes nothing) for illegal edges.
    fn transition(&mut self, key: &GoalRef, to: GoalStatus) -> bool {
        let Some(e) = self.entries.get_mut(key) else {
            return false;
        };
        if !e.status.can_transition_to(to) {
            return false;
        }
        self.log.push(StatusWrite {
            goal: key.goal.clone(),
            source: key.source,
            from: Some(e.status),
            to,
            kind: WriteKind::Transition,
        });
        e.status = to;
        true
    }

    fn ordered(&self, source: Source, status: GoalStatus) -> Vec<GoalRef> {
        let mut v: Vec<_> = self
            .entries
            .iter()
            .filter(|(k, e)| k.source == source && e.status == status)
            .collect();
        v.sort_by_key(|(_, e)| e.arrival);
        v.into_iter().map(|(k, _)| k.clone()).collect()
    }

    /// Records the outcome of pursuing an active goal.
    pub fn set_outcome(
        &mut self,
        goal: &Atom,
        source: Source,
        outcome: Outcome,
    ) -> Result<(), GoalError> {
        let key = GoalRef { goal: goal.clone(), source };
        let status = self.entries.get(&key).map(|e| e.status).ok_or_else(|| GoalError::Missing {
            goal: goal.to_string(),
            origin: source,
        })?;
        if status != GoalStatus::Active {
            return Err(GoalError::NotActive { goal: goal.to_string(), status });
        }
        let ok = self.transition(&key, outcome.status());
        debug_assert!(ok);
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Fail,
}

impl Outcome {
    pub fn status(self) -> GoalStatus {
        match self {
            Outcome::Success => GoalStatus::Success,
            Outcome::Fail => GoalStatus::Fail,
        }
    }
}

/// `state(goal, status, source)` with variables bound by a rule condition.
#[derive(Clone, Debug, PartialEq)]
pub struct GoalTemplate {
    pub goal: Atom,
    pub status: GoalStatus,
    pub source: Source,
}

impl FromStr for GoalTemplate {
    type Err = GoalError;
    fn from_str(s: &str) -> Result<Self, GoalError> {
        let mut p = Parser::new(s)?;
        let head = p.ident("`state`")?;
        if head != "state" {
            return Err(GoalError::Template(format!("expected `state(...)`, found `{head}`")));
        }
        p.expect(Tok::LParen, "`(`")?;
        let goal = p.atom()?;
        p.expect(Tok::Comma, "`,`")?;
        let status: GoalStatus = p.ident("a goal status")?.parse()?;
        p.expect(Tok::Comma, "`,`")?;
        let source: Source = p.ident("a goal source")?.parse()?;
        p.expect(Tok::RParen, "`)`")?;
        p.finish()?;
        Ok(GoalTemplate { goal, status, source })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GoalActivationRule {
    pub condition: Formula,
    pub body: Vec<GoalTemplate>,
}

impl GoalActivationRule {
    pub fn new(condition: Formula, body: Vec<GoalTemplate>) -> Result<Self, GoalError> {
        let bound = condition.positive_variables();
        for t in &body {
            if let Some(v) = t.goal.variables().into_iter().find(|v| !bound.contains(v)) {
                return Err(GoalError::UnboundBodyVariable(v));
            }
        }
        Ok(GoalActivationRule { condition, body })
    }

    pub fn parse(condition: &str, body: &[impl AsRef<str>]) -> Result<Self, GoalError> {
        let body = body
            .iter()
            .map(|s| s.as_ref().parse())
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(parse_formula(condition)?, body)
    }
}

/// Impact of goals matching `goal` on `value` while `condition` holds.
#[derive(Clone, Debug, PartialEq)]
pub struct GoalImpactRule {
    pub condition: Formula,
    pub goal: Atom,
    pub impact: Impact,
    pub value: Value,
}

impl GoalImpactRule {
    pub fn parse(condition: &str, goal: &str, impact: Impact, value: Value) -> Result<Self, GoalError> {
        Ok(GoalImpactRule {
            condition: parse_formula(condition)?,
            goal: crate::logic::parse_atom(goal)?,
            impact,
            value,
        })
    }
}

/// Where user goals go relative to agent goals in the emitted list.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalOrderPolicy {
    #[default]
    UserFirst,
    SelfFirst,
}

/// Ordered list of active goals, most preferred first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GoalList {
    pub goals: Vec<GoalRef>,
}

impl GoalList {
    pub fn is_empty(&self) -> bool {
        self.goals.is_empty()
    }

    pub fn len(&self) -> usize {
        self.goals.len()
    }
}

/// Adds user goals as `waiting`. Terminal entries are re-posted; live ones are left alone.
pub fn update(gs: &mut GoalStatusSet, gg: &[Atom]) -> Result<Vec<String>, GoalError> {
    if let Some(g) = gg.iter().find(|g| !g.is_ground()) {
        return Err(GoalError::NonGround(g.to_string()));
    }
    let mut notes = Vec::new();
    for g in gg {
        let key = GoalRef { goal: g.clone(), source: Source::User };
        match gs.entries.get(&key).map(|e| e.status) {
            None => gs.insert(key, GoalStatus::Waiting),
            Some(s) if s.is_terminal() => gs.renew(&key, GoalStatus::Waiting),
            Some(s) => notes.push(format!("duplicate user goal {g} ({s}) suppressed")),
        }
    }
    Ok(notes)
}

/// Applies the built-in activation of waiting user goals, then every satisfied
/// activation rule in order, once per substitution.
pub fn select(gs: &mut GoalStatusSet, b: &BeliefBase, ga: &[GoalActivationRule]) -> Vec<String> {
    let mut notes = Vec::new();
    for key in gs.ordered(Source::User, GoalStatus::Waiting) {
        gs.transition(&key, GoalStatus::Active);
    }
    for (i, rule) in ga.iter().enumerate() {
        for s in evaluate(&rule.condition, b) {
            for t in &rule.body {
                let goal = t.goal.apply(&s);
                if !goal.is_ground() {
                    notes.push(format!("ga rule {i}: goal {goal} not ground, skipped"));
                    continue;
                }
                let key = GoalRef { goal, source: t.source };
                match gs.entries.get(&key).map(|e| e.status) {
                    Some(cur) if cur == t.status => {}
                    Some(cur) => {
                        if !gs.transition(&key, t.status) {
                            notes.push(format!(
                                "ga rule {i}: {key} {cur} -> {} is not a legal transition, skipped",
                                t.status
                            ));
                        }
                    }
                    None => match t.status {
                        GoalStatus::Waiting | GoalStatus::Active | GoalStatus::Inactive => {
                            gs.insert(key, t.status)
                        }
                        other => notes.push(format!(
                            "ga rule {i}: cannot create {key} directly as {other}, skipped"
                        )),
                    },
                }
            }
        }
    }
    notes
}

/// Impacts fired on `goal` by the impact rules, one per rule at most.
pub fn fired_impacts(goal: &Atom, b: &BeliefBase, gi: &[GoalImpactRule]) -> Vec<(Impact, Value)> {
    let mut out = Vec::new();
    for rule in gi {
        let fired = evaluate(&rule.condition, b)
            .iter()
            .any(|s| rule.goal.apply(s).match_with(goal, s).is_some());
        if fired {
            out.push((rule.impact, rule.value));
        }
    }
    out
}

/// Per-bucket impact sums, most important bucket first.
pub fn impact_score(impacts: &[(Impact, Value)], iv: &ImportanceOrder) -> Vec<i64> {
    let mut score = vec![0i64; iv.buckets().len()];
    for (impact, v) in impacts {
        if let Some(r) = iv.rank(*v) {
            score[r] += impact.score();
        }
    }
    score
}

/// Drops agent goals with a negative impact on a held value and orders the rest
/// by impact score; user goals keep arrival order.
pub fn sort(
    gs: &mut GoalStatusSet,
    b: &BeliefBase,
    gi: &[GoalImpactRule],
    iv: &ImportanceOrder,
    policy: GoalOrderPolicy,
) -> (GoalList, Vec<String>) {
    let mut notes = Vec::new();
    let mut scored = Vec::new();
    for key in gs.ordered(Source::Agent, GoalStatus::Active) {
        let impacts = fired_impacts(&key.goal, b, gi);
        if let Some((_, v)) = impacts
            .iter()
            .find(|(i, v)| *i == Impact::Negative && iv.contains(*v))
        {
            gs.transition(&key, GoalStatus::Dropped);
            notes.push(format!("{key} dropped: negative impact on {v}"));
            continue;
        }
        scored.push((impact_score(&impacts, iv), key));
    }
    // stable: equal scores keep arrival order
    scored.sort_by(|a, b| b.0.cmp(&a.0));
    let agent: Vec<GoalRef> = scored.into_iter().map(|(_, k)| k).collect();
    let user = gs.ordered(Source::User, GoalStatus::Active);
    let goals = match policy {
        GoalOrderPolicy::UserFirst => user.into_iter().chain(agent).collect(),
        GoalOrderPolicy::SelfFirst => agent.into_iter().chain(user).collect(),
    };
    (GoalList { goals }, notes)
}

/// `update`, then `select`, then `sort`. `b` should already carry the value facts
/// of `iv` if rules refer to value preferences.
pub fn goal_reasoning(
    b: &BeliefBase,
    gg: &[Atom],
    iv: &ImportanceOrder,
    gs: &mut GoalStatusSet,
    ga: &[GoalActivationRule],
    gi: &[GoalImpactRule],
    policy: GoalOrderPolicy,
) -> Result<(GoalList, Vec<String>), GoalError> {
    let mut notes = update(gs, gg)?;
    notes.extend(select(gs, b, ga));
    let (list, more) = sort(gs, b, gi, iv, policy);
    notes.extend(more);
    Ok((list, notes))
}
