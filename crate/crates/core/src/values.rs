//! Value reasoning: reorders the user's value priorities from the default order
//! using value-ordering rules evaluated against the current context.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{evaluate, parse_atom, parse_formula, Atom, BeliefBase, Formula, LogicError, Term};

macro_rules! values {
    ($($variant:ident => $name:literal),* $(,)?) => {
        /// One of the nineteen basic human values.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum Value { $($variant),* }

        impl Value {
            pub const ALL: [Value; 19] = [$(Value::$variant),*];

            pub fn name(self) -> &'static str {
                match self { $(Value::$variant => $name),* }
            }
        }

        impl FromStr for Value {
            type Err = ValueError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($name => Ok(Value::$variant),)*
                    _ => Err(ValueError::UnknownValue(s.to_string())),
                }
            }
        }
    };
}

values! {
    SelfDirectionThought => "self_direction_thought",
    SelfDirectionAction => "self_direction_action",
    Stimulation => "stimulation",
    Hedonism => "hedonism",
    Achievement => "achievement",
    PowerDominance => "power_dominance",
    PowerResources => "power_resources",
    Face => "face",
    SecurityPersonal => "security_personal",
    SecuritySocietal => "security_societal",
    Tradition => "tradition",
    ConformityRules => "conformity_rules",
    ConformityInterpersonal => "conformity_interpersonal",
    Humility => "humility",
    BenevolenceCaring => "benevolence_caring",
    BenevolenceDependability => "benevolence_dependability",
    UniversalismConcern => "universalism_concern",
    UniversalismNature => "universalism_nature",
    UniversalismTolerance => "universalism_tolerance",
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValueError {
    #[error("unknown value `{0}`")]
    UnknownValue(String),
    #[error("malformed order operation `{0}`")]
    MalformedOp(String),
    #[error("value `{0}` appears in more than one bucket")]
    DuplicateValue(Value),
    #[error("empty bucket at rank {0}")]
    EmptyBucket(usize),
    #[error("reference value `{0}` is not in the current order")]
    MissingReference(Value),
    #[error("operation relates `{0}` to itself")]
    SelfReference(Value),
    #[error(transparent)]
    Logic(#[from] LogicError),
}

/// Total preorder over values: ranked buckets, rank 0 most important.
/// Values may be absent.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<Value>>", into = "Vec<Vec<Value>>")]
pub struct ImportanceOrder {
    buckets: Vec<BTreeSet<Value>>,
}

impl TryFrom<Vec<Vec<Value>>> for ImportanceOrder {
    type Error = ValueError;
    fn try_from(v: Vec<Vec<Value>>) -> Result<Self, ValueError> {
        ImportanceOrder::from_buckets(v)
    }
}

impl From<ImportanceOrder> for Vec<Vec<Value>> {
    fn from(o: ImportanceOrder) -> Self {
        o.buckets.into_iter().map(|b| b.into_iter().collect()).collect()
    }
}

impl ImportanceOrder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_buckets(buckets: Vec<Vec<Value>>) -> Result<Self, ValueError> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(buckets.len());
        for (i, b) in buckets.into_iter().enumerate() {
            if b.is_empty() {
                return Err(ValueError::EmptyBucket(i));
            }
            let mut set = BTreeSet::new();
            for v in b {
                if !seen.insert(v) {
                    return Err(ValueError::DuplicateValue(v));
                }
                set.insert(v);
            }
            out.push(set);
        }
        Ok(ImportanceOrder { buckets: out })
    }

    /// Strict order, one value per bucket.
    pub fn strict(values: &[Value]) -> Result<Self, ValueError> {
        Self::from_buckets(values.iter().map(|v| vec![*v]).collect())
    }

    pub fn buckets(&self) -> &[BTreeSet<Value>] {
        &self.buckets
    }

    pub fn rank(&self, v: Value) -> Option<usize> {
        self.buckets.iter().position(|b| b.contains(&v))
    }

    pub fn contains(&self, v: Value) -> bool {
        self.rank(v).is_some()
    }

    pub fn len(&self) -> usize {
        self.buckets.iter().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    fn check(&self) {
        debug_assert!(self.buckets.iter().all(|b| !b.is_empty()));
        debug_assert_eq!(
            self.buckets.iter().map(BTreeSet::len).sum::<usize>(),
            self.buckets.iter().flatten().collect::<BTreeSet<_>>().len()
        );
    }

    fn take(&mut self, v: Value) {
        if let Some(i) = self.rank(v) {
            self.buckets[i].remove(&v);
            if self.buckets[i].is_empty() {
                self.buckets.remove(i);
            }
        }
    }

    /// Applies one operation in place. On error the order is left untouched.
    pub fn apply(&mut self, op: OrderOp) -> Result<(), ValueError> {
        match op {
            OrderOp::MakeMost(v) => {
                self.take(v);
                self.buckets.insert(0, BTreeSet::from([v]));
            }
            OrderOp::MakeLeast(v) => {
                self.take(v);
                self.buckets.push(BTreeSet::from([v]));
            }
            OrderOp::Above(v1, v2) | OrderOp::Below(v1, v2) | OrderOp::Same(v1, v2) => {
                if v1 == v2 {
                    return Err(ValueError::SelfReference(v1));
                }
                if !self.contains(v2) {
                    return Err(ValueError::MissingReference(v2));
                }
                self.take(v1);
                let i = self.rank(v2).expect("reference checked above");
                match op {
                    OrderOp::Above(..) => self.buckets.insert(i, BTreeSet::from([v1])),
                    OrderOp::Below(..) => self.buckets.insert(i + 1, BTreeSet::from([v1])),
                    _ => {
                        self.buckets[i].insert(v1);
                    }
                }
            }
            OrderOp::Remove(v) => self.take(v),
        }
        self.check();
        Ok(())
    }

    /// Pure form of [`apply`](Self::apply).
    pub fn apply_order_op(&self, op: OrderOp) -> Result<ImportanceOrder, ValueError> {
        let mut out = self.clone();
        out.apply(op)?;
        Ok(out)
    }

    /// Context facts describing this order: `valued(v)` for each present value and
    /// `prefers(v1, v2)` whenever `v1` ranks strictly above `v2`.
    pub fn facts(&self) -> Vec<Atom> {
        let mut out = Vec::new();
        for (i, b) in self.buckets.iter().enumerate() {
            for v in b {
                out.push(Atom::new("valued", vec![Term::constant(v.name())]));
                for lower in self.buckets.iter().skip(i + 1).flatten() {
                    out.push(Atom::new(
                        "prefers",
                        vec![Term::constant(v.name()), Term::constant(lower.name())],
                    ));
                }
            }
        }
        out
    }

    /// Copy of `b` extended with [`facts`](Self::facts).
    pub fn extend_beliefs(&self, b: &BeliefBase) -> BeliefBase {
        let mut out = b.clone();
        for a in self.facts() {
            out.assert_belief(a).expect("value facts are ground");
        }
        out
    }

    pub fn to_strings(&self) -> Vec<Vec<String>> {
        self.buckets
            .iter()
            .map(|b| b.iter().map(|v| v.name().to_string()).collect())
            .collect()
    }
}

impl fmt::Display for ImportanceOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.buckets.iter().enumerate() {
            if i > 0 {
                f.write_str(" > ")?;
            }
            let names: Vec<_> = b.iter().map(|v| v.name()).collect();
            if names.len() == 1 {
                f.write_str(names[0])?;
            } else {
                write!(f, "{{{}}}", names.join(" ~ "))?;
            }
        }
        Ok(())
    }
}

/// Reordering operation in a value-ordering rule body.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OrderOp {
    MakeLeast(Value),
    MakeMost(Value),
    Above(Value, Value),
    Below(Value, Value),
    Same(Value, Value),
    Remove(Value),
}

impl FromStr for OrderOp {
    type Err = ValueError;

    fn from_str(s: &str) -> Result<Self, ValueError> {
        let atom = parse_atom(s).map_err(|_| ValueError::MalformedOp(s.to_string()))?;
        let vals = atom
            .args
            .iter()
            .map(|t| match t {
                Term::Const(c) => c.name().parse::<Value>(),
                Term::Var(v) => Err(ValueError::UnknownValue(v.clone())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let op = match (atom.predicate.as_str(), vals.as_slice()) {
            ("make_least", [v]) => OrderOp::MakeLeast(*v),
            ("make_most", [v]) => OrderOp::MakeMost(*v),
            ("above", [a, b]) => OrderOp::Above(*a, *b),
            ("below", [a, b]) => OrderOp::Below(*a, *b),
            ("same", [a, b]) => OrderOp::Same(*a, *b),
            ("remove", [v]) => OrderOp::Remove(*v),
            _ => return Err(ValueError::MalformedOp(s.to_string())),
        };
        Ok(op)
    }
}

impl fmt::Display for OrderOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrderOp::MakeLeast(v) => write!(f, "make_least({v})"),
            OrderOp::MakeMost(v) => write!(f, "make_most({v})"),
            OrderOp::Above(a, b) => write!(f, "above({a}, {b})"),
            OrderOp::Below(a, b) => write!(f, "below({a}, {b})"),
            OrderOp::Same(a, b) => write!(f, "same({a}, {b})"),
            OrderOp::Remove(v) => write!(f, "remove({v})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValueOrderingRule {
    pub condition: Formula,
    pub body: Vec<OrderOp>,
}

impl ValueOrderingRule {
    pub fn parse(condition: &str, body: &[impl AsRef<str>]) -> Result<Self, ValueError> {
        Ok(ValueOrderingRule {
            condition: parse_formula(condition)?,
            body: body
                .iter()
                .map(|s| s.as_ref().parse())
                .collect::<Result<_, _>>()?,
        })
    }
}

/// Computes the current importance order from the default one. Rules fire in
/// declaration order, once per satisfying substitution; ops that cannot apply are
/// skipped and reported in the returned notes.
pub fn value_reasoning_traced(
    b: &BeliefBase,
    iv_d: &ImportanceOrder,
    vo: &[ValueOrderingRule],
) -> (ImportanceOrder, Vec<String>) {
    let mut iv = iv_d.clone();
    let mut notes = Vec::new();
    for (i, rule) in vo.iter().enumerate() {
        for _ in evaluate(&rule.condition, b) {
            for op in &rule.body {
                if let Err(e) = iv.apply(*op) {
                    notes.push(format!("vo rule {i}: {op} skipped: {e}"));
                }
            }
        }
    }
    (iv, notes)
}

pub fn value_reasoning(
    b: &BeliefBase,
    iv_d: &ImportanceOrder,
    vo: &[ValueOrderingRule],
) -> ImportanceOrder {
    value_reasoning_traced(b, iv_d, vo).0
}
