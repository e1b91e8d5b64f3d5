use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Folds an identifier into the `[a-z0-9_]` charset used for constants and
/// predicate names. `+` becomes `plus` so `Canal+` and `canalplus` coincide.
pub fn normalize_identifier(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for ch in raw.chars() {
        match ch {
            'A'..='Z' => out.push(ch.to_ascii_lowercase()),
            'a'..='z' | '0'..='9' | '_' => out.push(ch),
            '+' => out.push_str("plus"),
            _ => out.push('_'),
        }
    }
    out
}

/// A ground symbol. Equality is by normalized name; a numeric payload is
/// available whenever the name is a number literal.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Constant(String);

impl Constant {
    pub fn symbol(name: &str) -> Self {
        Constant(normalize_identifier(name))
    }

    /// Number literal. The text is kept verbatim (`40`, `-2.5`).
    pub fn number(text: &str) -> Self {
        Constant(text.to_string())
    }

    pub fn from_f64(value: f64) -> Self {
        Constant(format!("{value}"))
    }

    pub fn name(&self) -> &str {
        &self.0
    }

    pub fn numeric(&self) -> Option<f64> {
        let first = self.0.chars().next()?;
        if first.is_ascii_digit() || first == '-' {
            self.0.parse().ok()
        } else {
            None
        }
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Const(Constant),
    Var(String),
}

impl Term {
    pub fn constant(name: &str) -> Self {
        Term::Const(Constant::symbol(name))
    }

    pub fn var(name: &str) -> Self {
        Term::Var(name.to_string())
    }

    pub fn is_ground(&self) -> bool {
        matches!(self, Term::Const(_))
    }

    pub fn as_const(&self) -> Option<&Constant> {
        match self {
            Term::Const(c) => Some(c),
            Term::Var(_) => None,
        }
    }

    pub fn apply(&self, s: &Substitution) -> Term {
        match self {
            Term::Var(v) => match s.get(v) {
                Some(c) => Term::Const(c.clone()),
                None => self.clone(),
            },
            Term::Const(_) => self.clone(),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => c.fmt(f),
            Term::Var(v) => f.write_str(v),
        }
    }
}

/// `predicate(arg, ...)`. Predicate plus arity identifies the relation.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: &str, args: Vec<Term>) -> Self {
        Atom {
            predicate: normalize_identifier(predicate),
            args,
        }
    }

    /// Ground atom from constant names, e.g. `Atom::ground("devicestatus", &["tv", "off"])`.
    pub fn ground(predicate: &str, args: &[&str]) -> Self {
        Atom::new(predicate, args.iter().map(|a| Term::constant(a)).collect())
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn key(&self) -> (String, usize) {
        (self.predicate.clone(), self.args.len())
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    pub fn apply(&self, s: &Substitution) -> Atom {
        Atom {
            predicate: self.predicate.clone(),
            args: self.args.iter().map(|t| t.apply(s)).collect(),
        }
    }

    pub fn variables(&self) -> BTreeSet<String> {
        self.args
            .iter()
            .filter_map(|t| match t {
                Term::Var(v) => Some(v.clone()),
                Term::Const(_) => None,
            })
            .collect()
    }

    /// Variables in order of first occurrence.
    pub fn variables_ordered(&self, out: &mut Vec<String>) {
        for t in &self.args {
            if let Term::Var(v) = t {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
        }
    }

    pub fn constants(&self) -> impl Iterator<Item = &Constant> {
        self.args.iter().filter_map(Term::as_const)
    }

    /// One-way matching of `self` (a pattern) against `other`, extending `s`.
    /// Variables in `other` are treated as opaque symbols, so `other` should be ground.
    pub fn match_with(&self, other: &Atom, s: &Substitution) -> Option<Substitution> {
        if self.predicate != other.predicate || self.args.len() != other.args.len() {
            return None;
        }
        let mut out = s.clone();
        for (p, g) in self.args.iter().zip(&other.args) {
            match (p, g) {
                (Term::Const(a), Term::Const(b)) => {
                    if a != b {
                        return None;
                    }
                }
                (Term::Var(v), Term::Const(c)) => match out.get(v) {
                    Some(bound) if bound != c => return None,
                    Some(_) => {}
                    None => {
                        out.bind(v, c.clone());
                    }
                },
                (_, Term::Var(_)) => return None,
            }
        }
        Some(out)
    }

    /// Symmetric check used when both sides may hold variables: do the two atoms
    /// have a common instance? Variables of the two sides are kept apart.
    pub fn unifiable(&self, other: &Atom) -> bool {
        if self.predicate != other.predicate || self.args.len() != other.args.len() {
            return false;
        }
        let mut left: BTreeMap<&str, &Constant> = BTreeMap::new();
        let mut right: BTreeMap<&str, &Constant> = BTreeMap::new();
        // Variable-to-variable links are rare in practice; treat them as compatible.
        for (a, b) in self.args.iter().zip(&other.args) {
            match (a, b) {
                (Term::Const(x), Term::Const(y)) => {
                    if x != y {
                        return false;
                    }
                }
                (Term::Var(v), Term::Const(c)) => {
                    if let Some(prev) = left.insert(v, c) {
                        if prev != c {
                            return false;
                        }
                    }
                }
                (Term::Const(c), Term::Var(v)) => {
                    if let Some(prev) = right.insert(v, c) {
                        if prev != c {
                            return false;
                        }
                    }
                }
                (Term::Var(_), Term::Var(_)) => {}
            }
        }
        true
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                a.fmt(f)?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Variable bindings. Ordering is lexicographic over `(variable, constant)` pairs,
/// which gives evaluation results a deterministic order.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Substitution(BTreeMap<String, Constant>);

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, var: &str) -> Option<&Constant> {
        self.0.get(var)
    }

    pub fn bind(&mut self, var: &str, value: Constant) -> Option<Constant> {
        self.0.insert(var.to_string(), value)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Constant)> {
        self.0.iter()
    }

    pub fn contains(&self, var: &str) -> bool {
        self.0.contains_key(var)
    }

    /// Keeps only the listed variables.
    pub fn restrict<'a>(&self, vars: impl IntoIterator<Item = &'a String>) -> Substitution {
        let mut out = Substitution::new();
        for v in vars {
            if let Some(c) = self.0.get(v) {
                out.bind(v, c.clone());
            }
        }
        out
    }
}

impl FromIterator<(String, Constant)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (String, Constant)>>(iter: I) -> Self {
        Substitution(iter.into_iter().collect())
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}->{v}")?;
        }
        f.write_str("}")
    }
}
