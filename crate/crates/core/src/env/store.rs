use std::collections::BTreeSet;

use serde::Serialize;

use crate::logic::{Atom, Term};

/// `(subject, predicate, object)`; unary atoms use the predicate `type`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl Triple {
    pub fn new(s: &str, p: &str, o: &str) -> Self {
        Triple { subject: s.into(), predicate: p.into(), object: o.into() }
    }
}

const TYPE: &str = "type";

/// `p(a, b)` to `(a, p, b)` and `p(a)` to `(a, type, p)`. Other arities and
/// non-ground atoms have no triple form.
pub fn atom_to_triple(a: &Atom) -> Option<Triple> {
    let name = |t: &Term| t.as_const().map(|c| c.name().to_string());
    match a.args.as_slice() {
        [s] => Some(Triple { subject: name(s)?, predicate: TYPE.into(), object: a.predicate.clone() }),
        [s, o] => Some(Triple { subject: name(s)?, predicate: a.predicate.clone(), object: name(o)? }),
        _ => None,
    }
}

pub fn triple_to_atom(t: &Triple) -> Atom {
    if t.predicate == TYPE {
        Atom::ground(&t.object, &[&t.subject])
    } else {
        Atom::ground(&t.predicate, &[&t.subject, &t.object])
    }
}

/// Triple-shaped mirror of the home context.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ContextStore {
    triples: BTreeSet<Triple>,
}

impl ContextStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_atoms<'a>(atoms: impl IntoIterator<Item = &'a Atom>) -> Self {
        let mut s = Self::new();
        for a in atoms {
            s.assert_atom(a);
        }
        s
    }

    /// Returns false when the atom has no triple form or was already present.
    pub fn assert_atom(&mut self, a: &Atom) -> bool {
        atom_to_triple(a).is_some_and(|t| self.triples.insert(t))
    }

    pub fn retract_atom(&mut self, a: &Atom) -> bool {
        atom_to_triple(a).is_some_and(|t| self.triples.remove(&t))
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &BTreeSet<Triple> {
        &self.triples
    }

    /// Triples matching the pattern; `None` matches anything. Sorted.
    pub fn query(&self, s: Option<&str>, p: Option<&str>, o: Option<&str>) -> Vec<Triple> {
        let ok = |want: Option<&str>, have: &str| want.is_none_or(|w| w == have);
        self.triples
            .iter()
            .filter(|t| ok(s, &t.subject) && ok(p, &t.predicate) && ok(o, &t.object))
            .cloned()
            .collect()
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        self.triples.iter().map(triple_to_atom).collect()
    }
}
