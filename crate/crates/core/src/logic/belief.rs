use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::term::Atom;
use super::LogicError;

/// Set of ground atoms describing the sensed context, indexed by relation.
///
/// `revision` increases on every change of membership and never otherwise.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BeliefBase {
    relations: BTreeMap<(String, usize), BTreeSet<Atom>>,
    len: usize,
    revision: u64,
}

impl BeliefBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_atoms(atoms: impl IntoIterator<Item = Atom>) -> Result<Self, LogicError> {
        let mut b = BeliefBase::new();
        for a in atoms {
            b.assert_belief(a)?;
        }
        Ok(b)
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Adds a ground atom. Returns whether the set changed.
    pub fn assert_belief(&mut self, atom: Atom) -> Result<bool, LogicError> {
        if !atom.is_ground() {
            return Err(LogicError::NonGround(atom.to_string()));
        }
        let inserted = self.relations.entry(atom.key()).or_default().insert(atom);
        if inserted {
            self.len += 1;
            self.revision += 1;
        }
        Ok(inserted)
    }

    /// Removes a ground atom. Returns whether the set changed.
    pub fn retract_belief(&mut self, atom: &Atom) -> Result<bool, LogicError> {
        if !atom.is_ground() {
            return Err(LogicError::NonGround(atom.to_string()));
        }
        let key = atom.key();
        let removed = match self.relations.get_mut(&key) {
            Some(set) => {
                let r = set.remove(atom);
                if set.is_empty() {
                    self.relations.remove(&key);
                }
                r
            }
            None => false,
        };
        if removed {
            self.len -= 1;
            self.revision += 1;
        }
        Ok(removed)
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.relations
            .get(&(atom.predicate.clone(), atom.args.len()))
            .is_some_and(|s| s.contains(atom))
    }

    /// All beliefs of relation `predicate/arity`, in order.
    pub fn relation(&self, predicate: &str, arity: usize) -> impl Iterator<Item = &Atom> {
        self.relations
            .get(&(predicate.to_string(), arity))
            .into_iter()
            .flat_map(|s| s.iter())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.relations.values().flat_map(|s| s.iter())
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        self.iter().cloned().collect()
    }

    pub fn strings(&self) -> Vec<String> {
        self.iter().map(|a| a.to_string()).collect()
    }
}

impl fmt::Display for BeliefBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, a) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("}")
    }
}
