use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::logic::{evaluate, to_dnf, Atom, BeliefBase, Constant, Formula, Substitution, Term};

use super::filter::Admissibility;
use super::model::ActionModel;

/// Positive and negative ground literals that must hold together.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Literals {
    pub pos: BTreeSet<Atom>,
    pub neg: BTreeSet<Atom>,
}

impl Literals {
    pub fn holds(&self, state: &BTreeSet<Atom>) -> bool {
        self.pos.iter().all(|a| state.contains(a)) && !self.neg.iter().any(|a| state.contains(a))
    }
}

/// A fully instantiated action. A disjunctive precondition yields several
/// alternatives; the action applies when any of them holds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundAction {
    pub name: Atom,
    pub alternatives: Vec<Literals>,
    pub add: BTreeSet<Atom>,
    pub delete: BTreeSet<Atom>,
}

impl GroundAction {
    pub fn applicable(&self, state: &BTreeSet<Atom>) -> bool {
        self.alternatives.iter().any(|l| l.holds(state))
    }

    /// Delete list first, then add list.
    pub fn apply(&self, state: &BTreeSet<Atom>) -> BTreeSet<Atom> {
        let mut next: BTreeSet<Atom> = state.difference(&self.delete).cloned().collect();
        next.extend(self.add.iter().cloned());
        next
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.name.fmt(f)
    }
}

/// Constants of the belief base, of the action models and of `extra`.
pub fn universe(b: &BeliefBase, kw: &[ActionModel], extra: &[Constant]) -> BTreeSet<Constant> {
    let mut u: BTreeSet<Constant> = b.iter().flat_map(|a| a.constants().cloned()).collect();
    for m in kw {
        u.extend(m.precondition.constants());
        for e in m.add.iter().chain(&m.delete) {
            u.extend(e.constants().cloned());
        }
    }
    u.extend(extra.iter().cloned());
    u
}

/// Relations no action changes.
pub fn static_relations(kw: &[ActionModel]) -> impl Fn(&Atom) -> bool {
    let touched: BTreeSet<(String, usize)> = kw.iter().flat_map(|m| m.touched()).collect();
    move |a: &Atom| !touched.contains(&a.key())
}

/// Instantiates every model over `universe`, keeping groundings whose static
/// literals and comparisons hold in `b`, whose fluent preconditions are reachable
/// under the delete relaxation, and which `adm` allows. Static literals are
/// checked here and left out of the resulting preconditions.
pub fn ground(
    kw: &[ActionModel],
    b: &BeliefBase,
    universe: &BTreeSet<Constant>,
    adm: &Admissibility,
) -> Vec<GroundAction> {
    let is_static = static_relations(kw);
    let universe: Vec<&Constant> = universe.iter().collect();
    let mut out: BTreeMap<Atom, GroundAction> = BTreeMap::new();

    for m in kw {
        let head = m.head();
        for clause in to_dnf(&m.precondition) {
            let static_pos: Vec<Formula> = clause
                .pos
                .iter()
                .filter(|a| is_static(a))
                .cloned()
                .map(Formula::Atom)
                .collect();
            for partial in evaluate(&Formula::conjunction(static_pos), b) {
                let free: Vec<&String> = m.params.iter().filter(|p| !partial.contains(p)).collect();
                for_each_assignment(&free, &universe, partial, &mut |s| {
                    let name = head.apply(s);
                    if !adm.is_admissible(&name) {
                        return;
                    }
                    let c = clause.apply(s);
                    if !c.cmps.iter().all(|(op, l, r)| match (l, r) {
                        (Term::Const(x), Term::Const(y)) => op.holds(x, y),
                        _ => false,
                    }) {
                        return;
                    }
                    let mut lits = Literals::default();
                    for a in c.pos {
                        if !is_static(&a) {
                            lits.pos.insert(a);
                        }
                    }
                    for a in c.neg {
                        if is_static(&a) {
                            if b.contains(&a) {
                                return;
                            }
                        } else {
                            lits.neg.insert(a);
                        }
                    }
                    if lits.pos.iter().any(|a| lits.neg.contains(a)) {
                        return;
                    }
                    let entry = out.entry(name.clone()).or_insert_with(|| GroundAction {
                        name,
                        alternatives: Vec::new(),
                        add: m.add.iter().map(|a| a.apply(s)).collect(),
                        delete: m.delete.iter().map(|a| a.apply(s)).collect(),
                    });
                    if !entry.alternatives.contains(&lits) {
                        entry.alternatives.push(lits);
                    }
                });
            }
        }
    }

    let mut reach: BTreeSet<Atom> = b.iter().cloned().collect();
    loop {
        let before = reach.len();
        for ga in out.values() {
            if ga.alternatives.iter().any(|l| l.pos.is_subset(&reach)) {
                reach.extend(ga.add.iter().cloned());
            }
        }
        if reach.len() == before {
            break;
        }
    }
    out.into_values()
        .filter_map(|mut ga| {
            ga.alternatives.retain(|l| l.pos.is_subset(&reach));
            (!ga.alternatives.is_empty()).then_some(ga)
        })
        .collect()
}

fn for_each_assignment(
    free: &[&String],
    universe: &[&Constant],
    s: Substitution,
    f: &mut dyn FnMut(&Substitution),
) {
    match free.split_first() {
        None => f(&s),
        Some((v, rest)) => {
            for c in universe {
                let mut s1 = s.clone();
                s1.bind(v, (*c).clone());
                for_each_assignment(rest, universe, s1, f);
            }
        }
    }
}
