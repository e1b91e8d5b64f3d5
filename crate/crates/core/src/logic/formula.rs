use std::collections::BTreeSet;
use std::fmt;

use super::term::{Atom, Constant, Substitution, Term};
use super::LogicError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
        }
    }

    pub fn is_ordering(self) -> bool {
        !matches!(self, CmpOp::Eq | CmpOp::Ne)
    }

    /// Compares two constants. Numeric when both carry a number, by name
    /// otherwise; ordering on non-numeric constants never holds.
    pub fn holds(self, left: &Constant, right: &Constant) -> bool {
        match (left.numeric(), right.numeric()) {
            (Some(a), Some(b)) => match self {
                CmpOp::Eq => a == b,
                CmpOp::Ne => a != b,
                CmpOp::Lt => a < b,
                CmpOp::Le => a <= b,
                CmpOp::Gt => a > b,
                CmpOp::Ge => a >= b,
            },
            _ => match self {
                CmpOp::Eq => left == right,
                CmpOp::Ne => left != right,
                _ => false,
            },
        }
    }
}

/// First-order condition over the belief base.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    Atom(Atom),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Compare(CmpOp, Term, Term),
}

impl Formula {
    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Formula) -> Formula {
        Formula::Not(Box::new(a))
    }

    /// Left-nested conjunction; `True` for an empty list.
    pub fn conjunction(parts: impl IntoIterator<Item = Formula>) -> Formula {
        parts
            .into_iter()
            .reduce(Formula::and)
            .unwrap_or(Formula::True)
    }

    pub fn apply(&self, s: &Substitution) -> Formula {
        match self {
            Formula::True => Formula::True,
            Formula::Atom(a) => Formula::Atom(a.apply(s)),
            Formula::Not(g) => Formula::not(g.apply(s)),
            Formula::And(a, b) => Formula::and(a.apply(s), b.apply(s)),
            Formula::Or(a, b) => Formula::or(a.apply(s), b.apply(s)),
            Formula::Compare(op, l, r) => Formula::Compare(*op, l.apply(s), r.apply(s)),
        }
    }

    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = Vec::new();
        self.variables_ordered(&mut out);
        out.into_iter().collect()
    }

    pub fn variables_ordered(&self, out: &mut Vec<String>) {
        match self {
            Formula::True => {}
            Formula::Atom(a) => a.variables_ordered(out),
            Formula::Not(g) => g.variables_ordered(out),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.variables_ordered(out);
                b.variables_ordered(out);
            }
            Formula::Compare(_, l, r) => {
                for t in [l, r] {
                    if let Term::Var(v) = t {
                        if !out.contains(v) {
                            out.push(v.clone());
                        }
                    }
                }
            }
        }
    }

    /// Variables bound by every successful evaluation: atoms bind theirs,
    /// conjunctions union, disjunctions intersect, negations and comparisons bind nothing.
    pub fn positive_variables(&self) -> BTreeSet<String> {
        match self {
            Formula::True | Formula::Not(_) | Formula::Compare(..) => BTreeSet::new(),
            Formula::Atom(a) => a.variables(),
            Formula::And(a, b) => {
                let mut s = a.positive_variables();
                s.extend(b.positive_variables());
                s
            }
            Formula::Or(a, b) => {
                let l = a.positive_variables();
                let r = b.positive_variables();
                l.intersection(&r).cloned().collect()
            }
        }
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            Formula::True | Formula::Compare(..) => {}
            Formula::Atom(a) => out.push(a),
            Formula::Not(g) => g.collect_atoms(out),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    pub fn constants(&self) -> BTreeSet<Constant> {
        let mut out = BTreeSet::new();
        for a in self.atoms() {
            out.extend(a.constants().cloned());
        }
        self.collect_compare_constants(&mut out);
        out
    }

    fn collect_compare_constants(&self, out: &mut BTreeSet<Constant>) {
        match self {
            Formula::Compare(_, l, r) => {
                for t in [l, r] {
                    if let Term::Const(c) = t {
                        out.insert(c.clone());
                    }
                }
            }
            Formula::Not(g) => g.collect_compare_constants(out),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.collect_compare_constants(out);
                b.collect_compare_constants(out);
            }
            _ => {}
        }
    }

    /// Flattens nested `And` nodes into a conjunct list.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        let mut out = Vec::new();
        fn walk<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
            match f {
                Formula::And(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                _ => out.push(f),
            }
        }
        walk(self, &mut out);
        out
    }

    /// Every variable under `not` or in a comparison must occur in a positive
    /// atom of the enclosing conjunction.
    pub fn check_range_restricted(&self) -> Result<(), LogicError> {
        self.check_range(&BTreeSet::new())
    }

    fn check_range(&self, bound: &BTreeSet<String>) -> Result<(), LogicError> {
        match self {
            Formula::True | Formula::Atom(_) => Ok(()),
            Formula::And(..) => {
                let parts = self.conjuncts();
                let mut inner = bound.clone();
                for p in &parts {
                    inner.extend(p.positive_variables());
                }
                parts.iter().try_for_each(|p| p.check_range(&inner))
            }
            Formula::Or(a, b) => {
                a.check_range(bound)?;
                b.check_range(bound)
            }
            Formula::Not(g) => {
                if let Some(v) = g.variables().into_iter().find(|v| !bound.contains(v)) {
                    return Err(LogicError::RangeRestriction(v));
                }
                g.check_range(bound)
            }
            Formula::Compare(op, l, r) => {
                for t in [l, r] {
                    if let Term::Var(v) = t {
                        if !bound.contains(v) {
                            return Err(LogicError::RangeRestriction(v.clone()));
                        }
                    }
                }
                if op.is_ordering() {
                    if let (Term::Const(a), Term::Const(b)) = (l, r) {
                        if a.numeric().is_none() || b.numeric().is_none() {
                            return Err(LogicError::NonNumericOrdering(format!("{self}")));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Or(..) => 1,
            Formula::And(..) => 2,
            _ => 3,
        }
    }

    fn write_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.precedence() < min;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Formula::True => f.write_str("true")?,
            Formula::Atom(a) => write!(f, "{a}")?,
            Formula::Not(g) => {
                f.write_str("not ")?;
                g.write_prec(f, 3)?;
            }
            Formula::And(a, b) => {
                a.write_prec(f, 2)?;
                f.write_str(" & ")?;
                b.write_prec(f, 3)?;
            }
            Formula::Or(a, b) => {
                a.write_prec(f, 1)?;
                f.write_str(" | ")?;
                b.write_prec(f, 2)?;
            }
            Formula::Compare(op, l, r) => write!(f, "{l} {} {r}", op.symbol())?,
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prec(f, 1)
    }
}

/// One disjunct of a formula in disjunctive normal form.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Clause {
    pub pos: Vec<Atom>,
    pub neg: Vec<Atom>,
    pub cmps: Vec<(CmpOp, Term, Term)>,
}

impl Clause {
    fn merge(&self, other: &Clause) -> Clause {
        let mut out = self.clone();
        out.pos.extend(other.pos.iter().cloned());
        out.neg.extend(other.neg.iter().cloned());
        out.cmps.extend(other.cmps.iter().cloned());
        out
    }

    pub fn is_strips(&self) -> bool {
        self.cmps.is_empty()
    }

    pub fn apply(&self, s: &Substitution) -> Clause {
        Clause {
            pos: self.pos.iter().map(|a| a.apply(s)).collect(),
            neg: self.neg.iter().map(|a| a.apply(s)).collect(),
            cmps: self
                .cmps
                .iter()
                .map(|(op, l, r)| (*op, l.apply(s), r.apply(s)))
                .collect(),
        }
    }

    /// Back to a conjunction: positive atoms, then negations, then comparisons.
    pub fn to_formula(&self) -> Formula {
        Formula::conjunction(
            self.pos
                .iter()
                .cloned()
                .map(Formula::Atom)
                .chain(self.neg.iter().cloned().map(|a| Formula::not(Formula::Atom(a))))
                .chain(
                    self.cmps
                        .iter()
                        .map(|(op, l, r)| Formula::Compare(*op, l.clone(), r.clone())),
                ),
        )
    }
}

/// Disjunctive normal form. An empty result means the formula is unsatisfiable;
/// a single empty clause means it is trivially true.
pub fn to_dnf(f: &Formula) -> Vec<Clause> {
    dnf(f, false)
}

fn dnf(f: &Formula, negated: bool) -> Vec<Clause> {
    match f {
        Formula::True => {
            if negated {
                vec![]
            } else {
                vec![Clause::default()]
            }
        }
        Formula::Atom(a) => {
            let mut c = Clause::default();
            if negated {
                c.neg.push(a.clone());
            } else {
                c.pos.push(a.clone());
            }
            vec![c]
        }
        Formula::Compare(op, l, r) => {
            let op = if negated { op.negate() } else { *op };
            vec![Clause {
                cmps: vec![(op, l.clone(), r.clone())],
                ..Clause::default()
            }]
        }
        Formula::Not(g) => dnf(g, !negated),
        Formula::And(a, b) | Formula::Or(a, b) => {
            let conj = matches!(f, Formula::And(..)) != negated;
            let left = dnf(a, negated);
            let right = dnf(b, negated);
            if conj {
                let mut out = Vec::with_capacity(left.len() * right.len());
                for l in &left {
                    for r in &right {
                        out.push(l.merge(r));
                    }
                }
                out
            } else {
                let mut out = left;
                out.extend(right);
                out
            }
        }
    }
}
