use super::belief::BeliefBase;
use super::formula::Formula;
use super::term::{Substitution, Term};

/// Every substitution under which `f` holds in `b`, sorted and deduplicated.
/// Negation is negation-as-failure on the grounded subformula.
pub fn evaluate(f: &Formula, b: &BeliefBase) -> Vec<Substitution> {
    evaluate_from(f, b, &Substitution::new())
}

/// Like [`evaluate`], starting from existing bindings.
pub fn evaluate_from(f: &Formula, b: &BeliefBase, seed: &Substitution) -> Vec<Substitution> {
    let mut out = eval(f, b, seed);
    out.sort();
    out.dedup();
    out
}

/// Whether `f` has at least one satisfying substitution.
pub fn holds(f: &Formula, b: &BeliefBase, seed: &Substitution) -> bool {
    !eval(f, b, seed).is_empty()
}

fn eval(f: &Formula, b: &BeliefBase, s: &Substitution) -> Vec<Substitution> {
    match f {
        Formula::True => vec![s.clone()],
        Formula::Atom(a) => {
            let pattern = a.apply(s);
            if pattern.is_ground() {
                return if b.contains(&pattern) {
                    vec![s.clone()]
                } else {
                    vec![]
                };
            }
            b.relation(&pattern.predicate, pattern.arity())
                .filter_map(|g| pattern.match_with(g, s))
                .collect()
        }
        Formula::And(..) => {
            let parts = f.conjuncts();
            eval_conj(&parts, b, s)
        }
        Formula::Or(l, r) => {
            let mut out = eval(l, b, s);
            out.extend(eval(r, b, s));
            out
        }
        Formula::Not(g) => {
            if eval(g, b, s).is_empty() {
                vec![s.clone()]
            } else {
                vec![]
            }
        }
        Formula::Compare(op, l, r) => match (l.apply(s), r.apply(s)) {
            (Term::Const(x), Term::Const(y)) if op.holds(&x, &y) => vec![s.clone()],
            _ => vec![],
        },
    }
}

fn ready(f: &Formula, s: &Substitution) -> bool {
    match f {
        Formula::Not(_) | Formula::Compare(..) => f.variables().iter().all(|v| s.contains(v)),
        _ => true,
    }
}

/// Evaluates conjuncts left to right, deferring negations and comparisons until
/// their variables are bound.
fn eval_conj(parts: &[&Formula], b: &BeliefBase, s: &Substitution) -> Vec<Substitution> {
    if parts.is_empty() {
        return vec![s.clone()];
    }
    let idx = parts.iter().position(|p| ready(p, s)).unwrap_or(0);
    let mut rest: Vec<&Formula> = Vec::with_capacity(parts.len() - 1);
    rest.extend_from_slice(&parts[..idx]);
    rest.extend_from_slice(&parts[idx + 1..]);
    let mut out = Vec::new();
    for s1 in eval(parts[idx], b, s) {
        out.extend(eval_conj(&rest, b, &s1));
    }
    out
}
