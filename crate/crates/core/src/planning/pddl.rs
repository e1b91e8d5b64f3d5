//! Emission and parsing of the STRIPS subset of PDDL.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::logic::{normalize_identifier, to_dnf, Atom, BeliefBase, Constant, Formula, Term};

use super::filter::Admissibility;
use super::ground::GroundAction;
use super::model::ActionModel;
use super::PlanError;

/// A planning task in the shape PDDL files carry it.
#[derive(Clone, Debug, PartialEq)]
pub struct PddlTask {
    pub domain: String,
    pub problem: String,
    pub actions: Vec<ActionModel>,
    pub init: BTreeSet<Atom>,
    pub goal: Formula,
}

impl PddlTask {
    pub fn new(domain: &str, actions: Vec<ActionModel>, init: &BeliefBase, goal: Formula) -> Self {
        PddlTask {
            domain: normalize_identifier(domain),
            problem: format!("{}_problem", normalize_identifier(domain)),
            actions,
            init: init.atoms(),
            goal,
        }
    }

    /// Applies a cycle's admissibility: wholly forbidden actions are left out, and
    /// partly forbidden ones get an `allowed_<name>` guard listing the admissible
    /// groundings in the initial state.
    pub fn filtered(
        domain: &str,
        kw: &[ActionModel],
        adm: &Admissibility,
        grounded: &[GroundAction],
        init: &BeliefBase,
        goal: Formula,
    ) -> Self {
        let mut task = PddlTask::new(domain, Vec::new(), init, goal);
        for m in kw {
            if adm.forbids_all(m) {
                continue;
            }
            if !adm.restricts(m) {
                task.actions.push(m.clone());
                continue;
            }
            let guard = format!("allowed_{}", m.name);
            let mut guarded = m.clone();
            guarded.precondition = Formula::and(
                Formula::Atom(Atom::new(&guard, m.head().args)),
                m.precondition.clone(),
            );
            for ga in grounded.iter().filter(|g| g.name.predicate == m.name && g.name.arity() == m.params.len()) {
                task.init.insert(Atom::new(&guard, ga.name.args.clone()));
            }
            task.actions.push(guarded);
        }
        task
    }
}

fn strips_clause(f: &Formula, what: &str) -> Result<(Vec<Atom>, Vec<Atom>), PlanError> {
    let mut clauses = to_dnf(f);
    match clauses.len() {
        1 if clauses[0].cmps.is_empty() => {
            let c = clauses.remove(0);
            Ok((c.pos, c.neg))
        }
        1 => Err(PlanError::NonStrips(format!("{what}: comparisons cannot be emitted"))),
        0 => Err(PlanError::NonStrips(format!("{what}: condition is unsatisfiable"))),
        _ => Err(PlanError::NonStrips(format!("{what}: disjunctive condition cannot be emitted"))),
    }
}

fn term_text(t: &Term) -> String {
    match t {
        Term::Const(c) => c.name().to_string(),
        Term::Var(v) => format!("?{}", v.to_lowercase()),
    }
}

fn atom_text(a: &Atom) -> String {
    let mut s = format!("({}", a.predicate);
    for t in &a.args {
        s.push(' ');
        s.push_str(&term_text(t));
    }
    s.push(')');
    s
}

fn literals_text(pos: &[Atom], neg: &[Atom]) -> String {
    let mut parts: Vec<String> = pos.iter().map(atom_text).collect();
    parts.extend(neg.iter().map(|a| format!("(not {})", atom_text(a))));
    format!("(and{}{})", if parts.is_empty() { "" } else { " " }, parts.join(" "))
}

/// Renders domain and problem text. Output depends only on the task.
pub fn emit_pddl(task: &PddlTask) -> Result<(String, String), PlanError> {
    let mut preconds = Vec::new();
    let mut negative = false;
    let mut predicates: BTreeSet<(String, usize)> = BTreeSet::new();
    let mut constants: BTreeSet<Constant> = BTreeSet::new();
    for m in &task.actions {
        let (pos, neg) = strips_clause(&m.precondition, &format!("action {}", m.name))?;
        negative |= !neg.is_empty();
        for a in pos.iter().chain(&neg).chain(&m.add).chain(&m.delete) {
            predicates.insert(a.key());
            constants.extend(a.constants().cloned());
        }
        preconds.push((pos, neg));
    }
    let (goal_pos, goal_neg) = strips_clause(&task.goal, "goal")?;
    negative |= !goal_neg.is_empty();
    for a in task.init.iter().chain(&goal_pos).chain(&goal_neg) {
        predicates.insert(a.key());
    }

    let mut d = String::new();
    writeln!(d, "(define (domain {})", task.domain).unwrap();
    writeln!(
        d,
        "  (:requirements :strips{})",
        if negative { " :negative-preconditions" } else { "" }
    )
    .unwrap();
    if !constants.is_empty() {
        let cs: Vec<&str> = constants.iter().map(Constant::name).collect();
        writeln!(d, "  (:constants {})", cs.join(" ")).unwrap();
    }
    if !predicates.is_empty() {
        d.push_str("  (:predicates");
        for (p, n) in &predicates {
            d.push_str(" (");
            d.push_str(p);
            for i in 0..*n {
                write!(d, " ?a{i}").unwrap();
            }
            d.push(')');
        }
        d.push_str(")\n");
    }
    for (m, (pos, neg)) in task.actions.iter().zip(&preconds) {
        let params: Vec<String> = m.params.iter().map(|v| format!("?{}", v.to_lowercase())).collect();
        writeln!(d, "  (:action {}", m.name).unwrap();
        writeln!(d, "    :parameters ({})", params.join(" ")).unwrap();
        writeln!(d, "    :precondition {}", literals_text(pos, neg)).unwrap();
        writeln!(d, "    :effect {})", literals_text(&m.add, &m.delete)).unwrap();
    }
    d.push_str(")\n");

    let mut objects: BTreeSet<Constant> = BTreeSet::new();
    for a in task.init.iter().chain(&goal_pos).chain(&goal_neg) {
        objects.extend(a.constants().filter(|c| !constants.contains(*c)).cloned());
    }
    let mut p = String::new();
    writeln!(p, "(define (problem {})", task.problem).unwrap();
    writeln!(p, "  (:domain {})", task.domain).unwrap();
    if !objects.is_empty() {
        let os: Vec<&str> = objects.iter().map(Constant::name).collect();
        writeln!(p, "  (:objects {})", os.join(" ")).unwrap();
    }
    p.push_str("  (:init");
    for a in &task.init {
        p.push_str("\n    ");
        p.push_str(&atom_text(a));
    }
    p.push_str(")\n");
    writeln!(p, "  (:goal {}))", literals_text(&goal_pos, &goal_neg)).unwrap();
    Ok((d, p))
}

#[derive(Clone, Debug)]
enum Sexp {
    Sym(String, usize, usize),
    List(Vec<Sexp>, usize, usize),
}

impl Sexp {
    fn pos(&self) -> (usize, usize) {
        match self {
            Sexp::Sym(_, l, c) | Sexp::List(_, l, c) => (*l, *c),
        }
    }

    fn sym(&self) -> Option<&str> {
        match self {
            Sexp::Sym(s, ..) => Some(s),
            _ => None,
        }
    }

    fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(v, ..) => Some(v),
            _ => None,
        }
    }
}

fn err(at: (usize, usize), message: impl Into<String>) -> PlanError {
    PlanError::Pddl { line: at.0, col: at.1, message: message.into() }
}

fn read_sexp(text: &str) -> Result<Sexp, PlanError> {
    let mut stack: Vec<(Vec<Sexp>, usize, usize)> = Vec::new();
    let mut top: Option<Sexp> = None;
    let (mut line, mut col) = (1, 0);
    let mut chars = text.chars().peekable();
    while let Some(ch) = chars.next() {
        col += 1;
        let here = (line, col);
        match ch {
            '\n' => {
                line += 1;
                col = 0;
            }
            c if c.is_whitespace() => {}
            ';' => {
                while chars.peek().is_some_and(|c| *c != '\n') {
                    chars.next();
                }
            }
            '(' => {
                if top.is_some() {
                    return Err(err(here, "text after the closing parenthesis"));
                }
                stack.push((Vec::new(), line, col));
            }
            ')' => {
                let (items, l, c) = stack.pop().ok_or_else(|| err(here, "unbalanced `)`"))?;
                let node = Sexp::List(items, l, c);
                match stack.last_mut() {
                    Some(parent) => parent.0.push(node),
                    None => top = Some(node),
                }
            }
            _ => {
                let mut s = String::from(ch);
                while let Some(&n) = chars.peek() {
                    if n.is_whitespace() || n == '(' || n == ')' || n == ';' {
                        break;
                    }
                    s.push(n);
                    chars.next();
                    col += 1;
                }
                match stack.last_mut() {
                    Some(parent) => parent.0.push(Sexp::Sym(s.to_lowercase(), here.0, here.1)),
                    None => return Err(err(here, format!("unexpected `{s}` outside a list"))),
                }
            }
        }
    }
    if let Some((_, l, c)) = stack.last() {
        return Err(err((*l, *c), "unclosed `(`"));
    }
    top.ok_or_else(|| err((line, col), "empty input"))
}

fn parse_term(s: &Sexp) -> Result<Term, PlanError> {
    let name = s.sym().ok_or_else(|| err(s.pos(), "expected a term"))?;
    if let Some(v) = name.strip_prefix('?') {
        let mut cs = v.chars();
        let first = cs.next().ok_or_else(|| err(s.pos(), "empty variable name"))?;
        return Ok(Term::Var(first.to_uppercase().chain(cs).collect()));
    }
    if name.parse::<f64>().is_ok() {
        Ok(Term::Const(Constant::number(name)))
    } else {
        Ok(Term::constant(name))
    }
}

fn parse_atom_sexp(s: &Sexp) -> Result<Atom, PlanError> {
    let items = s.list().ok_or_else(|| err(s.pos(), "expected an atom"))?;
    let (head, args) = items.split_first().ok_or_else(|| err(s.pos(), "empty atom"))?;
    let pred = head.sym().ok_or_else(|| err(head.pos(), "expected a predicate name"))?;
    if matches!(pred, "and" | "or" | "not") {
        return Err(err(head.pos(), format!("expected an atom, found `{pred}`")));
    }
    Ok(Atom::new(pred, args.iter().map(parse_term).collect::<Result<_, _>>()?))
}

fn parse_condition(s: &Sexp) -> Result<Formula, PlanError> {
    let items = s.list().ok_or_else(|| err(s.pos(), "expected a condition"))?;
    match items.first().and_then(Sexp::sym) {
        Some("and") => Ok(Formula::conjunction(
            items[1..].iter().map(parse_condition).collect::<Result<Vec<_>, _>>()?,
        )),
        Some("or") => {
            let mut parts = items[1..].iter().map(parse_condition);
            let first = parts.next().ok_or_else(|| err(s.pos(), "empty `or`"))??;
            parts.try_fold(first, |acc, p| Ok(Formula::or(acc, p?)))
        }
        Some("not") if items.len() == 2 => Ok(Formula::not(parse_condition(&items[1])?)),
        Some("not") => Err(err(s.pos(), "`not` takes one argument")),
        _ => Ok(Formula::Atom(parse_atom_sexp(s)?)),
    }
}

fn parse_effect(s: &Sexp, add: &mut Vec<Atom>, del: &mut Vec<Atom>) -> Result<(), PlanError> {
    let items = s.list().ok_or_else(|| err(s.pos(), "expected an effect"))?;
    match items.first().and_then(Sexp::sym) {
        Some("and") => items[1..].iter().try_for_each(|e| parse_effect(e, add, del)),
        Some("not") if items.len() == 2 => {
            del.push(parse_atom_sexp(&items[1])?);
            Ok(())
        }
        _ => {
            add.push(parse_atom_sexp(s)?);
            Ok(())
        }
    }
}

fn expect_define<'a>(s: &'a Sexp, kind: &str) -> Result<(&'a [Sexp], String), PlanError> {
    let items = s.list().ok_or_else(|| err(s.pos(), "expected `(define ...)`"))?;
    if items.first().and_then(Sexp::sym) != Some("define") {
        return Err(err(s.pos(), "expected `(define ...)`"));
    }
    let name = items
        .get(1)
        .and_then(Sexp::list)
        .filter(|l| l.len() == 2 && l[0].sym() == Some(kind))
        .and_then(|l| l[1].sym())
        .ok_or_else(|| err(s.pos(), format!("expected `({kind} <name>)`")))?;
    Ok((&items[2..], name.to_string()))
}

fn parse_action(items: &[Sexp], at: (usize, usize)) -> Result<ActionModel, PlanError> {
    let name = items
        .get(1)
        .and_then(Sexp::sym)
        .ok_or_else(|| err(at, "expected an action name"))?;
    let mut params = Vec::new();
    let mut pre = Formula::True;
    let (mut add, mut del) = (Vec::new(), Vec::new());
    let mut rest = items[2..].iter();
    while let Some(key) = rest.next() {
        let k = key.sym().ok_or_else(|| err(key.pos(), "expected a keyword"))?;
        let val = rest.next().ok_or_else(|| err(key.pos(), format!("missing value for `{k}`")))?;
        match k {
            ":parameters" => {
                let ps = val.list().ok_or_else(|| err(val.pos(), "expected a parameter list"))?;
                params = ps.iter().map(parse_term).collect::<Result<_, _>>()?;
            }
            ":precondition" => pre = parse_condition(val)?,
            ":effect" => parse_effect(val, &mut add, &mut del)?,
            other => return Err(err(key.pos(), format!("unsupported action field `{other}`"))),
        }
    }
    ActionModel::new(Atom::new(name, params), pre, add, del)
}

/// Parses domain and problem text back into a task.
pub fn parse_pddl(domain: &str, problem: &str) -> Result<PddlTask, PlanError> {
    let dom = read_sexp(domain)?;
    let (sections, domain_name) = expect_define(&dom, "domain")?;
    let mut actions = Vec::new();
    for sec in sections {
        let items = sec.list().ok_or_else(|| err(sec.pos(), "expected a section"))?;
        match items.first().and_then(Sexp::sym) {
            Some(":requirements" | ":constants" | ":predicates") => {}
            Some(":action") => actions.push(parse_action(items, sec.pos())?),
            Some(other) => return Err(err(sec.pos(), format!("unsupported domain section `{other}`"))),
            None => return Err(err(sec.pos(), "expected a section keyword")),
        }
    }

    let prob = read_sexp(problem)?;
    let (sections, problem_name) = expect_define(&prob, "problem")?;
    let mut init = BTreeSet::new();
    let mut goal = None;
    for sec in sections {
        let items = sec.list().ok_or_else(|| err(sec.pos(), "expected a section"))?;
        match items.first().and_then(Sexp::sym) {
            Some(":domain") => {
                if items.get(1).and_then(Sexp::sym) != Some(domain_name.as_str()) {
                    return Err(err(sec.pos(), "problem refers to a different domain"));
                }
            }
            Some(":objects") => {}
            Some(":init") => {
                for a in &items[1..] {
                    let atom = parse_atom_sexp(a)?;
                    if !atom.is_ground() {
                        return Err(err(a.pos(), "initial facts must be ground"));
                    }
                    init.insert(atom);
                }
            }
            Some(":goal") => {
                let g = items.get(1).ok_or_else(|| err(sec.pos(), "empty goal"))?;
                goal = Some(parse_condition(g)?);
            }
            Some(other) => return Err(err(sec.pos(), format!("unsupported problem section `{other}`"))),
            None => return Err(err(sec.pos(), "expected a section keyword")),
        }
    }
    Ok(PddlTask {
        domain: domain_name,
        problem: problem_name,
        actions,
        init,
        goal: goal.ok_or_else(|| err(prob.pos(), "missing `:goal`"))?,
    })
}
