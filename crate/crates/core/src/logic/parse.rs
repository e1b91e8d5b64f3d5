//! Recursive-descent parser for the rule condition language.
//!
//! ```text
//! formula := disj ; disj := conj { "|" conj } ; conj := unary { "&" unary } ;
//! unary   := "not" unary | "(" formula ")" | atom | compare ;
//! atom    := IDENT [ "(" term { "," term } ")" ] ;
//! compare := term OP term ;   OP in == != < <= > >=
//! term    := VARIABLE | IDENT | NUMBER
//! ```
//!
//! Identifiers starting with an uppercase letter or `_` are variables.

use super::formula::{CmpOp, Formula};
use super::term::{Atom, Constant, Term};
use super::LogicError;

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Var(String),
    Number(String),
    LParen,
    RParen,
    Comma,
    Amp,
    Pipe,
    Op(CmpOp),
    Eof,
}

#[derive(Clone, Debug)]
pub(crate) struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '+' || c == '-'
}

fn lex(text: &str) -> Result<Vec<Spanned>, LogicError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (sl, sc) = (line, col);
        let mut push = |tok: Tok| out.push(Spanned { tok, line: sl, col: sc });
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            '&' => Some(Tok::Amp),
            '|' => Some(Tok::Pipe),
            _ => None,
        };
        if let Some(t) = single {
            push(t);
            i += 1;
            col += 1;
            continue;
        }
        let op = match two.as_str() {
            "==" => Some((CmpOp::Eq, 2)),
            "!=" => Some((CmpOp::Ne, 2)),
            "<=" => Some((CmpOp::Le, 2)),
            ">=" => Some((CmpOp::Ge, 2)),
            _ => match c {
                '<' => Some((CmpOp::Lt, 1)),
                '>' => Some((CmpOp::Gt, 1)),
                _ => None,
            },
        };
        if let Some((op, n)) = op {
            push(Tok::Op(op));
            i += n;
            col += n;
            continue;
        }
        let starts_number = c.is_ascii_digit()
            || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()));
        if starts_number {
            let start = i;
            i += 1;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && is_ident_continue(chars[i]) && chars[start] != '-' {
                // digit-led symbol such as `2nd`
                while i < chars.len() && is_ident_continue(chars[i]) {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                push(Tok::Ident(s));
            } else {
                let s: String = chars[start..i].iter().collect();
                if s.parse::<f64>().is_err() {
                    return Err(LogicError::syntax(sl, sc, format!("malformed number `{s}`")));
                }
                push(Tok::Number(s));
            }
            col += i - start;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && is_ident_continue(chars[i]) {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            if c.is_ascii_uppercase() || c == '_' {
                push(Tok::Var(s));
            } else {
                push(Tok::Ident(s));
            }
            col += i - start;
            continue;
        }
        return Err(LogicError::syntax(line, col, format!("unexpected character `{c}`")));
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

pub(crate) struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    pub(crate) fn new(text: &str) -> Result<Self, LogicError> {
        Ok(Parser { toks: lex(text)?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn error(&self, msg: impl Into<String>) -> LogicError {
        let s = &self.toks[self.pos];
        LogicError::syntax(s.line, s.col, msg.into())
    }

    pub(crate) fn expect(&mut self, tok: Tok, what: &str) -> Result<(), LogicError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected {what}, found {}", describe(self.peek()))))
        }
    }

    pub(crate) fn finish(&self) -> Result<(), LogicError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.error(format!("unexpected {}", describe(self.peek()))))
        }
    }

    pub(crate) fn ident(&mut self, what: &str) -> Result<String, LogicError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => Err(self.error(format!("expected {what}, found {}", describe(&other)))),
        }
    }

    pub(crate) fn formula(&mut self) -> Result<Formula, LogicError> {
        let mut left = self.conj()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            let right = self.conj()?;
            left = Formula::or(left, right);
        }
        Ok(left)
    }

    fn conj(&mut self) -> Result<Formula, LogicError> {
        let mut left = self.unary()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let right = self.unary()?;
            left = Formula::and(left, right);
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Formula, LogicError> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "not" => {
                self.bump();
                Ok(Formula::not(self.unary()?))
            }
            Tok::Ident(s) if s == "true" && !matches!(self.peek_at(1), Tok::LParen | Tok::Op(_)) => {
                self.bump();
                Ok(Formula::True)
            }
            Tok::LParen => {
                self.bump();
                let f = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::Ident(_) => {
                if let Tok::Op(_) = self.peek_at(1) {
                    self.compare()
                } else {
                    Ok(Formula::Atom(self.atom()?))
                }
            }
            Tok::Var(_) | Tok::Number(_) => self.compare(),
            other => Err(self.error(format!("expected a condition, found {}", describe(&other)))),
        }
    }

    fn compare(&mut self) -> Result<Formula, LogicError> {
        let l = self.term()?;
        let op = match self.bump() {
            Tok::Op(op) => op,
            other => {
                self.pos -= 1;
                return Err(self.error(format!(
                    "expected a comparison operator, found {}",
                    describe(&other)
                )));
            }
        };
        let r = self.term()?;
        Ok(Formula::Compare(op, l, r))
    }

    pub(crate) fn atom(&mut self) -> Result<Atom, LogicError> {
        let name = self.ident("a predicate name")?;
        let mut args = Vec::new();
        if *self.peek() == Tok::LParen {
            self.bump();
            args.push(self.term()?);
            while *self.peek() == Tok::Comma {
                self.bump();
                args.push(self.term()?);
            }
            self.expect(Tok::RParen, "`)` or `,`")?;
        }
        Ok(Atom::new(&name, args))
    }

    pub(crate) fn term(&mut self) -> Result<Term, LogicError> {
        match self.peek().clone() {
            Tok::Var(v) => {
                self.bump();
                Ok(Term::Var(v))
            }
            Tok::Ident(s) => {
                self.bump();
                Ok(Term::Const(Constant::symbol(&s)))
            }
            Tok::Number(n) => {
                self.bump();
                Ok(Term::Const(Constant::number(&n)))
            }
            other => Err(self.error(format!("expected a term, found {}", describe(&other)))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Var(s) => format!("variable `{s}`"),
        Tok::Number(s) => format!("number `{s}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Amp => "`&`".into(),
        Tok::Pipe => "`|`".into(),
        Tok::Op(op) => format!("`{}`", op.symbol()),
        Tok::Eof => "end of input".into(),
    }
}

/// Parses a condition and checks range restriction.
pub fn parse_formula(text: &str) -> Result<Formula, LogicError> {
    let mut p = Parser::new(text)?;
    let f = p.formula()?;
    p.finish()?;
    f.check_range_restricted()?;
    Ok(f)
}

/// Parses a single atom, possibly with variables.
pub fn parse_atom(text: &str) -> Result<Atom, LogicError> {
    let mut p = Parser::new(text)?;
    let a = p.atom()?;
    p.finish()?;
    Ok(a)
}

/// Parses a ground atom; variables are rejected.
pub fn parse_ground_atom(text: &str) -> Result<Atom, LogicError> {
    let a = parse_atom(text)?;
    if !a.is_ground() {
        return Err(LogicError::NonGround(a.to_string()));
    }
    Ok(a)
}
