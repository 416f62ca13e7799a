//! Concrete syntax.
//!
//! ```text
//! formula   := quantblock* "." body          ("." optional without quantifiers)
//! quantblock:= ("forall"|"exists") IDENT+ ["distinct"] ["in" "E" "(" IDENT ")"]
//! expr      := or ["->" expr]                 (right-associative)
//! or        := and ("|" and)*
//! and       := until ("&" until)*
//! until     := unary ["U" until]              (right-associative)
//! unary     := ("!"|"A"|"E"|"F"|"G") unary | "(" expr ")" | "true" | "false" | atom
//! atom      := IDENT "@" IDENT | IDENT "=" IDENT
//! ```
//!
//! Keywords are only keywords when not directly followed by `@` or `=`, so a
//! proposition may be named `E` or `G`. Closed formulas accept bare `IDENT`
//! atoms and read `name@pos` as a single atom.

use std::collections::HashSet;

use super::ast::{Expr, Formula, IndexedAtom, QuantKind, Quantifier};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Bang,
    Amp,
    Pipe,
    Arrow,
    LParen,
    RParen,
    At,
    Equals,
    Dot,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '!' => Tok::Bang,
            '&' => Tok::Amp,
            '|' => Tok::Pipe,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '@' => Tok::At,
            '=' => Tok::Equals,
            '.' => Tok::Dot,
            '-' if bytes.get(i + 1) == Some(&b'>') => {
                i += 1;
                Tok::Arrow
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
                while i + 1 < bytes.len()
                    && ((bytes[i + 1] as char).is_ascii_alphanumeric() || bytes[i + 1] == b'_')
                {
                    i += 1;
                }
                Tok::Ident(text[start..=i].to_string())
            }
            other => {
                return Err(Error::Syntax {
                    pos: start,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        };
        out.push((start, tok));
        i += 1;
    }
    Ok(out)
}

/// Words that cannot name index variables.
const RESERVED: [&str; 12] = [
    "forall", "exists", "distinct", "in", "true", "false", "A", "E", "F", "G", "U", "X",
];

/// Atom as written, before it is interpreted as indexed or closed.
#[derive(Clone, Debug)]
enum RawAtom {
    Named { name: String, at: Option<String>, pos: usize },
    Eq(String, String, usize),
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Self> {
        Ok(Parser {
            toks: lex(text)?,
            at: 0,
            end: text.len(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.at + 1).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |(p, _)| *p)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|(_, t)| t.clone());
        self.at += 1;
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok, what: &str) -> Result<()> {
        if self.eat(t) {
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.at += 1;
                Ok(s)
            }
            _ => self.err(format!("expected {what}")),
        }
    }

    /// The keyword at the cursor, if the identifier there is used as one.
    fn keyword(&self) -> Option<&str> {
        match (self.peek(), self.peek2()) {
            (Some(Tok::Ident(_)), Some(Tok::At | Tok::Equals)) => None,
            (Some(Tok::Ident(s)), _) => Some(s.as_str()),
            _ => None,
        }
    }

    fn at_end(&self) -> bool {
        self.at >= self.toks.len()
    }

    fn prefix(&mut self) -> Result<Vec<Quantifier>> {
        let mut prefix = Vec::new();
        while let Some(kw @ ("forall" | "exists")) = self.keyword() {
            let kind = if kw == "forall" {
                QuantKind::Forall
            } else {
                QuantKind::Exists
            };
            self.at += 1;
            if self.keyword().is_some_and(|kw| RESERVED.contains(&kw)) {
                return self.err("expected a variable name");
            }
            let mut vars = vec![self.ident("a variable name")?];
            let mut distinct = false;
            let mut in_edges_of = None;
            loop {
                match self.keyword() {
                    Some("distinct") if !distinct && in_edges_of.is_none() => {
                        self.at += 1;
                        distinct = true;
                    }
                    Some("in") if in_edges_of.is_none() => {
                        self.at += 1;
                        if self.keyword() != Some("E") {
                            return self.err("expected `E(` after `in`");
                        }
                        self.at += 1;
                        self.expect(&Tok::LParen, "`(`")?;
                        in_edges_of = Some(self.ident("a variable name")?);
                        self.expect(&Tok::RParen, "`)`")?;
                    }
                    Some(kw) if RESERVED.contains(&kw) => break,
                    None => break,
                    Some(_) if !distinct && in_edges_of.is_none() => {
                        vars.push(self.ident("a variable name")?);
                    }
                    Some(_) => break,
                }
            }
            for var in vars {
                prefix.push(Quantifier {
                    kind,
                    var,
                    distinct,
                    in_edges_of: in_edges_of.clone(),
                });
            }
        }
        Ok(prefix)
    }

    fn expr(&mut self) -> Result<Expr<RawAtom>> {
        let lhs = self.or()?;
        if self.eat(&Tok::Arrow) {
            let rhs = self.expr()?;
            return Ok(Expr::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Expr<RawAtom>> {
        let mut lhs = self.and()?;
        while self.eat(&Tok::Pipe) {
            let rhs = self.and()?;
            lhs = Expr::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr<RawAtom>> {
        let mut lhs = self.until()?;
        while self.eat(&Tok::Amp) {
            let rhs = self.until()?;
            lhs = Expr::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Expr<RawAtom>> {
        let lhs = self.unary()?;
        if self.keyword() == Some("U") {
            self.at += 1;
            let rhs = self.until()?;
            return Ok(Expr::until(lhs, rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr<RawAtom>> {
        if self.eat(&Tok::Bang) {
            return Ok(Expr::not(self.unary()?));
        }
        if self.eat(&Tok::LParen) {
            let e = self.expr()?;
            self.expect(&Tok::RParen, "`)`")?;
            return Ok(e);
        }
        let ctor: Option<fn(Expr<RawAtom>) -> Expr<RawAtom>> = match self.keyword() {
            Some("A") => Some(Expr::all_paths),
            Some("E") => Some(Expr::some_path),
            Some("F") => Some(Expr::eventually),
            Some("G") => Some(Expr::always),
            Some("true") => {
                self.at += 1;
                return Ok(Expr::True);
            }
            Some("false") => {
                self.at += 1;
                return Ok(Expr::False);
            }
            Some("X") => {
                return Err(Error::Semantic(format!(
                    "the next-time operator X at offset {} is not supported",
                    self.pos()
                )))
            }
            Some("forall" | "exists") => {
                return Err(Error::Semantic(format!(
                    "quantifier at offset {} inside the body; formulas must be prenex",
                    self.pos()
                )))
            }
            Some("U") => return self.err("`U` needs a left operand"),
            _ => None,
        };
        if let Some(ctor) = ctor {
            self.at += 1;
            return Ok(ctor(self.unary()?));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr<RawAtom>> {
        let pos = self.pos();
        let name = match self.bump() {
            Some(Tok::Ident(s)) => s,
            Some(_) => {
                self.at -= 1;
                return self.err("expected a formula");
            }
            None => return self.err("unexpected end of input"),
        };
        if self.eat(&Tok::At) {
            let at = self.ident("an index after `@`")?;
            return Ok(Expr::Atom(RawAtom::Named {
                name,
                at: Some(at),
                pos,
            }));
        }
        if self.eat(&Tok::Equals) {
            let rhs = self.ident("a variable after `=`")?;
            return Ok(Expr::Atom(RawAtom::Eq(name, rhs, pos)));
        }
        Ok(Expr::Atom(RawAtom::Named { name, at: None, pos }))
    }
}

/// Parses a prenex indexed formula and checks that it is a well-formed sentence.
pub fn parse_formula(text: &str) -> Result<Formula> {
    let mut p = Parser::new(text)?;
    let prefix = p.prefix()?;
    if !p.eat(&Tok::Dot) && !prefix.is_empty() {
        return p.err("expected `.` after the quantifier prefix");
    }
    let raw = p.expr()?;
    if !p.at_end() {
        return p.err("unexpected trailing input");
    }

    let mut bound = HashSet::new();
    for q in &prefix {
        if let Some(y) = &q.in_edges_of {
            if !bound.contains(y.as_str()) {
                return Err(Error::Semantic(format!(
                    "`in E({y})` for `{}` refers to a variable not bound before it",
                    q.var
                )));
            }
        }
        if !bound.insert(q.var.as_str()) {
            return Err(Error::Semantic(format!("variable `{}` bound twice", q.var)));
        }
    }

    let mut failure = None;
    let body = raw.map_atoms(&mut |a| {
        let check = |v: &str, pos: usize, failure: &mut Option<Error>| {
            if !bound.contains(v) && failure.is_none() {
                *failure = Some(Error::Semantic(format!(
                    "unbound variable `{v}` at offset {pos}"
                )));
            }
        };
        match a {
            RawAtom::Named { name, at: Some(var), pos } => {
                check(var, *pos, &mut failure);
                if name == "tok" {
                    Expr::Atom(IndexedAtom::Tok { var: var.clone() })
                } else {
                    Expr::Atom(IndexedAtom::Prop {
                        name: name.clone(),
                        var: var.clone(),
                    })
                }
            }
            RawAtom::Named { name, at: None, pos } => {
                failure.get_or_insert_with(|| Error::Syntax {
                    pos: *pos,
                    msg: format!("atom `{name}` needs an index, as in `{name}@i`"),
                });
                Expr::False
            }
            RawAtom::Eq(x, y, pos) => {
                check(x, *pos, &mut failure);
                check(y, *pos, &mut failure);
                Expr::Atom(IndexedAtom::Eq(x.clone(), y.clone()))
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    check_state_formula(&body)?;
    Ok(Formula { prefix, body })
}

/// Parses a formula over plain atoms (`p`, `crit@2`, ...), as used on bare LTSs
/// and projected systems.
pub fn parse_closed(text: &str) -> Result<Expr<String>> {
    let mut p = Parser::new(text)?;
    p.eat(&Tok::Dot);
    let raw = p.expr()?;
    if !p.at_end() {
        return p.err("unexpected trailing input");
    }
    let mut failure = None;
    let e = raw.map_atoms(&mut |a| match a {
        RawAtom::Named { name, at: None, .. } => Expr::Atom(name.clone()),
        RawAtom::Named { name, at: Some(i), .. } => Expr::Atom(format!("{name}@{i}")),
        RawAtom::Eq(_, _, pos) => {
            failure.get_or_insert(Error::Semantic(format!(
                "index equality at offset {pos} needs a quantified formula"
            )));
            Expr::False
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    check_state_formula(&e)?;
    Ok(e)
}

fn check_state_formula<A>(e: &Expr<A>) -> Result<()> {
    if e.is_state_formula() {
        Ok(())
    } else {
        Err(Error::Semantic(
            "U, F and G must occur below a path quantifier A or E".into(),
        ))
    }
}
