use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;

use super::{Atom, Formula, NegPpFormula, PpFormula, PpStarFormula, Signature, Symbol, Term, Var, EQ, UNIT};
use crate::error::{Error, Result};
use crate::torus::{parse_rational, TorusPoint};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(String),
    Sym(char),
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            out.push((Tok::Int(text[start..i].to_string()), start));
        } else if "!.&(),=+-*/".contains(c) {
            out.push((Tok::Sym(c), i));
            i += 1;
        } else {
            return Err(Error::parse(i, format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    sig: &'a Signature,
    bound: Vec<String>,
    free: Vec<String>,
    // inferred free variables are renumbered alphabetically once parsing ends
    infer: bool,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(_, p)| *p)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::parse(self.offset(), msg))
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected '{c}'"))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn int(&mut self) -> Result<i64> {
        match self.peek() {
            Some(Tok::Int(s)) => {
                let v = s.parse::<i64>();
                match v {
                    Ok(v) => {
                        self.pos += 1;
                        Ok(v)
                    }
                    Err(_) => self.err("integer literal out of range"),
                }
            }
            _ => self.err("expected integer"),
        }
    }

    fn check_binder(&self, name: &str) -> Result<()> {
        if name == "E" || name == "f" {
            return self.err(format!("'{name}' is reserved"));
        }
        if self.bound.iter().any(|b| b == name) {
            return self.err(format!("duplicate bound variable '{name}'"));
        }
        if self.sig.params.contains(name) {
            return self.err(format!("bound variable '{name}' shadows a parameter"));
        }
        if !self.infer && self.free.iter().any(|v| v == name) {
            return self.err(format!("bound variable '{name}' shadows a free variable"));
        }
        Ok(())
    }

    fn variable(&mut self, name: &str) -> Result<Var> {
        if let Some(j) = self.bound.iter().position(|b| b == name) {
            return Ok(Var::Bound(j));
        }
        if name == "E" || name == "f" {
            return self.err(format!("'{name}' is reserved"));
        }
        if let Some(i) = self.free.iter().position(|v| v == name) {
            return Ok(Var::Free(i));
        }
        if !self.infer {
            return self.err(format!("unknown variable '{name}'"));
        }
        self.free.push(name.to_string());
        Ok(Var::Free(self.free.len() - 1))
    }

    fn summand(&mut self, sign: i64) -> Result<Term> {
        let sign = if self.eat('-') { -sign } else { sign };
        let at = self.offset();
        let (coef, name) = match self.peek().cloned() {
            Some(Tok::Int(_)) => {
                let c = self.int()?;
                if self.eat('*') {
                    (c, Some(self.ident()?))
                } else {
                    (c, None)
                }
            }
            Some(Tok::Ident(_)) => (1, Some(self.ident()?)),
            _ => return self.err("expected term"),
        };
        let coef = coef
            .checked_mul(sign)
            .ok_or_else(|| Error::parse(at, "coefficient overflow"))?;
        match name {
            None => {
                if coef != 0 && !self.sig.has_unit() {
                    return Err(Error::parse(
                        at,
                        format!("integer constant requires a declared unit parameter '{UNIT}'"),
                    ));
                }
                Ok(Term::zero().with_constant(coef))
            }
            Some(n) if self.sig.params.contains(&n) && !self.bound.contains(&n) => {
                Ok(Term::zero().with(Symbol::Param(n), coef))
            }
            Some(n) => {
                let v = self.variable(&n).map_err(|e| match e {
                    Error::Parse { message, .. } => Error::parse(at, message),
                    other => other,
                })?;
                Ok(Term::zero().with(Symbol::Var(v), coef))
            }
        }
    }

    fn term(&mut self) -> Result<Term> {
        let start = self.offset();
        let mut sign = 1;
        if self.eat('+') {
        } else if self.eat('-') {
            sign = -1;
        }
        let mut acc = self.summand(sign)?;
        loop {
            let s = if self.eat('+') {
                1
            } else if self.eat('-') {
                -1
            } else {
                break;
            };
            let t = self.summand(s)?;
            acc = acc
                .checked_add(&t, 1)
                .ok_or_else(|| Error::parse(start, "coefficient overflow"))?;
        }
        Ok(acc)
    }

    fn rational(&mut self) -> Result<BigRational> {
        let at = self.offset();
        let neg = self.eat('-');
        let num = match self.peek() {
            Some(Tok::Int(s)) => s.clone(),
            _ => return self.err("malformed rational: expected integer numerator"),
        };
        self.pos += 1;
        let mut text = if neg { format!("-{num}") } else { num };
        if self.eat('/') {
            match self.peek() {
                Some(Tok::Int(s)) => {
                    text = format!("{text}/{s}");
                    self.pos += 1;
                }
                _ => return self.err("malformed rational: expected denominator"),
            }
        }
        parse_rational(&text).map_err(|m| Error::parse(at, format!("malformed rational: {m}")))
    }

    fn tpoint(&mut self) -> Result<TorusPoint> {
        let at = self.offset();
        let mut coords = Vec::new();
        if self.eat('(') {
            coords.push(self.rational()?);
            while self.eat(',') {
                coords.push(self.rational()?);
            }
            self.expect(')')?;
        } else {
            coords.push(self.rational()?);
        }
        if coords.len() != self.sig.torus_dim {
            return Err(Error::parse(
                at,
                format!(
                    "torus point has dimension {}, structure torus has dimension {}",
                    coords.len(),
                    self.sig.torus_dim
                ),
            ));
        }
        Ok(TorusPoint::new(coords))
    }

    fn atom(&mut self, atoms: &mut Vec<Atom>, fc: &mut BTreeMap<Var, TorusPoint>) -> Result<()> {
        let at = self.offset();
        let is_call = matches!(self.peek(), Some(Tok::Ident(_))) && self.peek_at(1) == Some(&Tok::Sym('('));
        if !is_call {
            let lhs = self.term()?;
            self.expect('=')?;
            let rhs = self.term()?;
            let diff = lhs
                .checked_add(&rhs, -1)
                .ok_or_else(|| Error::parse(at, "coefficient overflow"))?;
            atoms.push(Atom::eq(diff));
            return Ok(());
        }
        let name = self.ident()?;
        self.expect('(')?;
        if name == "f" {
            if self.sig.torus_dim == 0 {
                return Err(Error::parse(at, "f-constraint on a structure with no torus"));
            }
            let vat = self.offset();
            let vname = self.ident()?;
            if self.sig.params.contains(&vname) && !self.bound.contains(&vname) {
                return Err(Error::parse(vat, format!("f-constraint on parameter '{vname}'")));
            }
            let v = self.variable(&vname)?;
            self.expect(')')?;
            self.expect('=')?;
            let p = self.tpoint()?;
            if let Some(prev) = fc.get(&v) {
                if prev != &p {
                    return Err(Error::parse(at, format!("conflicting f-constraints on '{vname}'")));
                }
            }
            fc.insert(v, p);
            return Ok(());
        }
        let Some(&arity) = self.sig.predicates.get(&name) else {
            return Err(Error::parse(at, format!("unknown predicate '{name}'")));
        };
        let mut args = vec![self.term()?];
        while self.eat(',') {
            args.push(self.term()?);
        }
        self.expect(')')?;
        if args.len() != arity {
            return Err(Error::parse(
                at,
                format!("arity mismatch: '{name}' takes {arity} argument(s), got {}", args.len()),
            ));
        }
        atoms.push(Atom::new(name, args));
        Ok(())
    }
}

fn renumber_free(
    free: &[String],
    atoms: Vec<Atom>,
    fc: BTreeMap<Var, TorusPoint>,
) -> (Vec<String>, Vec<Atom>, BTreeMap<Var, TorusPoint>) {
    let mut sorted: Vec<String> = free.to_vec();
    sorted.sort();
    let map: Vec<usize> = free
        .iter()
        .map(|n| sorted.iter().position(|s| s == n).expect("same names"))
        .collect();
    let remap = |v: Var| match v {
        Var::Free(i) => Var::Free(map[i]),
        b => b,
    };
    let atoms = atoms
        .into_iter()
        .map(|a| {
            let args = a
                .args
                .into_iter()
                .map(|t| {
                    let mut out = Term::zero().with_constant(t.constant);
                    for (s, c) in t.coeffs {
                        let s = match s {
                            Symbol::Var(v) => Symbol::Var(remap(v)),
                            p => p,
                        };
                        out = out.with(s, c);
                    }
                    out
                })
                .collect();
            Atom::new(a.pred, args)
        })
        .collect();
    let fc = fc.into_iter().map(|(v, p)| (remap(v), p)).collect();
    (sorted, atoms, fc)
}

/// Parses one formula. Without an explicit variable list in the signature,
/// free variables are ordered alphabetically.
pub fn parse(text: &str, sig: &Signature) -> Result<Formula> {
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
        sig,
        bound: Vec::new(),
        free: sig.vars.clone().unwrap_or_default(),
        infer: sig.vars.is_none(),
    };
    if let Some(vars) = &sig.vars {
        let mut seen = BTreeSet::new();
        for v in vars {
            if !seen.insert(v) || sig.params.contains(v) || v == "E" || v == "f" {
                return Err(Error::parse(0, format!("invalid free variable list entry '{v}'")));
            }
        }
    }
    let negated = p.eat('!');
    let neg_at = p.offset();
    let mut blocks = Vec::new();
    while p.peek() == Some(&Tok::Ident("E".into())) && p.peek_at(1) != Some(&Tok::Sym('(')) {
        p.pos += 1;
        let mut block = Vec::new();
        loop {
            let name = p.ident()?;
            p.check_binder(&name)?;
            p.bound.push(name.clone());
            block.push(name);
            p.eat(',');
            if p.eat('.') {
                break;
            }
        }
        blocks.push(block);
    }
    let mut atoms = Vec::new();
    let mut fc = BTreeMap::new();
    p.atom(&mut atoms, &mut fc)?;
    while p.eat('&') {
        p.atom(&mut atoms, &mut fc)?;
    }
    if p.pos < p.toks.len() {
        return p.err("unexpected trailing input");
    }
    for pred in atoms.iter().map(|a| &a.pred) {
        debug_assert!(pred == EQ || sig.predicates.contains_key(pred));
    }
    let (free, atoms, fc) = if p.infer {
        renumber_free(&p.free, atoms, fc)
    } else {
        (p.free.clone(), atoms, fc)
    };
    let core = PpFormula::from_blocks(free, blocks, atoms);
    if negated {
        if !fc.is_empty() {
            return Err(Error::parse(neg_at, "f-constraint under negation"));
        }
        return Ok(Formula::NegPp(NegPpFormula::new(core)));
    }
    if fc.is_empty() {
        Ok(Formula::Pp(core))
    } else {
        Ok(Formula::PpStar(PpStarFormula::new(core, fc)))
    }
}
