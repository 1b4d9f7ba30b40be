//! Recursive-descent parser for integrands.
//!
//! ```text
//! Sum      := Product ('+' Product)*
//! Product  := Coeff | (Coeff '*'?)? Factor ('*'? Factor)*
//! Factor   := Base ('^' SignedInt)?
//! Base     := Var | '(' Linear ')'
//! Linear   := '-'? Term (('+' | '-') Term)*
//! Term     := Rational | (Rational '*')? Var
//! Var      := 'x' PositiveInt
//! Rational := Int ('/' PosInt)?
//! Coeff    := '-'? Rational
//! ```
//!
//! Whitespace is ignored. A plain product with no leading coefficient is the
//! common case; coefficients and sums exist so rendered expressions parse
//! back to themselves.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

use crate::ct::CtOrder;
use crate::linform::{Expr, VarId};
use crate::scalar::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// Byte offset into the input.
    pub pos: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at position {}: {}", self.pos, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Int(BigInt),
    Var(u32),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Int(i) => write!(f, "{i}"),
            Tok::Var(v) => write!(f, "x{v}"),
            Tok::Plus => f.write_str("'+'"),
            Tok::Minus => f.write_str("'-'"),
            Tok::Star => f.write_str("'*'"),
            Tok::Slash => f.write_str("'/'"),
            Tok::Caret => f.write_str("'^'"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let start = i;
        let single = match b {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = single {
            out.push((start, t));
            i += 1;
        } else if b.is_ascii_whitespace() {
            i += 1;
        } else if b.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let v: BigInt = text[start..i].parse().expect("digits parse");
            out.push((start, Tok::Int(v)));
        } else if b == b'x' {
            i += 1;
            let digits = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let idx = text[digits..i].parse::<u32>().ok().filter(|v| *v > 0).ok_or_else(|| {
                ParseError { pos: start, message: "variable must be x followed by a positive index".into() }
            })?;
            out.push((start, Tok::Var(idx)));
        } else {
            let ch = text[start..].chars().next().unwrap_or('?');
            return Err(ParseError { pos: start, message: format!("unexpected character {ch:?}") });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    i: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.i).map_or(self.end, |(p, _)| *p)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { pos: self.pos(), message: message.into() })
    }

    fn unexpected<T>(&self, wanted: &str) -> Result<T, ParseError> {
        match self.peek() {
            Some(t) => self.err(format!("expected {wanted}, found {t}")),
            None => self.err(format!("expected {wanted}, found end of input")),
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn int(&mut self) -> Result<BigInt, ParseError> {
        match self.peek() {
            Some(Tok::Int(v)) => {
                let v = v.clone();
                self.i += 1;
                Ok(v)
            }
            _ => self.unexpected("integer"),
        }
    }

    fn rational(&mut self) -> Result<Rational, ParseError> {
        let num = self.int()?;
        if self.eat(&Tok::Slash) {
            let den = self.int()?;
            if den.is_zero() {
                return self.err("zero denominator");
            }
            return Ok(Rational::new(num, den));
        }
        Ok(Rational::from_integer(num))
    }

    fn starts_factor(&self) -> bool {
        matches!(self.peek(), Some(Tok::Var(_) | Tok::LParen))
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.product()?;
        while self.eat(&Tok::Plus) {
            e = e.add(&self.product()?);
        }
        Ok(e)
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut e = Expr::one();
        let mut need_factor = true;
        if matches!(self.peek(), Some(Tok::Int(_) | Tok::Minus)) {
            let neg = self.eat(&Tok::Minus);
            let mut c = self.rational()?;
            if neg {
                c = -c;
            }
            e = Expr::constant(c);
            need_factor = self.eat(&Tok::Star);
            if !need_factor && !self.starts_factor() {
                return Ok(e);
            }
        }
        if need_factor && !self.starts_factor() {
            return self.unexpected("variable or '('");
        }
        while self.starts_factor() {
            e = e.mul(&self.factor()?);
            if self.eat(&Tok::Star) && !self.starts_factor() {
                return self.unexpected("variable or '('");
            }
        }
        Ok(e)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos();
        let (constant, coeffs) = match self.peek() {
            Some(Tok::Var(v)) => {
                let v = VarId(*v);
                self.i += 1;
                (Rational::zero(), vec![(v, Rational::from_integer(1.into()))])
            }
            Some(Tok::LParen) => {
                self.i += 1;
                let lin = self.linear()?;
                if !self.eat(&Tok::RParen) {
                    return self.err("linear form expected");
                }
                lin
            }
            _ => return self.unexpected("variable or '('"),
        };
        let mut exp: i64 = 1;
        if self.eat(&Tok::Caret) {
            let neg = if self.eat(&Tok::Minus) {
                true
            } else {
                self.eat(&Tok::Plus);
                false
            };
            let at = self.pos();
            let mag = self.int()?;
            let mag = mag
                .to_i64()
                .ok_or(ParseError { pos: at, message: "exponent out of range".into() })?;
            exp = if neg { -mag } else { mag };
        }
        Expr::linear_power(&constant, &coeffs, exp)
            .map_err(|e| ParseError { pos: start, message: e.to_string() })
    }

    fn linear(&mut self) -> Result<(Rational, Vec<(VarId, Rational)>), ParseError> {
        let mut constant = Rational::zero();
        let mut coeffs = Vec::new();
        let mut neg = self.eat(&Tok::Minus);
        loop {
            let (c, var) = match self.peek() {
                Some(Tok::Var(v)) => {
                    let v = VarId(*v);
                    self.i += 1;
                    (Rational::from_integer(1.into()), Some(v))
                }
                Some(Tok::Int(_)) => {
                    let c = self.rational()?;
                    if self.eat(&Tok::Star) {
                        match self.peek() {
                            Some(Tok::Var(v)) => {
                                let v = VarId(*v);
                                self.i += 1;
                                (c, Some(v))
                            }
                            _ => return self.err("linear form expected"),
                        }
                    } else {
                        (c, None)
                    }
                }
                _ => return self.err("linear form expected"),
            };
            let c = if neg { -c } else { c };
            match var {
                Some(v) => coeffs.push((v, c)),
                None => constant += c,
            }
            neg = match self.peek() {
                Some(Tok::Plus) => false,
                Some(Tok::Minus) => true,
                Some(Tok::RParen) => return Ok((constant, coeffs)),
                _ => return self.err("linear form expected"),
            };
            self.i += 1;
        }
    }
}

/// Parses an integrand into its canonical expression.
pub fn parse_integrand(text: &str) -> Result<Expr, ParseError> {
    let toks = lex(text)?;
    if toks.is_empty() {
        return Err(ParseError { pos: 0, message: "empty integrand".into() });
    }
    let mut p = Parser { toks, i: 0, end: text.len() };
    let e = p.sum()?;
    if p.peek().is_some() {
        return p.unexpected("end of input");
    }
    Ok(e)
}

/// Parses `x1,x2,...` into an elimination order.
pub fn parse_order(text: &str) -> Result<CtOrder, ParseError> {
    let mut vars = Vec::new();
    let mut offset = 0;
    for part in text.split(',') {
        let name = part.trim();
        let idx = name
            .strip_prefix('x')
            .and_then(|d| d.parse::<u32>().ok())
            .filter(|v| *v > 0)
            .ok_or_else(|| ParseError { pos: offset, message: format!("bad variable name {name:?}") })?;
        vars.push(VarId(idx));
        offset += part.len() + 1;
    }
    CtOrder::new(vars).map_err(|e| ParseError { pos: 0, message: e.to_string() })
}
