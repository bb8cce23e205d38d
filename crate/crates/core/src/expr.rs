//! Expressions in one real variable `x`: parsing, printing, evaluation,
//! symbolic differentiation and interval enclosure.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::interval::{EnclosureFault, Interval};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var,
    Const(f64),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Neg(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unbalanced parenthesis at {pos}")]
    Unbalanced { pos: usize },
    #[error("exponent at {pos} is not an integer")]
    NonIntegerExponent { pos: usize },
    #[error("unknown identifier `{name}` at {pos}")]
    UnknownIdentifier { pos: usize, name: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalFault {
    #[error("division by zero at x = {x}")]
    DivisionByZero { x: f64 },
    #[error("non-finite intermediate value at x = {x}")]
    Overflow { x: f64 },
}

pub fn parse(text: &str) -> Result<Expr, ParseError> {
    parse_with(text, &BTreeMap::new())
}

/// Parses with named integer parameters (e.g. `k`) substituted at parse time.
pub fn parse_with(text: &str, params: &BTreeMap<String, i64>) -> Result<Expr, ParseError> {
    let tokens = lex(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        params,
        end: text.len(),
    };
    let e = p.expr()?;
    match p.peek() {
        None => Ok(e),
        Some((Tok::RParen, pos)) => Err(ParseError::Unbalanced { pos }),
        Some((_, pos)) => Err(ParseError::Syntax {
            pos,
            msg: "unexpected trailing input".into(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, bool),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lit = &text[start..i];
                let v: f64 = lit.parse().map_err(|_| ParseError::Syntax {
                    pos: start,
                    msg: format!("bad numeric literal `{lit}`"),
                })?;
                let integral = lit.bytes().all(|b| b.is_ascii_digit());
                out.push((Tok::Num(v, integral), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
                continue;
            }
            _ => {
                return Err(ParseError::Syntax {
                    pos: start,
                    msg: format!("unexpected character `{}`", text[start..].chars().next().unwrap()),
                })
            }
        };
        out.push((tok, start));
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    params: &'a BTreeMap<String, i64>,
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<(Tok, usize)> {
        self.tokens.get(self.pos).cloned()
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |t| t.1)
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.tokens.get(self.pos).map(|p| &p.0) == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn close(&mut self, open_pos: usize) -> Result<(), ParseError> {
        if self.eat(&Tok::RParen) {
            Ok(())
        } else if self.peek().is_none() {
            Err(ParseError::Unbalanced { pos: open_pos })
        } else {
            Err(ParseError::Syntax {
                pos: self.here(),
                msg: "expected `)`".into(),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(&Tok::Plus) {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(&Tok::Minus) {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(&Tok::Star) {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(&Tok::Slash) {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(&Tok::Minus) {
            // A negated literal folds into a negative constant so that the
            // printed form `(-c)` reads back as the same tree.
            return Ok(match self.unary()? {
                Expr::Const(c) => Expr::Const(-c),
                e => Expr::Neg(Box::new(e)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.eat(&Tok::Caret) {
            let n = self.exponent()?;
            let n = i32::try_from(n).map_err(|_| ParseError::Syntax {
                pos: self.here(),
                msg: "exponent out of range".into(),
            })?;
            return Ok(Expr::Pow(Box::new(base), n));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<i64, ParseError> {
        let pos = self.here();
        let base = match self.peek() {
            Some((Tok::Minus, _)) => {
                self.pos += 1;
                return Ok(-self.exponent()?);
            }
            Some((Tok::LParen, p)) => {
                self.pos += 1;
                let v = self.exponent()?;
                self.close(p)?;
                v
            }
            Some((Tok::Num(v, integral), _)) => {
                self.pos += 1;
                if !integral {
                    return Err(ParseError::NonIntegerExponent { pos });
                }
                v as i64
            }
            Some((Tok::Ident(name), _)) => {
                self.pos += 1;
                if name == "x" {
                    return Err(ParseError::NonIntegerExponent { pos });
                }
                *self
                    .params
                    .get(&name)
                    .ok_or(ParseError::UnknownIdentifier { pos, name })?
            }
            _ => {
                return Err(ParseError::Syntax {
                    pos,
                    msg: "expected integer exponent".into(),
                })
            }
        };
        if self.eat(&Tok::Caret) {
            let e = self.exponent()?;
            let e = u32::try_from(e).map_err(|_| ParseError::NonIntegerExponent { pos })?;
            return base.checked_pow(e).ok_or(ParseError::Syntax {
                pos,
                msg: "exponent out of range".into(),
            });
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let pos = self.here();
        match self.peek() {
            Some((Tok::Num(v, _), _)) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Some((Tok::LParen, p)) => {
                self.pos += 1;
                let e = self.expr()?;
                self.close(p)?;
                Ok(e)
            }
            Some((Tok::Ident(name), _)) => {
                self.pos += 1;
                let func: fn(Box<Expr>) -> Expr = match name.as_str() {
                    "x" => return Ok(Expr::Var),
                    "sin" => Expr::Sin,
                    "cos" => Expr::Cos,
                    "exp" => Expr::Exp,
                    _ => {
                        return match self.params.get(&name) {
                            Some(v) => Ok(Expr::Const(*v as f64)),
                            None => Err(ParseError::UnknownIdentifier { pos, name }),
                        }
                    }
                };
                let open = self.here();
                if !self.eat(&Tok::LParen) {
                    return Err(ParseError::Syntax {
                        pos: open,
                        msg: format!("expected `(` after `{name}`"),
                    });
                }
                let arg = self.expr()?;
                self.close(open)?;
                Ok(func(Box::new(arg)))
            }
            Some((Tok::RParen, p)) => Err(ParseError::Unbalanced { pos: p }),
            Some(_) => Err(ParseError::Syntax {
                pos,
                msg: "expected operand".into(),
            }),
            None => Err(ParseError::Syntax {
                pos,
                msg: "unexpected end of input".into(),
            }),
        }
    }
}

// Binding strength used by the printer.
fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(..) => 3,
        Expr::Pow(..) => 4,
        Expr::Const(c) if c.is_sign_negative() => 0,
        _ => 5,
    }
}

fn write_at(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if prec(e) < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var => write!(f, "x"),
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Add(a, b) => {
                write_at(f, a, 1)?;
                write!(f, " + ")?;
                write_at(f, b, 2)
            }
            Expr::Sub(a, b) => {
                write_at(f, a, 1)?;
                write!(f, " - ")?;
                write_at(f, b, 2)
            }
            Expr::Mul(a, b) => {
                write_at(f, a, 2)?;
                write!(f, "*")?;
                write_at(f, b, 3)
            }
            Expr::Div(a, b) => {
                write_at(f, a, 2)?;
                write!(f, "/")?;
                write_at(f, b, 3)
            }
            Expr::Neg(a) => {
                write!(f, "-")?;
                write_at(f, a, 3)
            }
            Expr::Pow(a, n) => {
                write_at(f, a, 5)?;
                write!(f, "^{n}")
            }
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
        }
    }
}

// Simplifying constructors: 0/1 identities and folding of constant operands.
fn fold(v: f64, or: impl FnOnce() -> Expr) -> Expr {
    if v.is_finite() {
        Expr::Const(v)
    } else {
        or()
    }
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), _) if *x == 0.0 => b,
        (_, Expr::Const(y)) if *y == 0.0 => a,
        (Expr::Const(x), Expr::Const(y)) => fold(x + y, || Expr::Add(Box::new(a.clone()), Box::new(b.clone()))),
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (_, Expr::Const(y)) if *y == 0.0 => a,
        (Expr::Const(x), _) if *x == 0.0 => neg(b),
        (Expr::Const(x), Expr::Const(y)) => fold(x - y, || Expr::Sub(Box::new(a.clone()), Box::new(b.clone()))),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), _) | (_, Expr::Const(x)) if *x == 0.0 => Expr::Const(0.0),
        (Expr::Const(x), _) if *x == 1.0 => b,
        (_, Expr::Const(y)) if *y == 1.0 => a,
        (Expr::Const(x), Expr::Const(y)) => fold(x * y, || Expr::Mul(Box::new(a.clone()), Box::new(b.clone()))),
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), _) if *x == 0.0 => Expr::Const(0.0),
        (_, Expr::Const(y)) if *y == 1.0 => a,
        (Expr::Const(x), Expr::Const(y)) if *y != 0.0 => {
            fold(x / y, || Expr::Div(Box::new(a.clone()), Box::new(b.clone())))
        }
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        e => Expr::Neg(Box::new(e)),
    }
}

pub fn powi(a: Expr, n: i32) -> Expr {
    match (&a, n) {
        (_, 0) => Expr::Const(1.0),
        (_, 1) => a,
        (Expr::Const(c), _) if *c != 0.0 || n > 0 => fold(c.powi(n), || Expr::Pow(Box::new(a.clone()), n)),
        _ => Expr::Pow(Box::new(a), n),
    }
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn eval(&self, x: f64) -> Result<f64, EvalFault> {
        let v = match self {
            Expr::Var => x,
            Expr::Const(c) => *c,
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => {
                let d = b.eval(x)?;
                if d == 0.0 {
                    return Err(EvalFault::DivisionByZero { x });
                }
                a.eval(x)? / d
            }
            Expr::Pow(a, n) => {
                let base = a.eval(x)?;
                if base == 0.0 && *n < 0 {
                    return Err(EvalFault::DivisionByZero { x });
                }
                base.powi(*n)
            }
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Sin(a) => a.eval(x)?.sin(),
            Expr::Cos(a) => a.eval(x)?.cos(),
            Expr::Exp(a) => a.eval(x)?.exp(),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalFault::Overflow { x })
        }
    }

    pub fn differentiate(&self) -> Expr {
        match self {
            Expr::Var => Expr::Const(1.0),
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Add(a, b) => add(a.differentiate(), b.differentiate()),
            Expr::Sub(a, b) => sub(a.differentiate(), b.differentiate()),
            Expr::Mul(a, b) => add(
                mul(a.differentiate(), (**b).clone()),
                mul((**a).clone(), b.differentiate()),
            ),
            Expr::Div(a, b) => {
                let da = a.differentiate();
                let db = b.differentiate();
                if matches!(db, Expr::Const(c) if c == 0.0) {
                    return div(da, (**b).clone());
                }
                div(
                    sub(mul(da, (**b).clone()), mul((**a).clone(), db)),
                    powi((**b).clone(), 2),
                )
            }
            Expr::Pow(a, n) => mul(
                mul(Expr::Const(*n as f64), powi((**a).clone(), n - 1)),
                a.differentiate(),
            ),
            Expr::Neg(a) => neg(a.differentiate()),
            Expr::Sin(a) => mul(Expr::Cos(a.clone()), a.differentiate()),
            Expr::Cos(a) => mul(neg(Expr::Sin(a.clone())), a.differentiate()),
            Expr::Exp(a) => mul(Expr::Exp(a.clone()), a.differentiate()),
        }
    }

    pub fn eval_interval(&self, i: &Interval) -> Result<Interval, EnclosureFault> {
        Ok(match self {
            Expr::Var => *i,
            Expr::Const(c) => Interval::point(*c),
            Expr::Add(a, b) => a.eval_interval(i)?.add(&b.eval_interval(i)?),
            Expr::Sub(a, b) => a.eval_interval(i)?.sub(&b.eval_interval(i)?),
            Expr::Mul(a, b) => a.eval_interval(i)?.mul(&b.eval_interval(i)?),
            Expr::Div(a, b) => a.eval_interval(i)?.div(&b.eval_interval(i)?)?,
            Expr::Pow(a, n) => a.eval_interval(i)?.powi(*n)?,
            Expr::Neg(a) => a.eval_interval(i)?.neg(),
            Expr::Sin(a) => a.eval_interval(i)?.sin(),
            Expr::Cos(a) => a.eval_interval(i)?.cos(),
            Expr::Exp(a) => a.eval_interval(i)?.exp(),
        })
    }

    /// True when the derivative simplifies to the literal zero.
    pub fn is_constant(&self) -> bool {
        matches!(self.differentiate(), Expr::Const(c) if c == 0.0)
    }

    /// Arguments of every `sin`/`cos` node, outermost first.
    pub fn phase_args(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        self.collect_phases(&mut out);
        out
    }

    fn collect_phases<'a>(&'a self, out: &mut Vec<&'a Expr>) {
        match self {
            Expr::Var | Expr::Const(_) => {}
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_phases(out);
                b.collect_phases(out);
            }
            Expr::Pow(a, _) | Expr::Neg(a) | Expr::Exp(a) => a.collect_phases(out),
            Expr::Sin(a) | Expr::Cos(a) => {
                out.push(a);
                a.collect_phases(out);
            }
        }
    }

    /// Contains a trigonometric node with a non-constant argument.
    pub fn is_oscillatory(&self) -> bool {
        self.phase_args().iter().any(|g| !g.is_constant())
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Var | Expr::Const(_) => 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                1 + a.node_count() + b.node_count()
            }
            Expr::Pow(a, _) | Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) => {
                1 + a.node_count()
            }
        }
    }
}
