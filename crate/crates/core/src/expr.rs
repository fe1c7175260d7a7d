//! Scalar rate expressions of one variable `t`.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | 't' | 'pi' | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-2^2`
//! is `-(2^2)` and `2^-1` is `0.5`.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("cannot evaluate `{expr}` at t = {t}: {message}")]
    Eval {
        expr: String,
        t: f64,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Sqrt,
    Abs,
    Min,
    Max,
}

impl Func {
    const ALL: [Func; 11] = [
        Func::Exp,
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Sinh,
        Func::Cosh,
        Func::Tanh,
        Func::Sqrt,
        Func::Abs,
        Func::Min,
        Func::Max,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn lookup(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RateExpr {
    Num(f64),
    T,
    Pi,
    Neg(Box<RateExpr>),
    Bin(BinOp, Box<RateExpr>, Box<RateExpr>),
    Call(Func, Vec<RateExpr>),
}

impl RateExpr {
    pub fn constant(x: f64) -> Self {
        RateExpr::Num(x)
    }

    pub fn parse(src: &str) -> Result<Self, ExprError> {
        parse_rate_expr(src)
    }

    /// True when the expression does not mention `t`.
    pub fn is_constant(&self) -> bool {
        match self {
            RateExpr::T => false,
            RateExpr::Num(_) | RateExpr::Pi => true,
            RateExpr::Neg(a) => a.is_constant(),
            RateExpr::Bin(_, a, b) => a.is_constant() && b.is_constant(),
            RateExpr::Call(_, args) => args.iter().all(RateExpr::is_constant),
        }
    }

    /// Evaluates at `t`; division by zero, roots of negatives and other
    /// non-finite results are errors.
    pub fn eval(&self, t: f64) -> Result<f64, ExprError> {
        let fail = |message: &str| ExprError::Eval {
            expr: self.to_string(),
            t,
            message: message.to_string(),
        };
        let v = self.eval_inner(t).map_err(fail)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(fail("non-finite result"))
        }
    }

    fn eval_inner(&self, t: f64) -> Result<f64, &'static str> {
        Ok(match self {
            RateExpr::Num(x) => *x,
            RateExpr::T => t,
            RateExpr::Pi => std::f64::consts::PI,
            RateExpr::Neg(a) => -a.eval_inner(t)?,
            RateExpr::Bin(op, a, b) => {
                let (x, y) = (a.eval_inner(t)?, b.eval_inner(t)?);
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div if y == 0.0 => return Err("division by zero"),
                    BinOp::Div => x / y,
                    BinOp::Pow if x < 0.0 && y.fract() != 0.0 => {
                        return Err("fractional power of a negative number")
                    }
                    BinOp::Pow if x == 0.0 && y < 0.0 => return Err("division by zero"),
                    BinOp::Pow => x.powf(y),
                }
            }
            RateExpr::Call(f, args) => {
                let x = args[0].eval_inner(t)?;
                match f {
                    Func::Exp => x.exp(),
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Tan => x.tan(),
                    Func::Sinh => x.sinh(),
                    Func::Cosh => x.cosh(),
                    Func::Tanh => x.tanh(),
                    Func::Sqrt if x < 0.0 => return Err("square root of a negative number"),
                    Func::Sqrt => x.sqrt(),
                    Func::Abs => x.abs(),
                    Func::Min => x.min(args[1].eval_inner(t)?),
                    Func::Max => x.max(args[1].eval_inner(t)?),
                }
            }
        })
    }
}

/// Fully parenthesized, so printing and reparsing gives the same tree.
impl fmt::Display for RateExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateExpr::Num(x) if *x < 0.0 || (*x == 0.0 && x.is_sign_negative()) => {
                write!(f, "(-{:?})", -x)
            }
            RateExpr::Num(x) => write!(f, "{x:?}"),
            RateExpr::T => f.write_str("t"),
            RateExpr::Pi => f.write_str("pi"),
            RateExpr::Neg(a) => write!(f, "(-{a})"),
            RateExpr::Bin(op, a, b) => write!(f, "({a}{}{b})", op.symbol()),
            RateExpr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl Serialize for RateExpr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Accepts either a string expression or a bare number.
impl<'de> Deserialize<'de> for RateExpr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(RateExpr::Num(x)),
            Raw::Text(s) => parse_rate_expr(&s).map_err(serde::de::Error::custom),
        }
    }
}

pub fn parse_rate_expr(src: &str) -> Result<RateExpr, ExprError> {
    let mut p = Parser { src, pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ExprError {
        ExprError::Parse {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<RateExpr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinOp::Add
            } else if self.eat('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            lhs = RateExpr::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<RateExpr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinOp::Mul
            } else if self.eat('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            lhs = RateExpr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<RateExpr, ExprError> {
        if self.eat('-') {
            Ok(RateExpr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<RateExpr, ExprError> {
        let base = self.atom()?;
        if self.eat('^') {
            Ok(RateExpr::Bin(
                BinOp::Pow,
                Box::new(base),
                Box::new(self.unary()?),
            ))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<RateExpr, ExprError> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => self.ident(),
            Some(_) => Err(self.error("expected a number, identifier or `(`")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<RateExpr, ExprError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let digits = |mut i: usize| {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            i
        };
        let mut end = digits(start);
        if end < bytes.len() && bytes[end] == b'.' {
            end = digits(end + 1);
        }
        if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
            let mut k = end + 1;
            if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                k += 1;
            }
            let after = digits(k);
            if after > k {
                end = after;
            }
        }
        match self.src[start..end].parse::<f64>() {
            Ok(x) => {
                self.pos = end;
                Ok(RateExpr::Num(x))
            }
            Err(_) => Err(self.error("malformed number")),
        }
    }

    fn ident(&mut self) -> Result<RateExpr, ExprError> {
        let start = self.pos;
        let len = self.src[start..]
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(self.src.len() - start);
        let name = &self.src[start..start + len];
        self.pos += len;
        match name {
            "t" => return Ok(RateExpr::T),
            "pi" => return Ok(RateExpr::Pi),
            _ => {}
        }
        let Some(func) = Func::lookup(name) else {
            return Err(ExprError::UnknownIdentifier {
                name: name.to_string(),
                offset: start,
            });
        };
        self.expect('(')?;
        let mut args = vec![self.expr()?];
        while self.eat(',') {
            args.push(self.expr()?);
        }
        if args.len() != func.arity() {
            return Err(ExprError::Parse {
                offset: start,
                message: format!(
                    "`{name}` takes {} argument(s), got {}",
                    func.arity(),
                    args.len()
                ),
            });
        }
        self.expect(')')?;
        Ok(RateExpr::Call(func, args))
    }
}
