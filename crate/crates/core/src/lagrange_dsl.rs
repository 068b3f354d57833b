//! Expressions in `t`, `y` and `v` with exact symbolic partial derivatives.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr    = term , { ( "+" | "-" ) , term } ;
//! term    = unary , { ( "*" | "/" ) , unary } ;
//! unary   = "-" , unary | power ;
//! power   = primary , [ "^" , unary ] ;
//! primary = number | "t" | "y" | "v" | func , "(" , expr , ")" | "(" , expr , ")" ;
//! func    = "exp" | "log" | "sqrt" | "sin" | "cos" | "erfc" ;
//! number  = digits , [ "." , [ digits ] ] , [ exponent ]
//!         | "." , digits , [ exponent ] ;
//! exponent = ( "e" | "E" ) , [ "+" | "-" ] , digits ;
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-v^2`
//! is `-(v^2)` and `2^-1` is `0.5`. A minus sign directly in front of a
//! number literal (that is not itself a base of `^`) folds into a negative
//! constant.

use std::fmt;

use thiserror::Error;

use crate::special;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    T,
    Y,
    V,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::Y => "y",
            Var::V => "v",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Erfc,
}

impl UnaryOp {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "erfc" => UnaryOp::Erfc,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Erfc => "erfc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        offset: usize,
        expected: Vec<&'static str>,
        found: String,
    },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error in `{node}`: {reason}")]
    Domain { node: String, reason: &'static str },
}

impl fmt::Display for Expr {
    /// Fully parenthesised; reparsing the output gives an identical tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if c.is_sign_negative() {
                    write!(f, "({c:?})")
                } else {
                    write!(f, "{c:?}")
                }
            }
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Unary(UnaryOp::Neg, x) => write!(f, "(-({x}))"),
            Expr::Unary(op, x) => write!(f, "{}({x})", op.name()),
            Expr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
        }
    }
}

impl Expr {
    pub fn var(v: Var) -> Self {
        Expr::Var(v)
    }

    pub fn is_const(&self, value: f64) -> bool {
        matches!(self, Expr::Const(c) if *c == value)
    }

    /// True if the variable occurs anywhere in the tree.
    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Unary(_, x) => x.depends_on(var),
            Expr::Binary(_, l, r) => l.depends_on(var) || r.depends_on(var),
        }
    }

    pub fn evaluate(&self, t: f64, y: f64, v: f64) -> Result<f64, EvalError> {
        evaluate(self, t, y, v)
    }
}

// ---------------------------------------------------------------- lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(x) => format!("number {x}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Op(c) => format!("`{c}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push((Tok::Op(c as char), start));
                i += 1;
            }
            b'(' => {
                out.push((Tok::LParen, start));
                i += 1;
            }
            b')' => {
                out.push((Tok::RParen, start));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let mut j = i;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                if j < bytes.len() && bytes[j] == b'.' {
                    j += 1;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let text = &src[i..j];
                let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                    offset: start,
                    expected: vec!["number"],
                    found: format!("`{text}`"),
                })?;
                out.push((Tok::Num(value), start));
                i = j;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                out.push((Tok::Ident(src[i..j].to_string()), start));
                i = j;
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    offset: start,
                    expected: vec!["operator", "operand"],
                    found: format!("`{ch}`"),
                });
            }
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

// ---------------------------------------------------------------- parser

const OPERAND: &[&str] = &["number", "variable", "function", "`(`", "`-`"];

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.pos + ahead).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&'static str]) -> ParseError {
        ParseError::Syntax {
            offset: self.offset(),
            expected: expected.to_vec(),
            found: self.peek().describe(),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinaryOp::Add,
                Tok::Op('-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinaryOp::Mul,
                Tok::Op('/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() != Tok::Op('-') {
            return self.power();
        }
        self.bump();
        if let Tok::Num(x) = *self.peek() {
            if *self.peek_at(1) != Tok::Op('^') {
                self.bump();
                return Ok(Expr::Const(-x));
            }
        }
        let inner = self.unary()?;
        Ok(Expr::Unary(UnaryOp::Neg, Box::new(inner)))
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Binary(BinaryOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(x) => {
                self.bump();
                Ok(Expr::Const(x))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let var = match name.as_str() {
                    "t" => Some(Var::T),
                    "y" => Some(Var::Y),
                    "v" => Some(Var::V),
                    _ => None,
                };
                if let Some(v) = var {
                    self.bump();
                    return Ok(Expr::Var(v));
                }
                let Some(op) = UnaryOp::from_name(&name) else {
                    return Err(ParseError::UnknownIdentifier { offset, name });
                };
                self.bump();
                if *self.peek() != Tok::LParen {
                    return Err(self.error(&["`(`"]));
                }
                self.bump();
                let arg = self.expr()?;
                self.expect_rparen()?;
                Ok(Expr::Unary(op, Box::new(arg)))
            }
            _ => Err(self.error(OPERAND)),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::RParen {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&["operator", "`)`"]))
        }
    }
}

pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.error(&["operator", "end of input"]));
    }
    Ok(e)
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

// ---------------------------------------------------------------- evaluation

fn domain(node: &Expr, reason: &'static str) -> EvalError {
    EvalError::Domain {
        node: node.to_string(),
        reason,
    }
}

pub fn evaluate(e: &Expr, t: f64, y: f64, v: f64) -> Result<f64, EvalError> {
    let out = match e {
        Expr::Const(c) => *c,
        Expr::Var(Var::T) => t,
        Expr::Var(Var::Y) => y,
        Expr::Var(Var::V) => v,
        Expr::Unary(op, x) => {
            let a = evaluate(x, t, y, v)?;
            match op {
                UnaryOp::Neg => -a,
                UnaryOp::Exp => a.exp(),
                UnaryOp::Log => {
                    if a <= 0.0 {
                        return Err(domain(e, "logarithm of a nonpositive number"));
                    }
                    a.ln()
                }
                UnaryOp::Sqrt => {
                    if a < 0.0 {
                        return Err(domain(e, "square root of a negative number"));
                    }
                    a.sqrt()
                }
                UnaryOp::Sin => a.sin(),
                UnaryOp::Cos => a.cos(),
                UnaryOp::Erfc => special::erfc(a),
            }
        }
        Expr::Binary(op, l, r) => {
            let a = evaluate(l, t, y, v)?;
            let b = evaluate(r, t, y, v)?;
            match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                BinaryOp::Div => {
                    if b == 0.0 {
                        return Err(domain(e, "division by zero"));
                    }
                    a / b
                }
                BinaryOp::Pow => {
                    if a == 0.0 && b < 0.0 {
                        return Err(domain(e, "zero raised to a negative power"));
                    }
                    if a < 0.0 && b.fract() != 0.0 {
                        return Err(domain(e, "negative base with non-integer exponent"));
                    }
                    if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
                        a.powi(b as i32)
                    } else {
                        a.powf(b)
                    }
                }
            }
        }
    };
    if out.is_finite() {
        Ok(out)
    } else {
        Err(domain(e, "result is not finite"))
    }
}

// ---------------------------------------------------------------- differentiation

fn constant(e: &Expr) -> Option<f64> {
    match e {
        Expr::Const(c) => Some(*c),
        _ => None,
    }
}

fn folded(x: f64, fallback: impl FnOnce() -> Expr) -> Expr {
    if x.is_finite() {
        Expr::Const(x)
    } else {
        fallback()
    }
}

fn binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
    Expr::Binary(op, Box::new(a), Box::new(b))
}

fn unary(op: UnaryOp, a: Expr) -> Expr {
    Expr::Unary(op, Box::new(a))
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Unary(UnaryOp::Neg, inner) => *inner,
        other => unary(UnaryOp::Neg, other),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (constant(&a), constant(&b)) {
        (Some(x), Some(y)) => folded(x + y, || binary(BinaryOp::Add, a, b)),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => binary(BinaryOp::Add, a, b),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (constant(&a), constant(&b)) {
        (Some(x), Some(y)) => folded(x - y, || binary(BinaryOp::Sub, a, b)),
        (_, Some(0.0)) => a,
        (Some(0.0), _) => neg(b),
        _ => binary(BinaryOp::Sub, a, b),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (constant(&a), constant(&b)) {
        (Some(x), Some(y)) => folded(x * y, || binary(BinaryOp::Mul, a, b)),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::Const(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        _ => binary(BinaryOp::Mul, a, b),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (constant(&a), constant(&b)) {
        (Some(x), Some(y)) if y != 0.0 => folded(x / y, || binary(BinaryOp::Div, a, b)),
        (Some(0.0), _) => Expr::Const(0.0),
        (_, Some(1.0)) => a,
        _ => binary(BinaryOp::Div, a, b),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match constant(&b) {
        Some(1.0) => a,
        Some(0.0) => Expr::Const(1.0),
        _ => binary(BinaryOp::Pow, a, b),
    }
}

/// Exact partial derivative with respect to `var`.
pub fn differentiate(e: &Expr, var: Var) -> Expr {
    match e {
        Expr::Const(_) => Expr::Const(0.0),
        Expr::Var(v) => Expr::Const(if *v == var { 1.0 } else { 0.0 }),
        Expr::Unary(op, x) => {
            let dx = differentiate(x, var);
            if dx.is_const(0.0) {
                return Expr::Const(0.0);
            }
            let u = (**x).clone();
            match op {
                UnaryOp::Neg => neg(dx),
                UnaryOp::Exp => mul(e.clone(), dx),
                UnaryOp::Log => div(dx, u),
                UnaryOp::Sqrt => div(dx, mul(Expr::Const(2.0), e.clone())),
                UnaryOp::Sin => mul(unary(UnaryOp::Cos, u), dx),
                UnaryOp::Cos => neg(mul(unary(UnaryOp::Sin, u), dx)),
                UnaryOp::Erfc => {
                    let k = -2.0 / std::f64::consts::PI.sqrt();
                    let gauss = unary(UnaryOp::Exp, neg(mul(u.clone(), u)));
                    mul(Expr::Const(k), mul(gauss, dx))
                }
            }
        }
        Expr::Binary(op, l, r) => {
            let dl = differentiate(l, var);
            let dr = differentiate(r, var);
            let (a, b) = ((**l).clone(), (**r).clone());
            match op {
                BinaryOp::Add => add(dl, dr),
                BinaryOp::Sub => sub(dl, dr),
                BinaryOp::Mul => add(mul(dl, b), mul(a, dr)),
                BinaryOp::Div => sub(div(dl, b.clone()), div(mul(a, dr), mul(b.clone(), b))),
                BinaryOp::Pow => {
                    if dr.is_const(0.0) {
                        // d(a^c) = c·a^(c-1)·da
                        let reduced = match constant(&b) {
                            Some(c) => Expr::Const(c - 1.0),
                            None => sub(b.clone(), Expr::Const(1.0)),
                        };
                        mul(mul(b, pow(a, reduced)), dl)
                    } else {
                        // d(a^b) = a^b·(db·log a + b·da/a)
                        let log_term = mul(dr, unary(UnaryOp::Log, a.clone()));
                        let base_term = div(mul(b, dl), a);
                        mul(e.clone(), add(log_term, base_term))
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------- Lagrangian

/// An integrand `F(t, y, v)` together with its first and second partials
/// in `y` and `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lagrangian {
    pub f: Expr,
    pub d2: Expr,
    pub d3: Expr,
    pub d22: Expr,
    pub d23: Expr,
    pub d33: Expr,
}

/// All partials of a Lagrangian at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Partials {
    pub f: f64,
    pub d2: f64,
    pub d3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SecondPartials {
    pub d22: f64,
    pub d23: f64,
    pub d33: f64,
}

impl Lagrangian {
    pub fn new(f: Expr) -> Self {
        let d2 = differentiate(&f, Var::Y);
        let d3 = differentiate(&f, Var::V);
        let d22 = differentiate(&d2, Var::Y);
        let d23 = differentiate(&d2, Var::V);
        let d33 = differentiate(&d3, Var::V);
        Self {
            f,
            d2,
            d3,
            d22,
            d23,
            d33,
        }
    }

    pub fn parse(src: &str) -> Result<Self, ParseError> {
        parse(src).map(Self::new)
    }

    pub fn partials(&self, t: f64, y: f64, v: f64) -> Result<Partials, EvalError> {
        Ok(Partials {
            f: evaluate(&self.f, t, y, v)?,
            d2: evaluate(&self.d2, t, y, v)?,
            d3: evaluate(&self.d3, t, y, v)?,
        })
    }

    pub fn second_partials(&self, t: f64, y: f64, v: f64) -> Result<SecondPartials, EvalError> {
        Ok(SecondPartials {
            d22: evaluate(&self.d22, t, y, v)?,
            d23: evaluate(&self.d23, t, y, v)?,
            d33: evaluate(&self.d33, t, y, v)?,
        })
    }

    /// True when all second partials are the constant zero, i.e. the
    /// integrand is affine in `(y, v)`.
    pub fn is_affine(&self) -> bool {
        self.d22.is_const(0.0) && self.d23.is_const(0.0) && self.d33.is_const(0.0)
    }
}
