//! A small arithmetic grammar for rate and coefficient functions.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?          right associative
//! primary := number | var | func '(' args ')' | '(' expr ')'
//! ```
//!
//! Unary minus binds looser than `^`, so `-x^2` is `-(x^2)` and `2^-1` is
//! `0.5`. Exactly one free variable is accepted; its name is chosen by the
//! caller (`i` for chains, `x` for diffusions, `r` for radial profiles).

use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::numerics::special::gamma_fn;
use crate::{Error, Result};

/// What went wrong while parsing, with the character offset of the problem.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} at position {pos}")]
pub struct ParseError {
    pub pos: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character `{0}`")]
    UnexpectedChar(char),
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unexpected token `{0}`")]
    UnexpectedToken(String),
    #[error("malformed number `{0}`")]
    BadNumber(String),
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("function `{name}` takes {expected} argument(s), got {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func1 {
    Exp,
    Log,
    Sqrt,
    Abs,
    Gamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func2 {
    Pow,
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call1(Func1, Box<Expr>),
    Call2(Func2, Box<Expr>, Box<Expr>),
}

impl Func1 {
    fn name(self) -> &'static str {
        match self {
            Func1::Exp => "exp",
            Func1::Log => "log",
            Func1::Sqrt => "sqrt",
            Func1::Abs => "abs",
            Func1::Gamma => "gamma",
        }
    }
}

impl Func2 {
    fn name(self) -> &'static str {
        match self {
            Func2::Pow => "pow",
            Func2::Min => "min",
            Func2::Max => "max",
        }
    }
}

impl Expr {
    pub fn eval(&self, v: f64) -> f64 {
        match self {
            Expr::Num(c) => *c,
            Expr::Var => v,
            Expr::Neg(e) => -e.eval(v),
            Expr::Bin(op, l, r) => {
                let (a, b) = (l.eval(v), r.eval(v));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => pow(a, b),
                }
            }
            Expr::Call1(f, e) => {
                let a = e.eval(v);
                match f {
                    Func1::Exp => a.exp(),
                    Func1::Log => a.ln(),
                    Func1::Sqrt => a.sqrt(),
                    Func1::Abs => a.abs(),
                    Func1::Gamma => gamma_fn(a).unwrap_or(f64::NAN),
                }
            }
            Expr::Call2(f, l, r) => {
                let (a, b) = (l.eval(v), r.eval(v));
                match f {
                    Func2::Pow => pow(a, b),
                    Func2::Min => a.min(b),
                    Func2::Max => a.max(b),
                }
            }
        }
    }

    fn substitute(&self, with: &Expr) -> Expr {
        match self {
            Expr::Num(c) => Expr::Num(*c),
            Expr::Var => with.clone(),
            Expr::Neg(e) => Expr::Neg(Box::new(e.substitute(with))),
            Expr::Bin(op, l, r) => Expr::Bin(*op, Box::new(l.substitute(with)), Box::new(r.substitute(with))),
            Expr::Call1(f, e) => Expr::Call1(*f, Box::new(e.substitute(with))),
            Expr::Call2(f, l, r) => Expr::Call2(*f, Box::new(l.substitute(with)), Box::new(r.substitute(with))),
        }
    }

    /// True when the expression does not mention the variable.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::Var => false,
            Expr::Neg(e) | Expr::Call1(_, e) => e.is_constant(),
            Expr::Bin(_, l, r) | Expr::Call2(_, l, r) => l.is_constant() && r.is_constant(),
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, var: &str) -> fmt::Result {
        match self {
            Expr::Num(c) => write!(f, "{c}"),
            Expr::Var => f.write_str(var),
            Expr::Neg(e) => {
                f.write_str("(-")?;
                e.write(f, var)?;
                f.write_str(")")
            }
            Expr::Bin(op, l, r) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                f.write_str("(")?;
                l.write(f, var)?;
                f.write_str(sym)?;
                r.write(f, var)?;
                f.write_str(")")
            }
            Expr::Call1(func, e) => {
                write!(f, "{}(", func.name())?;
                e.write(f, var)?;
                f.write_str(")")
            }
            Expr::Call2(func, l, r) => {
                write!(f, "{}(", func.name())?;
                l.write(f, var)?;
                f.write_str(",")?;
                r.write(f, var)?;
                f.write_str(")")
            }
        }
    }
}

/// Integer exponents go through `powi` so that `(-2)^3` is `-8` rather than NaN.
fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

/// A parsed function of one variable, keeping its source text.
#[derive(Debug, Clone)]
pub struct RateFunction {
    text: String,
    var: String,
    expr: Expr,
}

impl RateFunction {
    pub fn parse(text: &str, var: &str) -> Result<Self> {
        let expr = Parser::new(text, var)
            .parse_all()
            .map_err(|source| Error::Parse {
                text: text.to_string(),
                source,
            })?;
        Ok(RateFunction {
            text: text.to_string(),
            var: var.to_string(),
            expr,
        })
    }

    /// A constant function, useful for building specs in code.
    pub fn constant(c: f64, var: &str) -> Self {
        RateFunction {
            text: format!("{c}"),
            var: var.to_string(),
            expr: Expr::Num(c),
        }
    }

    #[inline]
    pub fn eval(&self, v: f64) -> f64 {
        self.expr.eval(v)
    }

    /// Evaluates and rejects NaN or infinite results.
    pub fn eval_finite(&self, v: f64) -> Result<f64> {
        let y = self.eval(v);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::NonFinite {
                value: y,
                at: format!("{} at {}={v}", self.text, self.var),
            })
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn var(&self) -> &str {
        &self.var
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn is_constant(&self) -> bool {
        self.expr.is_constant()
    }

    /// Fully parenthesized text that parses back to an identical tree.
    pub fn unparse(&self) -> String {
        self.to_string()
    }

    /// The same function multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let expr = Expr::Bin(BinOp::Mul, Box::new(Expr::Num(s)), Box::new(self.expr.clone()));
        RateFunction {
            text: format!("{s}*({})", self.text),
            var: self.var.clone(),
            expr,
        }
    }
}

impl RateFunction {
    /// `v -> f(v + shift)`.
    pub fn shifted(&self, shift: f64) -> Self {
        let arg = Expr::Bin(BinOp::Add, Box::new(Expr::Var), Box::new(Expr::Num(shift)));
        let expr = self.expr.substitute(&arg);
        RateFunction {
            text: format!("({}) shifted by {shift}", self.text),
            var: self.var.clone(),
            expr,
        }
    }
}

impl fmt::Display for RateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.write(f, &self.var)
    }
}

impl PartialEq for RateFunction {
    fn eq(&self, other: &Self) -> bool {
        self.var == other.var && self.expr == other.expr
    }
}

impl Serialize for RateFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.text)
    }
}

/// Parses `text` as a function of the variable `var`.
pub fn parse_rate_expr(text: &str, var: &str) -> Result<RateFunction> {
    RateFunction::parse(text, var)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "{v}"),
            Tok::Ident(s) => f.write_str(s),
            Tok::Op(c) => write!(f, "{c}"),
            Tok::LParen => f.write_str("("),
            Tok::RParen => f.write_str(")"),
            Tok::Comma => f.write_str(","),
            Tok::End => f.write_str("end of input"),
        }
    }
}

fn tokenize(text: &str) -> std::result::Result<Vec<(usize, Tok)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // An exponent only when digits follow, so `2e` is a number then an identifier.
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let lit: String = chars[start..i].iter().collect();
            let v: f64 = lit.parse().map_err(|_| ParseError {
                pos: start,
                kind: ParseErrorKind::BadNumber(lit.clone()),
            })?;
            out.push((start, Tok::Num(v)));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((start, Tok::Ident(chars[start..i].iter().collect())));
            continue;
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            other => {
                return Err(ParseError {
                    pos: start,
                    kind: ParseErrorKind::UnexpectedChar(other),
                })
            }
        };
        out.push((start, tok));
        i += 1;
    }
    out.push((chars.len(), Tok::End));
    Ok(out)
}

struct Parser<'a> {
    text: &'a str,
    var: &'a str,
    toks: Vec<(usize, Tok)>,
    at: usize,
}

type PResult<T> = std::result::Result<T, ParseError>;

impl<'a> Parser<'a> {
    fn new(text: &'a str, var: &'a str) -> Self {
        Parser {
            text,
            var,
            toks: Vec::new(),
            at: 0,
        }
    }

    fn parse_all(mut self) -> PResult<Expr> {
        self.toks = tokenize(self.text)?;
        let e = self.expr()?;
        match self.peek() {
            Tok::End => Ok(e),
            _ => Err(self.unexpected()),
        }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn unexpected(&self) -> ParseError {
        let kind = match self.peek() {
            Tok::End => ParseErrorKind::UnexpectedEnd,
            t => ParseErrorKind::UnexpectedToken(t.to_string()),
        };
        ParseError {
            pos: self.pos(),
            kind,
        }
    }

    fn expect(&mut self, want: Tok) -> PResult<()> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected())
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        match self.peek() {
            Tok::Op('-') => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> PResult<Expr> {
        let base = self.primary()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if name == self.var {
                    return Ok(Expr::Var);
                }
                let f1 = match name.as_str() {
                    "exp" => Some(Func1::Exp),
                    "log" => Some(Func1::Log),
                    "sqrt" => Some(Func1::Sqrt),
                    "abs" => Some(Func1::Abs),
                    "gamma" => Some(Func1::Gamma),
                    _ => None,
                };
                let f2 = match name.as_str() {
                    "pow" => Some(Func2::Pow),
                    "min" => Some(Func2::Min),
                    "max" => Some(Func2::Max),
                    _ => None,
                };
                if f1.is_none() && f2.is_none() {
                    return Err(ParseError {
                        pos,
                        kind: ParseErrorKind::UnknownIdentifier(name),
                    });
                }
                let mut args = self.args()?;
                let arity = |expected: usize, found: usize| ParseError {
                    pos,
                    kind: ParseErrorKind::Arity {
                        name: name.clone(),
                        expected,
                        found,
                    },
                };
                if let Some(f) = f1 {
                    if args.len() != 1 {
                        return Err(arity(1, args.len()));
                    }
                    Ok(Expr::Call1(f, Box::new(args.remove(0))))
                } else {
                    if args.len() != 2 {
                        return Err(arity(2, args.len()));
                    }
                    let b = args.remove(1);
                    let a = args.remove(0);
                    Ok(Expr::Call2(f2.unwrap(), Box::new(a), Box::new(b)))
                }
            }
            _ => Err(self.unexpected()),
        }
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if *self.peek() == Tok::RParen {
            self.bump();
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                }
                Tok::RParen => {
                    self.bump();
                    return Ok(args);
                }
                _ => return Err(self.unexpected()),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(text: &str, var: &str) -> RateFunction {
        RateFunction::parse(text, var).unwrap()
    }

    fn err(text: &str) -> ParseError {
        match RateFunction::parse(text, "x") {
            Err(Error::Parse { source, .. }) => source,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn constants_and_powers() {
        assert_eq!(f("1", "i").eval(7.0), 1.0);
        assert_eq!(f("i^2", "i").eval(3.0), 9.0);
        assert_eq!(f("exp(-(x/2)^4)", "x").eval(0.0), 1.0);
        assert_eq!(f("2^3^2", "x").eval(0.0), 512.0);
        assert_eq!(f("-x^2", "x").eval(3.0), -9.0);
        assert_eq!(f("2^-1", "x").eval(0.0), 0.5);
        assert_eq!(f("(-2)^3", "x").eval(0.0), -8.0);
    }

    #[test]
    fn precedence_and_functions() {
        assert_eq!(f("1+2*3", "x").eval(0.0), 7.0);
        assert_eq!(f("8/4/2", "x").eval(0.0), 1.0);
        assert_eq!(f("10-4-3", "x").eval(0.0), 3.0);
        assert_eq!(f("max(x, 2) + min(x, 2)", "x").eval(5.0), 7.0);
        assert_eq!(f("pow(abs(x), 0.5)", "x").eval(-4.0), 2.0);
        assert!((f("gamma(0.5)^2", "x").eval(0.0) - std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(f("1.5e2 + 2E-1", "x").eval(0.0), 150.2);
        assert_eq!(f("log(exp(x))", "x").eval(2.5), 2.5);
    }

    #[test]
    fn positioned_errors() {
        assert_eq!(err("1 + ").kind, ParseErrorKind::UnexpectedEnd);
        assert_eq!(err("1 + ").pos, 4);
        let e = err("2 * y");
        assert_eq!(e.pos, 4);
        assert_eq!(e.kind, ParseErrorKind::UnknownIdentifier("y".into()));
        assert!(matches!(err("pow(x)").kind, ParseErrorKind::Arity { expected: 2, found: 1, .. }));
        assert!(matches!(err("exp(x, 1)").kind, ParseErrorKind::Arity { expected: 1, found: 2, .. }));
        assert_eq!(err("x $ 1").kind, ParseErrorKind::UnexpectedChar('$'));
        assert_eq!(err("(x").kind, ParseErrorKind::UnexpectedEnd);
        assert!(matches!(err("x)").kind, ParseErrorKind::UnexpectedToken(_)));
        assert!(matches!(err("1..2").kind, ParseErrorKind::BadNumber(_)));
        assert!(matches!(err("").kind, ParseErrorKind::UnexpectedEnd));
    }

    #[test]
    fn variable_name_is_per_family() {
        assert!(RateFunction::parse("i+1", "x").is_err());
        assert_eq!(f("r*2", "r").eval(1.5), 3.0);
    }

    #[test]
    fn unparse_round_trips() {
        for text in ["-x^2", "2^-x", "(1+abs(x))^2", "-4*x^3", "max(x,1e-300)/3", "1e300*x"] {
            let a = f(text, "x");
            let b = f(&a.unparse(), "x");
            assert_eq!(a, b, "{text} -> {}", a.unparse());
        }
    }

    #[test]
    fn eval_finite_rejects_nan() {
        assert!(f("log(x)", "x").eval_finite(-1.0).is_err());
        assert!(f("1/x", "x").eval_finite(0.0).is_err());
        assert!(f("gamma(x)", "x").eval_finite(-2.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_expr() -> impl Strategy<Value = String> {
            let leaf = prop_oneof![
                (0u32..1000).prop_map(|n| format!("{}", n as f64 / 8.0)),
                Just("x".to_string()),
            ];
            leaf.prop_recursive(4, 32, 2, |inner| {
                prop_oneof![
                    (inner.clone(), inner.clone(), prop::sample::select(vec!["+", "-", "*", "/", "^"]))
                        .prop_map(|(a, b, op)| format!("{a}{op}{b}")),
                    inner.clone().prop_map(|a| format!("-({a})")),
                    (inner.clone(), prop::sample::select(vec!["exp", "log", "sqrt", "abs"]))
                        .prop_map(|(a, f)| format!("{f}({a})")),
                    (inner.clone(), inner, prop::sample::select(vec!["pow", "min", "max"]))
                        .prop_map(|(a, b, f)| format!("{f}({a}, {b})")),
                ]
            })
        }

        proptest! {
            #[test]
            fn parser_is_total(text in "[-+*/^()x0-9a-z., ]{0,24}") {
                // Either a tree or a positioned error; never a panic.
                match RateFunction::parse(&text, "x") {
                    Ok(_) => {}
                    Err(Error::Parse { source, .. }) => prop_assert!(source.pos <= text.chars().count()),
                    Err(other) => prop_assert!(false, "unexpected error {other}"),
                }
            }

            #[test]
            fn round_trip_is_bit_identical(text in arb_expr(), x in -3.0f64..3.0) {
                let a = RateFunction::parse(&text, "x").unwrap();
                let b = RateFunction::parse(&a.unparse(), "x").unwrap();
                let (u, v) = (a.eval(x), b.eval(x));
                prop_assert!(u.to_bits() == v.to_bits() || (u.is_nan() && v.is_nan()), "{text}: {u} vs {v}");
                prop_assert_eq!(a.eval(x).to_bits(), a.eval(x).to_bits());
            }
        }
    }
}
