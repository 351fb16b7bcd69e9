//! Expression language for user-defined Finsler functions.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          right-associative
//! primary := number | x<k> | y<k> | func '(' expr ')' | '(' expr ')'
//! func    := sqrt | exp | log | sin | cos
//! ```
//!
//! Variables are 1-based in source text (`x1`, `y3`) and 0-based in the AST.

use std::fmt;

use thiserror::Error;

use crate::jet::JetError;
use crate::scalar::Scalar;

const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
}

impl Func {
    pub const ALL: [Func; 5] = [Func::Sqrt, Func::Exp, Func::Log, Func::Sin, Func::Cos];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// Expression tree. Numeric literals are finite and non-negative; negation is
/// always an explicit [`Expr::Neg`] node.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    X(usize),
    Y(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("variable {0} is outside the metric dimension")]
    UnboundVariable(String),
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// Whether an expression is the Finsler function `F` or its square `F²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Declared {
    Length,
    Energy,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at line {line}, column {column} (offset {offset})")]
pub struct ParseError {
    pub message: String,
    pub offset: usize,
    pub line: usize,
    pub column: usize,
}

#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn num(v: f64) -> Expr {
        if v < 0.0 {
            Expr::Neg(Box::new(Expr::Num(-v)))
        } else {
            Expr::Num(v)
        }
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Div(Box::new(a), Box::new(b))
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        Expr::Pow(Box::new(a), Box::new(b))
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Box::new(a))
    }

    pub fn square(a: Expr) -> Expr {
        Expr::pow(a, Expr::Num(2.0))
    }

    /// Sum of terms; an empty sum is `0`.
    pub fn sum(terms: impl IntoIterator<Item = Expr>) -> Expr {
        terms.into_iter().reduce(Expr::add).unwrap_or(Expr::Num(0.0))
    }

    /// Largest x and y indices referenced, as counts (max index + 1).
    pub fn variable_extent(&self) -> (usize, usize) {
        let mut ext = (0, 0);
        self.visit(&mut |e| match e {
            Expr::X(i) => ext.0 = ext.0.max(i + 1),
            Expr::Y(i) => ext.1 = ext.1.max(i + 1),
            _ => {}
        });
        ext
    }

    pub fn depends_on_y(&self) -> bool {
        self.variable_extent().1 > 0
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Num(_) | Expr::X(_) | Expr::Y(_) => {}
            Expr::Neg(a) | Expr::Call(_, a) => a.visit(f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    /// Value of a variable-free expression.
    pub fn constant_value(&self) -> Option<f64> {
        let (nx, ny) = self.variable_extent();
        if nx > 0 || ny > 0 {
            return None;
        }
        self.eval::<f64>(&[], &[], &0.0).ok()
    }

    /// Replaces `x_i`/`y_i` by `x_{i+shift}`/`y_{i+shift}`.
    pub fn shift_variables(&self, shift: usize) -> Expr {
        let s = |e: &Expr| Box::new(e.shift_variables(shift));
        match self {
            Expr::Num(v) => Expr::Num(*v),
            Expr::X(i) => Expr::X(i + shift),
            Expr::Y(i) => Expr::Y(i + shift),
            Expr::Neg(a) => Expr::Neg(s(a)),
            Expr::Call(f, a) => Expr::Call(*f, s(a)),
            Expr::Add(a, b) => Expr::Add(s(a), s(b)),
            Expr::Sub(a, b) => Expr::Sub(s(a), s(b)),
            Expr::Mul(a, b) => Expr::Mul(s(a), s(b)),
            Expr::Div(a, b) => Expr::Div(s(a), s(b)),
            Expr::Pow(a, b) => Expr::Pow(s(a), s(b)),
        }
    }

    /// Evaluates over any [`Scalar`]; `proto` supplies the shape of constants.
    pub fn eval<S: Scalar>(&self, x: &[S], y: &[S], proto: &S) -> Result<S, EvalError> {
        Ok(match self {
            Expr::Num(v) => proto.lift(*v),
            Expr::X(i) => x.get(*i).cloned().ok_or_else(|| EvalError::UnboundVariable(format!("x{}", i + 1)))?,
            Expr::Y(i) => y.get(*i).cloned().ok_or_else(|| EvalError::UnboundVariable(format!("y{}", i + 1)))?,
            Expr::Neg(a) => a.eval(x, y, proto)?.neg(),
            Expr::Add(a, b) => a.eval(x, y, proto)?.add(&b.eval(x, y, proto)?),
            Expr::Sub(a, b) => a.eval(x, y, proto)?.sub(&b.eval(x, y, proto)?),
            Expr::Mul(a, b) => a.eval(x, y, proto)?.mul(&b.eval(x, y, proto)?),
            Expr::Div(a, b) => a.eval(x, y, proto)?.div(&b.eval(x, y, proto)?)?,
            Expr::Pow(a, b) => {
                let base = a.eval(x, y, proto)?;
                match b.constant_value() {
                    Some(p) if p.fract() == 0.0 && p.abs() <= 64.0 => base.powi(p as i32)?,
                    Some(p) => base.powf(p)?,
                    None => {
                        let exponent = b.eval(x, y, proto)?;
                        exponent.mul(&base.ln()?).exp()
                    }
                }
            }
            Expr::Call(f, a) => {
                let v = a.eval(x, y, proto)?;
                match f {
                    Func::Sqrt => v.sqrt()?,
                    Func::Exp => v.exp(),
                    Func::Log => v.ln()?,
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                }
            }
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }
}

/// Source text that parses back to the same tree.
pub fn unparse(expr: &Expr) -> String {
    expr.to_string()
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool| -> fmt::Result {
            if parens {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::X(i) => write!(f, "x{}", i + 1),
            Expr::Y(i) => write!(f, "y{}", i + 1),
            Expr::Neg(a) => {
                write!(f, "-")?;
                wrap(f, a, a.precedence() < 3)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Pow(a, b) => {
                wrap(f, a, a.precedence() <= 4)?;
                write!(f, "^")?;
                wrap(f, b, b.precedence() < 3)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                let p = self.precedence();
                let op = match self {
                    Expr::Add(..) => " + ",
                    Expr::Sub(..) => " - ",
                    Expr::Mul(..) => "*",
                    _ => "/",
                };
                wrap(f, a, a.precedence() < p)?;
                write!(f, "{op}")?;
                wrap(f, b, b.precedence() <= p)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Token, usize)>, ParseError> {
        let mut lexer = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let (tok, at) = lexer.next_token()?;
            let end = tok == Token::End;
            out.push((tok, at));
            if end {
                return Ok(out);
            }
        }
    }

    fn next_token(&mut self) -> Result<(Token, usize), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = bytes.get(self.pos) else {
            return Ok((Token::End, start));
        };
        if c.is_ascii_digit() || c == b'.' {
            while self.pos < bytes.len() && (bytes[self.pos].is_ascii_digit() || bytes[self.pos] == b'.') {
                self.pos += 1;
            }
            if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
                let mut p = self.pos + 1;
                if p < bytes.len() && (bytes[p] == b'+' || bytes[p] == b'-') {
                    p += 1;
                }
                if p < bytes.len() && bytes[p].is_ascii_digit() {
                    while p < bytes.len() && bytes[p].is_ascii_digit() {
                        p += 1;
                    }
                    self.pos = p;
                }
            }
            let text = &self.src[start..self.pos];
            let value: f64 = text
                .parse()
                .map_err(|_| error_at(self.src, start, format!("malformed number '{text}'")))?;
            if !value.is_finite() {
                return Err(error_at(self.src, start, format!("number '{text}' is out of range")));
            }
            return Ok((Token::Num(value), start));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < bytes.len() && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_') {
                self.pos += 1;
            }
            return Ok((Token::Ident(self.src[start..self.pos].to_string()), start));
        }
        self.pos += 1;
        match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => Ok((Token::Op(c as char), start)),
            b'(' => Ok((Token::LParen, start)),
            b')' => Ok((Token::RParen, start)),
            _ => {
                let ch = self.src[start..].chars().next().unwrap_or('?');
                Err(error_at(self.src, start, format!("unexpected character '{ch}'")))
            }
        }
    }
}

fn error_at(src: &str, offset: usize, message: String) -> ParseError {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    ParseError { message, offset, line, column }
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<(Token, usize)>,
    pos: usize,
    depth: usize,
}

/// Parses expression source text into an [`Expr`] without semantic checks.
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    if src.trim().is_empty() {
        return Err(error_at(src, 0, "empty expression".into()));
    }
    let tokens = Lexer::tokens(src)?;
    let mut parser = Parser { src, tokens, pos: 0, depth: 0 };
    let expr = parser.expr()?;
    match parser.peek() {
        Token::End => Ok(expr),
        tok => Err(parser.error(format!("unexpected {}", describe(tok)))),
    }
}

fn describe(tok: &Token) -> String {
    match tok {
        Token::Num(v) => format!("number {v}"),
        Token::Ident(s) => format!("identifier '{s}'"),
        Token::Op(c) => format!("'{c}'"),
        Token::LParen => "'('".into(),
        Token::RParen => "')'".into(),
        Token::End => "end of input".into(),
    }
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> (Token, usize) {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: String) -> ParseError {
        error_at(self.src, self.offset(), message)
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error("expression nested too deeply".into()));
        }
        Ok(())
    }

    /// Operand following a binary operator at `op_offset`.
    fn operand_after(&mut self, op: char, op_offset: usize, next: fn(&mut Self) -> Result<Expr, ParseError>) -> Result<Expr, ParseError> {
        if *self.peek() == Token::End {
            return Err(error_at(self.src, op_offset, format!("missing operand after '{op}'")));
        }
        next(self)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let mut lhs = self.term()?;
        while let Token::Op(op @ ('+' | '-')) = *self.peek() {
            let (_, at) = self.bump();
            let rhs = self.operand_after(op, at, Self::term)?;
            lhs = if op == '+' { Expr::add(lhs, rhs) } else { Expr::sub(lhs, rhs) };
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Token::Op(op @ ('*' | '/')) = *self.peek() {
            let (_, at) = self.bump();
            let rhs = self.operand_after(op, at, Self::unary)?;
            lhs = if op == '*' { Expr::mul(lhs, rhs) } else { Expr::div(lhs, rhs) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Token::Op('-') {
            let (_, at) = self.bump();
            self.enter()?;
            let inner = self.operand_after('-', at, Self::unary)?;
            self.depth -= 1;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if *self.peek() == Token::Op('^') {
            let (_, at) = self.bump();
            self.enter()?;
            let exponent = self.operand_after('^', at, Self::unary)?;
            self.depth -= 1;
            return Ok(Expr::pow(base, exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let at = self.offset();
        match self.bump().0 {
            Token::Num(v) => Ok(Expr::Num(v)),
            Token::Ident(name) => self.identifier(&name, at),
            Token::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            tok => Err(error_at(self.src, at, format!("expected an operand, found {}", describe(&tok)))),
        }
    }

    fn identifier(&mut self, name: &str, at: usize) -> Result<Expr, ParseError> {
        if let Some(func) = Func::from_name(name) {
            if *self.peek() != Token::LParen {
                return Err(self.error(format!("expected '(' after '{name}'")));
            }
            self.bump();
            let arg = self.expr()?;
            self.expect_rparen()?;
            return Ok(Expr::call(func, arg));
        }
        let (head, digits) = name.split_at(1);
        let index = if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) && !digits.starts_with('0') {
            digits.parse::<usize>().ok()
        } else {
            None
        };
        match (head, index) {
            ("x", Some(k)) => Ok(Expr::X(k - 1)),
            ("y", Some(k)) => Ok(Expr::Y(k - 1)),
            _ => Err(error_at(self.src, at, format!("unknown identifier '{name}'"))),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Token::RParen => {
                self.bump();
                Ok(())
            }
            tok => Err(self.error(format!("expected ')', found {}", describe(tok)))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(parse_expr("-x1^2").unwrap(), Expr::Neg(Box::new(Expr::square(Expr::X(0)))));
        assert_eq!(
            parse_expr("2^3^2").unwrap().constant_value(),
            Some(512.0)
        );
        assert_eq!(parse_expr("8/4/2").unwrap().constant_value(), Some(1.0));
        assert_eq!(parse_expr("1 - 2 - 3").unwrap().constant_value(), Some(-4.0));
        assert_eq!(parse_expr("2^-1").unwrap().constant_value(), Some(0.5));
        assert_eq!(parse_expr("2*-3").unwrap().constant_value(), Some(-6.0));
    }

    #[test]
    fn randers_type_source() {
        let e = parse_expr("sqrt(y1^2 + y2^2 + y3^2) + 0.1*y1").unwrap();
        assert_eq!(e.variable_extent(), (0, 3));
        let v = e.eval::<f64>(&[0.0; 3], &[1.0, 0.0, 0.0], &0.0).unwrap();
        assert!((v - 1.1).abs() < 1e-15);
    }

    #[test]
    fn error_positions() {
        let err = parse_expr("sqrt(y1^2 +").unwrap_err();
        assert_eq!(err.offset, 10);
        assert_eq!((err.line, err.column), (1, 11));
        let err = parse_expr("y1 + z2").unwrap_err();
        assert!(err.message.contains("unknown identifier"));
        assert_eq!(err.offset, 5);
        let err = parse_expr("y1 +\n (y2 $ 1)").unwrap_err();
        assert_eq!((err.line, err.column), (2, 6));
        assert!(parse_expr("x0").is_err());
        assert!(parse_expr("   ").is_err());
        assert!(parse_expr("1e999").is_err());
        assert!(parse_expr("(y1").is_err());
        assert!(parse_expr("sqrt y1").is_err());
    }

    #[test]
    fn deep_nesting_is_rejected_not_overflowed() {
        let src = "(".repeat(100_000) + "1" + &")".repeat(100_000);
        assert!(parse_expr(&src).is_err());
        let src = "-".repeat(100_000) + "1";
        assert!(parse_expr(&src).is_err());
        let src = "2^".repeat(100_000) + "1";
        assert!(parse_expr(&src).is_err());
    }

    #[test]
    fn unparse_minimal_parentheses() {
        for src in ["(x1 + y2)*y3", "x1 - (y1 - y2)", "(-x1)^2", "-x1^2", "x1^y1^2", "(x1^y1)^2", "y1/(y2*y3)", "--y1"] {
            let e = parse_expr(src).unwrap();
            assert_eq!(parse_expr(&unparse(&e)).unwrap(), e, "{src} -> {}", unparse(&e));
        }
        assert_eq!(unparse(&parse_expr("(x1 + y2)*y3").unwrap()), "(x1 + y2)*y3");
    }

    #[test]
    fn unbound_variable() {
        let e = parse_expr("y4").unwrap();
        assert!(matches!(e.eval::<f64>(&[0.0; 3], &[1.0; 3], &0.0), Err(EvalError::UnboundVariable(_))));
    }
}
