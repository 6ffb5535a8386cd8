//! A small expression language for declaring vector fields `f(y, u)` in text.
//!
//! Grammar, one expression per component, components separated by `;` or newlines:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' integer)?
//! primary := number | y<k> | u<k> | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | exp
//! ```
//!
//! Exponents must be integer literals, optionally signed or parenthesized (`y1^2`, `y1^(-1)`).

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("variable `{name}` at position {pos} exceeds dimension {dimension}")]
    IndexOutOfRange { name: String, pos: usize, dimension: usize },
    #[error("expected {expected} components, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
}

impl Func {
    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
        }
    }
}

/// Expression tree. Variable indices are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Output(usize),
    Input(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Powi(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, y: &[f64], u: &[f64]) -> f64 {
        match self {
            Expr::Const(v) => *v,
            Expr::Output(i) => y[*i],
            Expr::Input(i) => u[*i],
            Expr::Neg(a) => -a.eval(y, u),
            Expr::Add(a, b) => a.eval(y, u) + b.eval(y, u),
            Expr::Sub(a, b) => a.eval(y, u) - b.eval(y, u),
            Expr::Mul(a, b) => a.eval(y, u) * b.eval(y, u),
            Expr::Div(a, b) => a.eval(y, u) / b.eval(y, u),
            Expr::Powi(a, n) => a.eval(y, u).powi(*n),
            Expr::Call(f, a) => f.apply(a.eval(y, u)),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) => write!(f, "{v:?}"),
            Expr::Output(i) => write!(f, "y{}", i + 1),
            Expr::Input(i) => write!(f, "u{}", i + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Powi(a, n) => write!(f, "{a}^({n})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// A parsed vector field: one expression per output component.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldExpr {
    dimension: usize,
    components: Vec<Expr>,
}

impl VectorFieldExpr {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn eval_into(&self, y: &[f64], u: &[f64], out: &mut [f64]) {
        for (o, e) in out.iter_mut().zip(&self.components) {
            *o = e.eval(y, u);
        }
    }

    pub fn eval(&self, y: &[f64], u: &[f64]) -> Vec<f64> {
        self.components.iter().map(|e| e.eval(y, u)).collect()
    }
}

impl fmt::Display for VectorFieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.components.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Parses `source` into an `m`-component vector field over `y1..ym`, `u1..um`.
pub fn parse_vector_field(source: &str, m: usize) -> Result<VectorFieldExpr, ParseError> {
    let mut components = Vec::new();
    let mut start = 0;
    for (i, ch) in source.char_indices().chain(std::iter::once((source.len(), ';'))) {
        if ch == ';' || ch == '\n' {
            let piece = &source[start..i];
            if !piece.trim().is_empty() {
                components.push(Parser::new(piece, start, m).parse_component()?);
            }
            start = i + ch.len_utf8();
        }
    }
    if components.len() != m {
        return Err(ParseError::DimensionMismatch {
            expected: m,
            found: components.len(),
        });
    }
    Ok(VectorFieldExpr {
        dimension: m,
        components,
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Parser<'a> {
    src: &'a str,
    offset: usize,
    pos: usize,
    dimension: usize,
    // (token, absolute position)
    peeked: Option<(Token, usize)>,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, offset: usize, dimension: usize) -> Self {
        Self {
            src,
            offset,
            pos: 0,
            dimension,
            peeked: None,
        }
    }

    fn syntax(&self, pos: usize, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            pos,
            message: message.into(),
        }
    }

    fn lex(&mut self) -> Result<(Token, usize), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let at = self.offset + self.pos;
        let Some(&b) = bytes.get(self.pos) else {
            return Ok((Token::End, at));
        };
        let single = match b {
            b'+' => Some(Token::Plus),
            b'-' => Some(Token::Minus),
            b'*' => Some(Token::Star),
            b'/' => Some(Token::Slash),
            b'^' => Some(Token::Caret),
            b'(' => Some(Token::LParen),
            b')' => Some(Token::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            self.pos += 1;
            return Ok((tok, at));
        }
        if b.is_ascii_digit() || b == b'.' {
            let start = self.pos;
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
            return text
                .parse::<f64>()
                .map(|v| (Token::Number(v), at))
                .map_err(|_| self.syntax(at, format!("malformed number `{text}`")));
        }
        if b.is_ascii_alphabetic() || b == b'_' {
            let start = self.pos;
            while self.pos < bytes.len() && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_') {
                self.pos += 1;
            }
            return Ok((Token::Ident(self.src[start..self.pos].to_string()), at));
        }
        let ch = self.src[self.pos..].chars().next().unwrap_or('?');
        Err(self.syntax(at, format!("unexpected character `{ch}`")))
    }

    fn peek(&mut self) -> Result<&(Token, usize), ParseError> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lex()?);
        }
        Ok(self.peeked.as_ref().unwrap())
    }

    fn next(&mut self) -> Result<(Token, usize), ParseError> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lex(),
        }
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<(), ParseError> {
        let (tok, at) = self.next()?;
        if tok == want {
            Ok(())
        } else {
            Err(self.syntax(at, format!("expected {what}")))
        }
    }

    fn parse_component(mut self) -> Result<Expr, ParseError> {
        let e = self.expr()?;
        let (tok, at) = self.next()?;
        if tok != Token::End {
            return Err(self.syntax(at, "unexpected trailing input"));
        }
        Ok(e)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek()?.0 {
                Token::Plus => {
                    self.next()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Token::Minus => {
                    self.next()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek()?.0 {
                Token::Star => {
                    self.next()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Token::Slash => {
                    self.next()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek()?.0 == Token::Minus {
            self.next()?;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek()?.0 != Token::Caret {
            return Ok(base);
        }
        self.next()?;
        let n = self.integer_exponent()?;
        Ok(Expr::Powi(Box::new(base), n))
    }

    fn integer_exponent(&mut self) -> Result<i32, ParseError> {
        let (tok, at) = self.next()?;
        let (negative, tok, at, closing) = match tok {
            Token::LParen => {
                let (t, a) = self.next()?;
                if t == Token::Minus {
                    let (t, a) = self.next()?;
                    (true, t, a, true)
                } else {
                    (false, t, a, true)
                }
            }
            Token::Minus => {
                let (t, a) = self.next()?;
                (true, t, a, false)
            }
            other => (false, other, at, false),
        };
        let value = match tok {
            Token::Number(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => v as i32,
            _ => return Err(self.syntax(at, "exponent must be an integer literal")),
        };
        if closing {
            self.expect(Token::RParen, "`)` after exponent")?;
        }
        Ok(if negative { -value } else { value })
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let (tok, at) = self.next()?;
        match tok {
            Token::Number(v) => Ok(Expr::Const(v)),
            Token::LParen => {
                let e = self.expr()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(e)
            }
            Token::Ident(name) => self.identifier(name, at),
            Token::End => Err(self.syntax(at, "unexpected end of expression")),
            _ => Err(self.syntax(at, "expected a number, variable, or `(`")),
        }
    }

    fn identifier(&mut self, name: String, at: usize) -> Result<Expr, ParseError> {
        let func = match name.as_str() {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            _ => None,
        };
        if let Some(func) = func {
            self.expect(Token::LParen, "`(` after function name")?;
            let arg = self.expr()?;
            self.expect(Token::RParen, "`)`")?;
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        let (kind, digits) = name.split_at(1);
        let index = match digits.parse::<usize>() {
            Ok(k) if (kind == "y" || kind == "u") && !digits.starts_with('+') => k,
            _ => return Err(ParseError::UnknownIdentifier { name, pos: at }),
        };
        if index == 0 || index > self.dimension {
            return Err(ParseError::IndexOutOfRange {
                name,
                pos: at,
                dimension: self.dimension,
            });
        }
        Ok(if kind == "y" {
            Expr::Output(index - 1)
        } else {
            Expr::Input(index - 1)
        })
    }
}
