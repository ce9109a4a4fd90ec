//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := base ('^' INT)?
//! base   := NUMBER | IDENT | '(' expr ')' | FUNC '(' expr ')' | '-' base
//! FUNC   := sin | cos | exp | ln | sqrt
//! IDENT  := x1..xn | t        (t aliases x1 on 4-dimensional charts)
//! ```
//!
//! Whitespace is insignificant. Errors carry byte offsets.

use alloc::string::{String, ToString};
use alloc::sync::Arc;

use super::{BinaryOp, Expr, UnaryOp};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown variable `{name}` at byte {offset}")]
    UnknownVariable { name: String, offset: usize },
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    n_vars: usize,
}

/// Parse `text` against a chart with `n_vars` coordinates.
pub fn parse(text: &str, n_vars: usize) -> Result<Expr, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        n_vars,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn syntax(&self, msg: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            message: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    acc = Expr::Binary(BinaryOp::Add, Arc::new(acc), Arc::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    acc = Expr::Binary(BinaryOp::Sub, Arc::new(acc), Arc::new(rhs));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    acc = Expr::Binary(BinaryOp::Mul, Arc::new(acc), Arc::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    // fold ratio literals so polynomial coefficients stay exact
                    acc = match (&acc, &rhs) {
                        (Expr::Const(a), Expr::Const(b)) if !b.is_zero() => {
                            match a.div(*b) {
                                Some(c) => Expr::Const(c),
                                None => Expr::Binary(BinaryOp::Div, Arc::new(acc), Arc::new(rhs)),
                            }
                        }
                        _ => Expr::Binary(BinaryOp::Div, Arc::new(acc), Arc::new(rhs)),
                    };
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.base()?;
        if self.eat(b'^') {
            let k = self.int_literal()?;
            return Ok(base.powi(k));
        }
        Ok(base)
    }

    fn int_literal(&mut self) -> Result<i32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.syntax("expected integer exponent"));
        }
        let text = core::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<i32>().map_err(|_| ParseError::Syntax {
            offset: start,
            message: "integer exponent out of range".to_string(),
        })
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                let inner = self.base()?;
                // fold negated literals
                Ok(match inner {
                    Expr::Const(c) => Expr::Const(c.neg()),
                    other => Expr::Unary(UnaryOp::Neg, Arc::new(other)),
                })
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            _ => Err(self.syntax("expected number, variable, function or `(`")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let mut is_float = false;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            is_float = true;
            self.pos += 1;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if self.pos < self.src.len() && (self.src[self.pos] | 32) == b'e' {
            let mut probe = self.pos + 1;
            if probe < self.src.len() && (self.src[probe] == b'+' || self.src[probe] == b'-') {
                probe += 1;
            }
            if probe < self.src.len() && self.src[probe].is_ascii_digit() {
                is_float = true;
                self.pos = probe;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let text = core::str::from_utf8(&self.src[start..self.pos]).unwrap();
        if text.is_empty() || text == "." {
            return Err(ParseError::Syntax {
                offset: start,
                message: "malformed number".to_string(),
            });
        }
        if is_float {
            let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                message: "malformed number".to_string(),
            })?;
            Ok(Expr::Const(Scalar::float(v)))
        } else {
            match text.parse::<i64>() {
                Ok(n) => Ok(Expr::Const(Scalar::int(n))),
                // integer too large for exact arithmetic
                Err(_) => {
                    let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                        offset: start,
                        message: "malformed number".to_string(),
                    })?;
                    Ok(Expr::Const(Scalar::float(v)))
                }
            }
        }
    }

    fn ident(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = core::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match name {
            "sin" | "cos" | "exp" | "ln" | "sqrt" => {
                let op = match name {
                    "sin" => UnaryOp::Sin,
                    "cos" => UnaryOp::Cos,
                    "exp" => UnaryOp::Exp,
                    "ln" => UnaryOp::Ln,
                    _ => UnaryOp::Sqrt,
                };
                if !self.eat(b'(') {
                    return Err(self.syntax("expected `(` after function name"));
                }
                let arg = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                Ok(Expr::Unary(op, Arc::new(arg)))
            }
            "t" if self.n_vars == 4 => Ok(Expr::Var(0)),
            _ => {
                if let Some(rest) = name.strip_prefix('x') {
                    if let Ok(i) = rest.parse::<usize>() {
                        if i >= 1 && i <= self.n_vars {
                            return Ok(Expr::Var(i - 1));
                        }
                    }
                }
                Err(ParseError::UnknownVariable {
                    name: name.to_string(),
                    offset: start,
                })
            }
        }
    }
}
