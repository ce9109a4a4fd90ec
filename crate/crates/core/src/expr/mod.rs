//! Closed-form scalar expressions over chart coordinates.
//!
//! An [`Expr`] is an immutable tree (subtrees shared through `Arc`, so values
//! are cheap to clone and safe to evaluate from many threads). The grammar is
//! a deliberate closed-form subset — no piecewise, no abs — so everything
//! built from it is smooth on its domain. Integer and ratio literals stay
//! exact rationals; floats appear only at evaluation time.

mod parse;
mod simplify;

pub use parse::{parse, ParseError};

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::fmath;
use crate::scalar::Scalar;

/// A point of the chart domain; `coords.len()` is the chart dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

impl From<&[f64]> for Point {
    fn from(xs: &[f64]) -> Self {
        Point { coords: xs.to_vec() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    /// `atan2(y, x)`; produced programmatically, not by the parser.
    Atan2,
}

/// Expression tree node. Construction helpers and operator overloads below
/// keep client code close to the formulas.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Expr {
    Const(Scalar),
    /// Coordinate variable by index (0-based).
    Var(usize),
    Unary(UnaryOp, Arc<Expr>),
    Binary(BinaryOp, Arc<Expr>, Arc<Expr>),
    /// Power with constant integer exponent.
    Pow(Arc<Expr>, i32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalErrorKind {
    DivisionByZero,
    DomainError,
}

/// Evaluation failure, carrying the offending node rendered for diagnostics.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{kind:?} at `{location}`")]
pub struct EvalError {
    pub kind: EvalErrorKind,
    pub location: String,
}

impl EvalError {
    fn at(kind: EvalErrorKind, node: &Expr) -> Self {
        let mut location = node.to_string();
        if location.len() > 80 {
            location.truncate(77);
            location.push_str("...");
        }
        EvalError { kind, location }
    }
}

impl Expr {
    pub fn int(n: i64) -> Expr {
        Expr::Const(Scalar::int(n))
    }

    pub fn ratio(num: i64, den: i64) -> Expr {
        Expr::Const(Scalar::ratio(num, den))
    }

    pub fn float(f: f64) -> Expr {
        Expr::Const(Scalar::float(f))
    }

    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn zero() -> Expr {
        Expr::Const(Scalar::ZERO)
    }

    pub fn one() -> Expr {
        Expr::Const(Scalar::ONE)
    }

    pub fn is_zero_const(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_zero())
    }

    pub fn is_one_const(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_one())
    }

    fn unary(op: UnaryOp, e: Expr) -> Expr {
        Expr::Unary(op, Arc::new(e))
    }

    pub fn neg(self) -> Expr {
        Expr::unary(UnaryOp::Neg, self)
    }

    pub fn sin(self) -> Expr {
        Expr::unary(UnaryOp::Sin, self)
    }

    pub fn cos(self) -> Expr {
        Expr::unary(UnaryOp::Cos, self)
    }

    pub fn exp(self) -> Expr {
        Expr::unary(UnaryOp::Exp, self)
    }

    pub fn ln(self) -> Expr {
        Expr::unary(UnaryOp::Ln, self)
    }

    pub fn sqrt(self) -> Expr {
        Expr::unary(UnaryOp::Sqrt, self)
    }

    pub fn atan2(y: Expr, x: Expr) -> Expr {
        Expr::Binary(BinaryOp::Atan2, Arc::new(y), Arc::new(x))
    }

    pub fn powi(self, k: i32) -> Expr {
        match k {
            0 => Expr::one(),
            1 => self,
            _ => Expr::Pow(Arc::new(self), k),
        }
    }

    /// Number of distinct nodes in the shared representation.
    pub fn dag_size(&self) -> usize {
        fn walk(e: &Expr, seen: &mut BTreeMap<usize, ()>) -> usize {
            let key = e as *const Expr as usize;
            if seen.insert(key, ()).is_some() {
                return 0;
            }
            1 + match e {
                Expr::Const(_) | Expr::Var(_) => 0,
                Expr::Unary(_, a) | Expr::Pow(a, _) => walk(a, seen),
                Expr::Binary(_, a, b) => walk(a, seen) + walk(b, seen),
            }
        }
        walk(self, &mut BTreeMap::new())
    }

    /// Replace each coordinate variable by the given expression (chart
    /// substitution; `replacements[i]` stands in for variable `i`).
    pub fn substitute(&self, replacements: &[Expr]) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Var(i) => replacements[*i].clone(),
            Expr::Unary(op, a) => Expr::Unary(*op, Arc::new(a.substitute(replacements))),
            Expr::Binary(op, a, b) => Expr::Binary(
                *op,
                Arc::new(a.substitute(replacements)),
                Arc::new(b.substitute(replacements)),
            ),
            Expr::Pow(a, k) => Expr::Pow(Arc::new(a.substitute(replacements)), *k),
        }
    }

    /// Largest variable index used, or None for constants.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Unary(_, a) | Expr::Pow(a, _) => a.max_var(),
            Expr::Binary(_, a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    /// Evaluate at a point. Fails on division by an exact zero, `ln` of a
    /// non-positive value or `sqrt` of a negative value.
    pub fn eval(&self, p: &Point) -> Result<f64, EvalError> {
        let mut cache = EvalCache::new();
        self.eval_cached(&p.coords, &mut cache)
    }

    /// Evaluate with a memo table shared across expressions of one point.
    /// Only `Arc`-held interior nodes are memoized (keyed by allocation
    /// identity) and the cache pins them alive, so entries can never alias
    /// recycled addresses; the root itself is not cached.
    pub fn eval_cached(&self, coords: &[f64], cache: &mut EvalCache) -> Result<f64, EvalError> {
        self.eval_node(coords, cache)
    }

    fn eval_arc(node: &Arc<Expr>, coords: &[f64], cache: &mut EvalCache) -> Result<f64, EvalError> {
        let key = Arc::as_ptr(node) as usize;
        if let Some(v) = cache.memo.get(&key) {
            return v.clone();
        }
        let out = node.eval_node(coords, cache);
        cache.pinned.push(node.clone());
        cache.memo.insert(key, out.clone());
        out
    }

    fn eval_node(&self, coords: &[f64], cache: &mut EvalCache) -> Result<f64, EvalError> {
        match self {
            Expr::Const(c) => Ok(c.as_f64()),
            Expr::Var(i) => Ok(coords[*i]),
            Expr::Unary(op, a) => {
                let x = Expr::eval_arc(a, coords, cache)?;
                match op {
                    UnaryOp::Neg => Ok(-x),
                    UnaryOp::Sin => Ok(fmath::sin(x)),
                    UnaryOp::Cos => Ok(fmath::cos(x)),
                    UnaryOp::Exp => Ok(fmath::exp(x)),
                    UnaryOp::Ln => {
                        if x <= 0.0 {
                            Err(EvalError::at(EvalErrorKind::DomainError, self))
                        } else {
                            Ok(fmath::ln(x))
                        }
                    }
                    UnaryOp::Sqrt => {
                        if x < 0.0 {
                            Err(EvalError::at(EvalErrorKind::DomainError, self))
                        } else {
                            Ok(fmath::sqrt(x))
                        }
                    }
                }
            }
            Expr::Binary(op, a, b) => {
                let x = Expr::eval_arc(a, coords, cache)?;
                let y = Expr::eval_arc(b, coords, cache)?;
                match op {
                    BinaryOp::Add => Ok(x + y),
                    BinaryOp::Sub => Ok(x - y),
                    BinaryOp::Mul => Ok(x * y),
                    BinaryOp::Div => {
                        if y == 0.0 {
                            Err(EvalError::at(EvalErrorKind::DivisionByZero, self))
                        } else {
                            Ok(x / y)
                        }
                    }
                    BinaryOp::Atan2 => Ok(fmath::atan2(x, y)),
                }
            }
            Expr::Pow(a, k) => {
                let x = Expr::eval_arc(a, coords, cache)?;
                if x == 0.0 && *k < 0 {
                    Err(EvalError::at(EvalErrorKind::DivisionByZero, self))
                } else {
                    Ok(fmath::powi(x, *k))
                }
            }
        }
    }

    /// Exact partial derivative with respect to coordinate `var`.
    pub fn diff(&self, var: usize) -> Expr {
        let mut memo = BTreeMap::new();
        self.diff_memo(var, &mut memo)
    }

    fn diff_memo(&self, var: usize, memo: &mut BTreeMap<usize, Expr>) -> Expr {
        let key = self as *const Expr as usize;
        if let Some(d) = memo.get(&key) {
            return d.clone();
        }
        let d = match self {
            Expr::Const(_) => Expr::zero(),
            Expr::Var(i) => {
                if *i == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Expr::Unary(op, a) => {
                let da = a.diff_memo(var, memo);
                let inner = Expr::clone(a);
                match op {
                    UnaryOp::Neg => da.neg(),
                    UnaryOp::Sin => inner.cos() * da,
                    UnaryOp::Cos => inner.sin().neg() * da,
                    UnaryOp::Exp => inner.exp() * da,
                    UnaryOp::Ln => da / inner,
                    UnaryOp::Sqrt => da / (Expr::int(2) * inner.sqrt()),
                }
            }
            Expr::Binary(op, a, b) => {
                let da = a.diff_memo(var, memo);
                let db = b.diff_memo(var, memo);
                let (ea, eb) = (Expr::clone(a), Expr::clone(b));
                match op {
                    BinaryOp::Add => da + db,
                    BinaryOp::Sub => da - db,
                    BinaryOp::Mul => da * eb.clone() + ea * db,
                    BinaryOp::Div => (da * eb.clone() - ea * db) / eb.powi(2),
                    // d atan2(y, x) = (x dy - y dx) / (x^2 + y^2)
                    BinaryOp::Atan2 => {
                        (eb.clone() * da - ea.clone() * db) / (ea.powi(2) + eb.powi(2))
                    }
                }
            }
            Expr::Pow(a, k) => {
                let da = a.diff_memo(var, memo);
                Expr::int(*k as i64) * Expr::clone(a).powi(*k - 1) * da
            }
        };
        memo.insert(key, d.clone());
        d
    }

    /// Canonical rational-trig normal form; see the `simplify` module.
    pub fn simplify(&self) -> Expr {
        simplify::simplify(self)
    }

    /// Simplify only when the input is small; expanding a large shared DAG
    /// into a canonical polynomial usually grows it and slows evaluation.
    pub fn simplify_small(&self, node_cap: usize) -> Expr {
        if self.dag_size() <= node_cap {
            self.simplify()
        } else {
            self.clone()
        }
    }
}

/// Memo table for [`Expr::eval_cached`], shared across the expressions of one
/// point so common subtrees are evaluated once. Cached nodes are pinned so
/// their addresses stay valid for the cache's lifetime.
#[derive(Default)]
pub struct EvalCache {
    memo: BTreeMap<usize, Result<f64, EvalError>>,
    pinned: Vec<Arc<Expr>>,
}

impl EvalCache {
    pub fn new() -> Self {
        EvalCache::default()
    }
}

impl core::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        if self.is_zero_const() {
            return rhs;
        }
        if rhs.is_zero_const() {
            return self;
        }
        Expr::Binary(BinaryOp::Add, Arc::new(self), Arc::new(rhs))
    }
}

impl core::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        if rhs.is_zero_const() {
            return self;
        }
        Expr::Binary(BinaryOp::Sub, Arc::new(self), Arc::new(rhs))
    }
}

impl core::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        if self.is_zero_const() || rhs.is_zero_const() {
            return Expr::zero();
        }
        if self.is_one_const() {
            return rhs;
        }
        if rhs.is_one_const() {
            return self;
        }
        Expr::Binary(BinaryOp::Mul, Arc::new(self), Arc::new(rhs))
    }
}

impl core::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        if rhs.is_one_const() {
            return self;
        }
        Expr::Binary(BinaryOp::Div, Arc::new(self), Arc::new(rhs))
    }
}

// Rendering: precedence-aware, always re-parseable, and stable enough that
// render -> parse reproduces the tree.

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => 1,
        Expr::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => 2,
        // a ratio literal prints as a division
        Expr::Const(Scalar::Rat(_, d)) if *d != 1 => 2,
        Expr::Unary(UnaryOp::Neg, _) => 3,
        Expr::Pow(..) => 4,
        Expr::Const(c) if c.is_negative() => 3,
        _ => 5,
    }
}

fn write_prec(e: &Expr, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let p = prec(e);
    if p < min {
        write!(f, "(")?;
        write_node(e, f)?;
        write!(f, ")")
    } else {
        write_node(e, f)
    }
}

fn write_node(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        Expr::Const(c) => write!(f, "{}", c),
        Expr::Var(i) => write!(f, "x{}", i + 1),
        Expr::Unary(UnaryOp::Neg, a) => {
            // the grammar binds unary minus tighter than `^`, so anything
            // below atom level needs parentheses after `-`
            write!(f, "-")?;
            write_prec(a, 5, f)
        }
        Expr::Unary(op, a) => {
            let name = match op {
                UnaryOp::Sin => "sin",
                UnaryOp::Cos => "cos",
                UnaryOp::Exp => "exp",
                UnaryOp::Ln => "ln",
                UnaryOp::Sqrt => "sqrt",
                UnaryOp::Neg => unreachable!(),
            };
            write!(f, "{}(", name)?;
            write_node(a, f)?;
            write!(f, ")")
        }
        Expr::Binary(op, a, b) => match op {
            BinaryOp::Add => {
                write_prec(a, 1, f)?;
                write!(f, " + ")?;
                write_prec(b, 2, f)
            }
            BinaryOp::Sub => {
                write_prec(a, 1, f)?;
                write!(f, " - ")?;
                write_prec(b, 2, f)
            }
            BinaryOp::Mul => {
                write_prec(a, 2, f)?;
                write!(f, "*")?;
                write_prec(b, 3, f)
            }
            BinaryOp::Div => {
                write_prec(a, 2, f)?;
                write!(f, "/")?;
                write_prec(b, 3, f)
            }
            BinaryOp::Atan2 => {
                // not part of the surface grammar; render as a call for
                // diagnostics only
                write!(f, "atan2(")?;
                write_node(a, f)?;
                write!(f, ", ")?;
                write_node(b, f)?;
                write!(f, ")")
            }
        },
        Expr::Pow(a, k) => {
            debug_assert!(*k >= 0, "negative powers render as divisions");
            write_prec(a, 5, f)?;
            write!(f, "^{}", k)
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_prec(self, 0, f)
    }
}
