//! Exact constants: rationals with an `f64` fallback.
//!
//! Integer and ratio literals stay rational through differentiation and
//! simplification, so polynomial normal forms cancel exactly. Arithmetic
//! that overflows `i64` (or mixes in a float) degrades to `f64`.

use core::cmp::Ordering;
use core::fmt;

#[derive(Clone, Copy, Debug)]
pub enum Scalar {
    /// Normalized rational: gcd(num, den) = 1, den > 0.
    Rat(i64, i64),
    F(f64),
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.unsigned_abs(), b.unsigned_abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a as i64
}

impl Scalar {
    pub const ZERO: Scalar = Scalar::Rat(0, 1);
    pub const ONE: Scalar = Scalar::Rat(1, 1);

    pub fn int(n: i64) -> Self {
        Scalar::Rat(n, 1)
    }

    /// Panics if `den == 0`.
    pub fn ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "rational with zero denominator");
        let g = gcd(num, den);
        let s = if den < 0 { -1 } else { 1 };
        Scalar::Rat(s * num / g, s * den / g)
    }

    pub fn float(f: f64) -> Self {
        // normalize -0.0 so canonical forms are unique
        Scalar::F(if f == 0.0 { 0.0 } else { f })
    }

    pub fn as_f64(&self) -> f64 {
        match *self {
            Scalar::Rat(n, d) => n as f64 / d as f64,
            Scalar::F(f) => f,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Scalar::Rat(0, _)) || matches!(self, Scalar::F(f) if *f == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Scalar::Rat(1, 1)) || matches!(self, Scalar::F(f) if *f == 1.0)
    }

    pub fn is_negative(&self) -> bool {
        match *self {
            Scalar::Rat(n, _) => n < 0,
            Scalar::F(f) => f < 0.0,
        }
    }

    fn rat_op(
        a: (i64, i64),
        b: (i64, i64),
        f: impl Fn(i64, i64, i64, i64) -> Option<(i64, i64)>,
    ) -> Option<Scalar> {
        let (n, d) = f(a.0, a.1, b.0, b.1)?;
        if d == 0 {
            return None;
        }
        let g = gcd(n, d);
        let s = if d < 0 { -1 } else { 1 };
        Some(Scalar::Rat(s * n / g, s * d / g))
    }

    pub fn add(self, other: Scalar) -> Scalar {
        match (self, other) {
            (Scalar::Rat(a, b), Scalar::Rat(c, d)) => Scalar::rat_op((a, b), (c, d), |a, b, c, d| {
                let n = a.checked_mul(d)?.checked_add(c.checked_mul(b)?)?;
                Some((n, b.checked_mul(d)?))
            })
            .unwrap_or_else(|| Scalar::float(self.as_f64() + other.as_f64())),
            _ => Scalar::float(self.as_f64() + other.as_f64()),
        }
    }

    pub fn mul(self, other: Scalar) -> Scalar {
        match (self, other) {
            (Scalar::Rat(a, b), Scalar::Rat(c, d)) => Scalar::rat_op((a, b), (c, d), |a, b, c, d| {
                Some((a.checked_mul(c)?, b.checked_mul(d)?))
            })
            .unwrap_or_else(|| Scalar::float(self.as_f64() * other.as_f64())),
            _ => Scalar::float(self.as_f64() * other.as_f64()),
        }
    }

    pub fn neg(self) -> Scalar {
        match self {
            Scalar::Rat(n, d) => Scalar::Rat(-n, d),
            Scalar::F(f) => Scalar::float(-f),
        }
    }

    /// None when dividing by an exact zero.
    pub fn div(self, other: Scalar) -> Option<Scalar> {
        if other.is_zero() {
            return None;
        }
        match (self, other) {
            (Scalar::Rat(a, b), Scalar::Rat(c, d)) => Some(
                Scalar::rat_op((a, b), (c, d), |a, b, c, d| {
                    Some((a.checked_mul(d)?, b.checked_mul(c)?))
                })
                .unwrap_or_else(|| Scalar::float(self.as_f64() / other.as_f64())),
            ),
            _ => Some(Scalar::float(self.as_f64() / other.as_f64())),
        }
    }

    pub fn powi(self, k: i32) -> Option<Scalar> {
        if k == 0 {
            return Some(Scalar::ONE);
        }
        if self.is_zero() && k < 0 {
            return None;
        }
        let mut acc = Scalar::ONE;
        for _ in 0..k.unsigned_abs() {
            acc = acc.mul(self);
        }
        if k < 0 {
            Scalar::ONE.div(acc)
        } else {
            Some(acc)
        }
    }

    /// Exact square root of a rational if it is a perfect square.
    pub fn exact_sqrt(&self) -> Option<Scalar> {
        if let Scalar::Rat(n, d) = *self {
            if n < 0 {
                return None;
            }
            let isqrt = |v: i64| -> Option<i64> {
                let r = crate::fmath::sqrt(v as f64) as i64;
                for c in r.saturating_sub(1)..=r + 1 {
                    if c >= 0 && c.checked_mul(c) == Some(v) {
                        return Some(c);
                    }
                }
                None
            };
            return Some(Scalar::Rat(isqrt(n)?, isqrt(d)?));
        }
        None
    }
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scalar {}

impl PartialOrd for Scalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scalar {
    fn cmp(&self, other: &Self) -> Ordering {
        // total order for canonical term sorting, not a numeric order
        match (self, other) {
            (Scalar::Rat(a, b), Scalar::Rat(c, d)) => (a, b).cmp(&(c, d)),
            (Scalar::Rat(..), Scalar::F(..)) => Ordering::Less,
            (Scalar::F(..), Scalar::Rat(..)) => Ordering::Greater,
            (Scalar::F(a), Scalar::F(b)) => a.total_cmp(b),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Scalar::Rat(n, 1) => write!(f, "{}", n),
            Scalar::Rat(n, d) => write!(f, "{}/{}", n, d),
            Scalar::F(v) => {
                if v.is_finite() && v == crate::fmath::trunc(v) && crate::fmath::abs(v) < 1e15 {
                    write!(f, "{:.1}", v)
                } else {
                    write!(f, "{}", v)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_arithmetic_is_exact() {
        let a = Scalar::ratio(1, 3);
        let b = Scalar::ratio(1, 6);
        assert_eq!(a.add(b), Scalar::ratio(1, 2));
        assert_eq!(a.mul(b), Scalar::ratio(1, 18));
        assert_eq!(a.div(b).unwrap(), Scalar::int(2));
    }

    #[test]
    fn overflow_falls_back_to_float() {
        let big = Scalar::int(i64::MAX / 2);
        let r = big.mul(Scalar::int(4));
        assert!(matches!(r, Scalar::F(_)));
        assert!((r.as_f64() - (i64::MAX / 2) as f64 * 4.0).abs() < 1e3);
    }

    #[test]
    fn exact_sqrt_of_squares() {
        assert_eq!(Scalar::ratio(4, 9).exact_sqrt(), Some(Scalar::ratio(2, 3)));
        assert_eq!(Scalar::int(2).exact_sqrt(), None);
    }
}
