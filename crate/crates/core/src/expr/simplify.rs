//! Canonical rational normal form.
//!
//! Expressions are flattened into a quotient of expanded polynomials over
//! "atoms" (coordinate variables and function applications with canonical
//! arguments). Like terms combine with exact rational coefficients, so
//! algebraic identities — mixed partials commuting, Cramer-rule inverses,
//! antisymmetry cancellations — reduce to the zero polynomial structurally.
//!
//! Two semantic-preserving rewrites run during expansion:
//! `sin(u)^2 -> 1 - cos(u)^2` (monomials carry sin-degree at most 1) and
//! `sqrt(u)^2 -> u` when `u` expands to a plain polynomial.
//!
//! Expansion is capped; past the cap the input is returned unchanged, which
//! keeps `simplify` total and idempotent on pathological inputs.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::{BinaryOp, Expr, UnaryOp};
use crate::scalar::Scalar;

/// Monomial: atom -> exponent (exponents are >= 1).
type Mono = BTreeMap<Expr, u32>;

#[derive(Clone, Debug, PartialEq, Eq)]
struct Poly {
    terms: BTreeMap<Mono, Scalar>,
}

struct Budget {
    remaining: usize,
}

struct Bail;

const TERM_BUDGET: usize = 400_000;

impl Budget {
    fn spend(&mut self, n: usize) -> Result<(), Bail> {
        if self.remaining < n {
            return Err(Bail);
        }
        self.remaining -= n;
        Ok(())
    }
}

impl Poly {
    fn zero() -> Poly {
        Poly {
            terms: BTreeMap::new(),
        }
    }

    fn one() -> Poly {
        Poly::constant(Scalar::ONE)
    }

    fn constant(c: Scalar) -> Poly {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Mono::new(), c);
        }
        Poly { terms }
    }

    fn atom(e: Expr) -> Poly {
        let mut m = Mono::new();
        m.insert(e, 1);
        let mut terms = BTreeMap::new();
        terms.insert(m, Scalar::ONE);
        Poly { terms }
    }

    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .get(&Mono::new())
                .map(|c| c.is_one())
                .unwrap_or(false)
    }

    /// Add a term, applying the sin^2 and sqrt^2 rewrites first.
    fn insert_term(
        &mut self,
        mono: Mono,
        coeff: Scalar,
        ctx: &mut Ctx,
        budget: &mut Budget,
    ) -> Result<(), Bail> {
        if coeff.is_zero() {
            return Ok(());
        }
        budget.spend(1)?;

        // sin(u)^k, k >= 2  =>  sin(u)^(k-2) * (1 - cos(u)^2)
        if let Some((atom, _)) = mono
            .iter()
            .find(|(a, k)| **k >= 2 && matches!(a, Expr::Unary(UnaryOp::Sin, _)))
        {
            let atom = atom.clone();
            let arg = match &atom {
                Expr::Unary(UnaryOp::Sin, a) => Expr::clone(a),
                _ => unreachable!(),
            };
            let mut reduced = mono.clone();
            decrement(&mut reduced, &atom, 2);
            let cos_atom = Expr::Unary(UnaryOp::Cos, Arc::new(arg));
            let mut with_cos = reduced.clone();
            *with_cos.entry(cos_atom).or_insert(0) += 2;
            self.insert_term(reduced, coeff, ctx, budget)?;
            self.insert_term(with_cos, coeff.neg(), ctx, budget)?;
            return Ok(());
        }

        // sqrt(u)^k, k >= 2  =>  u * sqrt(u)^(k-2), when u is polynomial
        let sqrt_arg = mono.iter().find_map(|(a, k)| {
            if *k < 2 {
                return None;
            }
            if let Expr::Unary(UnaryOp::Sqrt, arg) = a {
                return Some((a.clone(), arg.clone()));
            }
            None
        });
        let sqrt_hit = sqrt_arg.and_then(|(atom, arg)| {
            let mut local = Budget {
                remaining: budget.remaining,
            };
            let nf = ctx.nf_of_arc(&arg, &mut local).ok()?;
            if nf.den.is_one() {
                Some((atom, nf.num))
            } else {
                None
            }
        });
        if let Some((atom, arg_poly)) = sqrt_hit {
            let mut reduced = mono.clone();
            decrement(&mut reduced, &atom, 2);
            for (m2, c2) in arg_poly.terms {
                let merged = merge_monos(&reduced, &m2);
                self.insert_term(merged, coeff.mul(c2), ctx, budget)?;
            }
            return Ok(());
        }

        match self.terms.entry(mono) {
            alloc::collections::btree_map::Entry::Vacant(v) => {
                v.insert(coeff);
            }
            alloc::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get().add(coeff);
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
        Ok(())
    }

    fn add(&self, other: &Poly, ctx: &mut Ctx, budget: &mut Budget) -> Result<Poly, Bail> {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert_term(m.clone(), *c, ctx, budget)?;
        }
        Ok(out)
    }

    fn neg(&self) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), c.neg()))
                .collect(),
        }
    }

    fn mul(&self, other: &Poly, ctx: &mut Ctx, budget: &mut Budget) -> Result<Poly, Bail> {
        let mut out = Poly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.insert_term(merge_monos(ma, mb), ca.mul(*cb), ctx, budget)?;
            }
        }
        Ok(out)
    }

    fn powi(&self, k: u32, ctx: &mut Ctx, budget: &mut Budget) -> Result<Poly, Bail> {
        let mut acc = Poly::one();
        for _ in 0..k {
            acc = acc.mul(self, ctx, budget)?;
        }
        Ok(acc)
    }

    /// Divide every coefficient by `c`; exact for rationals, correctly
    /// rounded (and hence idempotent) for floats.
    fn scale_div(&self, c: Scalar) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(m, v)| (m.clone(), v.div(c).expect("nonzero scale")))
                .collect(),
        }
    }
}

fn decrement(mono: &mut Mono, atom: &Expr, by: u32) {
    if let Some(k) = mono.get_mut(atom) {
        if *k > by {
            *k -= by;
        } else {
            mono.remove(atom);
        }
    }
}

fn merge_monos(a: &Mono, b: &Mono) -> Mono {
    let mut out = a.clone();
    for (atom, k) in b {
        *out.entry(atom.clone()).or_insert(0) += k;
    }
    out
}

#[derive(Clone, Debug)]
struct Nf {
    num: Poly,
    den: Poly,
}

impl Nf {
    fn from_poly(p: Poly) -> Nf {
        Nf {
            num: p,
            den: Poly::one(),
        }
    }

    fn normalize(mut self) -> Nf {
        if self.num.is_zero() {
            return Nf {
                num: Poly::zero(),
                den: Poly::one(),
            };
        }
        // cancel atoms common to every monomial of num and den
        let mut common: Option<Mono> = None;
        for mono in self.num.terms.keys().chain(self.den.terms.keys()) {
            common = Some(match common {
                None => mono.clone(),
                Some(prev) => mono_gcd(&prev, mono),
            });
            if common.as_ref().map(|m| m.is_empty()).unwrap_or(false) {
                break;
            }
        }
        if let Some(g) = common {
            if !g.is_empty() {
                self.num = divide_by_mono(&self.num, &g);
                self.den = divide_by_mono(&self.den, &g);
            }
        }
        // make the denominator's leading coefficient 1
        let lead = *self.den.terms.values().next().expect("nonzero denominator");
        if !lead.is_one() {
            self.num = self.num.scale_div(lead);
            self.den = self.den.scale_div(lead);
        }
        if self.num == self.den {
            return Nf::from_poly(Poly::one());
        }
        if self.num == self.den.neg() {
            return Nf::from_poly(Poly::constant(Scalar::int(-1)));
        }
        self
    }

    fn add(&self, o: &Nf, ctx: &mut Ctx, b: &mut Budget) -> Result<Nf, Bail> {
        let num = self
            .num
            .mul(&o.den, ctx, b)?
            .add(&o.num.mul(&self.den, ctx, b)?, ctx, b)?;
        let den = self.den.mul(&o.den, ctx, b)?;
        Ok(Nf { num, den }.normalize())
    }

    fn neg(&self) -> Nf {
        Nf {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    fn mul(&self, o: &Nf, ctx: &mut Ctx, b: &mut Budget) -> Result<Nf, Bail> {
        Ok(Nf {
            num: self.num.mul(&o.num, ctx, b)?,
            den: self.den.mul(&o.den, ctx, b)?,
        }
        .normalize())
    }

    fn div(&self, o: &Nf, ctx: &mut Ctx, b: &mut Budget) -> Result<Nf, Bail> {
        if o.num.is_zero() {
            // division by structural zero: leave the input untouched
            return Err(Bail);
        }
        Ok(Nf {
            num: self.num.mul(&o.den, ctx, b)?,
            den: self.den.mul(&o.num, ctx, b)?,
        }
        .normalize())
    }

    fn powi(&self, k: i32, ctx: &mut Ctx, b: &mut Budget) -> Result<Nf, Bail> {
        if k == 0 {
            return Ok(Nf::from_poly(Poly::one()));
        }
        let (num, den) = if k > 0 {
            (&self.num, &self.den)
        } else {
            if self.num.is_zero() {
                return Err(Bail);
            }
            (&self.den, &self.num)
        };
        Ok(Nf {
            num: num.powi(k.unsigned_abs(), ctx, b)?,
            den: den.powi(k.unsigned_abs(), ctx, b)?,
        }
        .normalize())
    }
}

fn mono_gcd(a: &Mono, b: &Mono) -> Mono {
    let mut out = Mono::new();
    for (atom, ka) in a {
        if let Some(kb) = b.get(atom) {
            out.insert(atom.clone(), (*ka).min(*kb));
        }
    }
    out
}

fn divide_by_mono(p: &Poly, g: &Mono) -> Poly {
    Poly {
        terms: p
            .terms
            .iter()
            .map(|(m, c)| {
                let mut out = m.clone();
                for (atom, k) in g {
                    decrement(&mut out, atom, *k);
                }
                (out, *c)
            })
            .collect(),
    }
}

/// Per-call context: memoizes normal forms of `Arc`-held nodes (keyed by
/// allocation identity, pinned alive for the call) so DAG-shaped inputs
/// stay linear.
struct Ctx {
    memo: BTreeMap<usize, Nf>,
    pinned: Vec<Arc<Expr>>,
}

impl Ctx {
    fn nf_of_arc(&mut self, node: &Arc<Expr>, b: &mut Budget) -> Result<Nf, Bail> {
        let key = Arc::as_ptr(node) as usize;
        if let Some(nf) = self.memo.get(&key) {
            return Ok(nf.clone());
        }
        let nf = to_nf(node, self, b)?;
        self.pinned.push(node.clone());
        self.memo.insert(key, nf.clone());
        Ok(nf)
    }
}

fn fold_unary_const(op: UnaryOp, c: Scalar) -> Option<Scalar> {
    match op {
        UnaryOp::Neg => Some(c.neg()),
        UnaryOp::Sin if c.is_zero() => Some(Scalar::ZERO),
        UnaryOp::Cos if c.is_zero() => Some(Scalar::ONE),
        UnaryOp::Exp if c.is_zero() => Some(Scalar::ONE),
        UnaryOp::Ln if c.is_one() => Some(Scalar::ZERO),
        UnaryOp::Sqrt => c.exact_sqrt(),
        _ => None,
    }
}

fn to_nf(e: &Expr, ctx: &mut Ctx, b: &mut Budget) -> Result<Nf, Bail> {
    Ok(match e {
        Expr::Const(c) => Nf::from_poly(Poly::constant(*c)),
        Expr::Var(i) => Nf::from_poly(Poly::atom(Expr::Var(*i))),
        Expr::Unary(UnaryOp::Neg, a) => ctx.nf_of_arc(a, b)?.neg(),
        Expr::Unary(op, a) => {
            let arg = nf_to_expr(&ctx.nf_of_arc(a, b)?);
            if let Expr::Const(c) = &arg {
                if let Some(folded) = fold_unary_const(*op, *c) {
                    return Ok(Nf::from_poly(Poly::constant(folded)));
                }
            }
            Nf::from_poly(Poly::atom(Expr::Unary(*op, Arc::new(arg))))
        }
        Expr::Binary(op, x, y) => {
            let (nx, ny) = (ctx.nf_of_arc(x, b)?, ctx.nf_of_arc(y, b)?);
            match op {
                BinaryOp::Add => nx.add(&ny, ctx, b)?,
                BinaryOp::Sub => nx.add(&ny.neg(), ctx, b)?,
                BinaryOp::Mul => nx.mul(&ny, ctx, b)?,
                BinaryOp::Div => nx.div(&ny, ctx, b)?,
                BinaryOp::Atan2 => {
                    let atom = Expr::Binary(
                        BinaryOp::Atan2,
                        Arc::new(nf_to_expr(&nx)),
                        Arc::new(nf_to_expr(&ny)),
                    );
                    Nf::from_poly(Poly::atom(atom))
                }
            }
        }
        Expr::Pow(a, k) => ctx.nf_of_arc(a, b)?.powi(*k, ctx, b)?,
    })
}

fn mono_to_expr(m: &Mono) -> Option<Expr> {
    let mut acc: Option<Expr> = None;
    for (atom, k) in m {
        let factor = atom.clone().powi(*k as i32);
        acc = Some(match acc {
            None => factor,
            Some(prev) => prev * factor,
        });
    }
    acc
}

/// Balanced sum so reconstructed expressions have depth log(terms); large
/// polynomials as left-associated chains would overflow recursion in
/// downstream passes.
fn balanced_sum(mut terms: Vec<Expr>) -> Expr {
    match terms.len() {
        0 => Expr::zero(),
        1 => terms.pop().unwrap(),
        n => {
            let right = balanced_sum(terms.split_off(n / 2));
            let left = balanced_sum(terms);
            left + right
        }
    }
}

fn poly_to_expr(p: &Poly) -> Expr {
    if p.is_zero() {
        return Expr::zero();
    }
    let mut terms = Vec::with_capacity(p.terms.len());
    for (mono, coeff) in &p.terms {
        let (mag, negative) = if coeff.is_negative() {
            (coeff.neg(), true)
        } else {
            (*coeff, false)
        };
        let term = match mono_to_expr(mono) {
            // constant term keeps its sign in the literal
            None => Expr::Const(*coeff),
            Some(m) => {
                let body = if mag.is_one() { m } else { Expr::Const(mag) * m };
                if negative {
                    body.neg()
                } else {
                    body
                }
            }
        };
        terms.push(term);
    }
    balanced_sum(terms)
}

fn nf_to_expr(nf: &Nf) -> Expr {
    let num = poly_to_expr(&nf.num);
    if nf.den.is_one() {
        num
    } else {
        num / poly_to_expr(&nf.den)
    }
}

pub(super) fn simplify(e: &Expr) -> Expr {
    let mut ctx = Ctx {
        memo: BTreeMap::new(),
        pinned: Vec::new(),
    };
    let mut budget = Budget {
        remaining: TERM_BUDGET,
    };
    match to_nf(e, &mut ctx, &mut budget) {
        Ok(nf) => nf_to_expr(&nf),
        // expansion too large or structurally undefined: keep the input
        Err(Bail) => e.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    fn s(text: &str) -> Expr {
        parse(text, 4).unwrap().simplify()
    }

    #[test]
    fn zero_and_one_identities() {
        assert_eq!(s("0*x1 + x2*1"), Expr::var(1));
    }

    #[test]
    fn like_terms_cancel() {
        assert_eq!(s("x1 - x1"), Expr::zero());
        assert_eq!(s("x1*x2 - x2*x1"), Expr::zero());
    }

    #[test]
    fn derivative_of_product_collapses() {
        let e = parse("x2*x3", 4).unwrap();
        assert_eq!(e.diff(1).simplify(), parse("x3", 4).unwrap());
    }

    #[test]
    fn constant_folding_is_exact() {
        assert_eq!(s("2 + 3*4"), Expr::int(14));
        assert_eq!(s("1/2 + 1/3"), Expr::ratio(5, 6));
    }

    #[test]
    fn pythagorean_identity_collapses() {
        assert_eq!(s("sin(x1)^2 + cos(x1)^2"), Expr::one());
        assert_eq!(s("sin(x1)*sin(x1) + cos(x1)*cos(x1) - 1"), Expr::zero());
    }

    #[test]
    fn sqrt_square_rewrite() {
        assert_eq!(s("sqrt(x1)^2"), Expr::var(0));
        assert_eq!(s("sqrt(1)"), Expr::one());
    }

    #[test]
    fn rational_functions_cancel() {
        // (x1^2 - x2^2)/(x1 + x2) won't fully cancel (no polynomial gcd), but
        // common monomial factors and equal num/den do
        assert_eq!(s("(x1*x2)/(x2*x1)"), Expr::one());
        assert_eq!(s("(x1 + x2)/(x1 + x2)"), Expr::one());
        assert_eq!(s("(x1 + x2)/(-x1 - x2)"), Expr::int(-1));
    }

    #[test]
    fn mixed_partials_commute_structurally() {
        let e = parse("sin(x1*x2) + exp(x1)*x2^3", 4).unwrap();
        let d12 = e.diff(0).diff(1).simplify();
        let d21 = e.diff(1).diff(0).simplify();
        assert_eq!(d12, d21);
    }

    #[test]
    fn idempotent() {
        for src in [
            "x1 - 2*x2 + x1*x2",
            "sin(x1)^3/(1 + cos(x2))",
            "(x1 + 1/3)^2 - exp(x3)*x4",
            "sqrt(x1^2 + x2^2)",
        ] {
            let once = s(src);
            assert_eq!(once.simplify(), once, "simplify not idempotent on {src}");
        }
    }

    #[test]
    fn division_by_structural_zero_left_intact() {
        let e = parse("1/(x1 - x1)", 4).unwrap();
        assert_eq!(e.simplify(), e);
    }
}
