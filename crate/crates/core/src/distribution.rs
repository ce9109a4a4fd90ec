//! Distributions given by spanning vector fields: derived flags, growth
//! vectors, the three-case regularity classification of 2-distributions on
//! R^4, symmetry verification, the canonical line of the general-position
//! case, and the graded (Tanaka) data at a point.

use alloc::vec;
use alloc::vec::Vec;

use crate::expr::Point;
use crate::exterior::{CalcError, VectorField};
use crate::linalg::{self};
use crate::tolerances::Tolerances;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum DistError {
    #[error("spanning fields drop rank at {point:?}")]
    RankDrop { point: Vec<f64> },
    #[error("distribution is not in general position at the point")]
    NotGeneralPosition,
    #[error("bracket kernel is not one-dimensional at the point")]
    AmbiguousKernel,
    #[error(transparent)]
    Calc(#[from] CalcError),
    #[error("evaluation failed: {0}")]
    Eval(#[from] crate::expr::EvalError),
}

/// A rank-p distribution on a chart, given by p spanning fields.
#[derive(Clone, Debug)]
pub struct Distribution {
    pub dim: usize,
    pub spans: Vec<VectorField>,
}

impl Distribution {
    pub fn new(spans: Vec<VectorField>) -> Self {
        let dim = spans.first().map(|v| v.dim).expect("nonempty span set");
        for s in &spans {
            assert_eq!(s.dim, dim);
        }
        Distribution { dim, spans }
    }

    pub fn rank(&self) -> usize {
        self.spans.len()
    }

    /// Pointwise values of the spanning fields.
    pub fn span_values(&self, p: &Point) -> Result<Vec<Vec<f64>>, DistError> {
        let mut cache = crate::expr::EvalCache::new();
        self.spans
            .iter()
            .map(|s| s.eval_with(&p.coords, &mut cache).map_err(DistError::from))
            .collect()
    }
}

/// Result of iterating `D^(k+1) = D^(k) + [D^(1), D^(k)]`.
///
/// `levels[k]` holds the fields adjoined at depth k (level 0 is the span
/// set); growth vectors are recorded per grid point, up to stabilization.
#[derive(Clone, Debug)]
pub struct DerivedFlag {
    pub levels: Vec<Vec<VectorField>>,
    pub points: Vec<Point>,
    pub growth: Vec<Vec<usize>>,
}

impl DerivedFlag {
    /// All fields of the derived system at depth <= k.
    pub fn fields_up_to(&self, k: usize) -> Vec<&VectorField> {
        self.levels
            .iter()
            .take(k + 1)
            .flat_map(|l| l.iter())
            .collect()
    }

    /// Growth vector is constant across the grid?
    pub fn uniform_growth(&self) -> Option<&Vec<usize>> {
        let first = self.growth.first()?;
        if self.growth.iter().all(|g| g == first) {
            Some(first)
        } else {
            None
        }
    }
}

/// Compute the derived flag on a grid: spanning-field sets of each derived
/// system obtained by adjoining brackets with the original spans, with a
/// growth vector per point; stops at stabilization or `max_depth`.
pub fn derived_flag(
    dist: &Distribution,
    grid: &[Point],
    max_depth: usize,
    tol: &Tolerances,
) -> Result<DerivedFlag, DistError> {
    let mut levels: Vec<Vec<VectorField>> = vec![dist.spans.clone()];
    for depth in 1..max_depth {
        let prev: Vec<VectorField> = levels[depth - 1].clone();
        let mut next = Vec::new();
        for s in &dist.spans {
            for f in &prev {
                let b = s.lie_bracket(f)?.simplify();
                if b.comps.iter().all(|c| c.is_zero_const()) {
                    continue;
                }
                next.push(b);
            }
        }
        if next.is_empty() {
            break;
        }
        levels.push(next);
    }

    let mut growth = Vec::with_capacity(grid.len());
    for p in grid {
        let mut cache = crate::expr::EvalCache::new();
        let mut values: Vec<Vec<f64>> = Vec::new();
        let mut ranks: Vec<usize> = Vec::new();
        let mut closed = false;
        for (depth, level) in levels.iter().enumerate() {
            for f in level {
                values.push(f.eval_with(&p.coords, &mut cache)?);
            }
            let (basis, _) = linalg::pivoted_basis(&values, tol.rank_rel);
            let r = basis.len();
            if depth == 0 {
                if r < dist.rank() {
                    return Err(DistError::RankDrop {
                        point: p.coords.clone(),
                    });
                }
                ranks.push(r);
                continue;
            }
            let stabilized = r == *ranks.last().unwrap();
            ranks.push(r);
            if stabilized || r == dist.dim {
                closed = true;
                break;
            }
        }
        // when the iteration ran out of fields (all further brackets vanish
        // structurally) the rank has stabilized; record the repeat
        if !closed && levels.len() < max_depth {
            if let Some(&last) = ranks.last() {
                if last < dist.dim {
                    ranks.push(last);
                }
            }
        }
        growth.push(ranks);
    }

    Ok(DerivedFlag {
        levels,
        points: grid.to_vec(),
        growth,
    })
}

/// Regularity classes of a 2-distribution on R^4.
#[derive(Clone, Debug, PartialEq)]
pub enum RegularityClass {
    /// Growth (2,2): tangent to a foliation.
    Integrable,
    /// Growth (2,3,3): a contact structure on R^3 times a line.
    ContactCylinder,
    /// Growth (2,3,4): the bracket-generating (Engel) case.
    EngelGeneralPosition,
    /// Growth varies or degenerates; witnesses carry (point, growth).
    NonRegular(Vec<(Point, Vec<usize>)>),
}

impl RegularityClass {
    pub fn name(&self) -> &'static str {
        match self {
            RegularityClass::Integrable => "Integrable",
            RegularityClass::ContactCylinder => "ContactCylinder",
            RegularityClass::EngelGeneralPosition => "EngelGeneralPosition",
            RegularityClass::NonRegular(_) => "NonRegular",
        }
    }
}

/// Classify a 2-distribution on R^4 by its growth vector on the grid.
pub fn classify_2dist_r4(
    dist: &Distribution,
    grid: &[Point],
    tol: &Tolerances,
) -> Result<(RegularityClass, DerivedFlag), DistError> {
    assert_eq!(dist.dim, 4, "classification targets chart dimension 4");
    assert_eq!(dist.rank(), 2, "classification targets rank-2 distributions");
    let flag = match derived_flag(dist, grid, 4, tol) {
        Ok(f) => f,
        Err(DistError::RankDrop { point }) => {
            return Ok((
                RegularityClass::NonRegular(vec![(Point::new(point), vec![])]),
                DerivedFlag {
                    levels: vec![dist.spans.clone()],
                    points: grid.to_vec(),
                    growth: vec![],
                },
            ));
        }
        Err(e) => return Err(e),
    };
    let class = match flag.uniform_growth() {
        Some(g) if g == &vec![2, 2] => RegularityClass::Integrable,
        Some(g) if g == &vec![2, 3, 3] => RegularityClass::ContactCylinder,
        Some(g) if g == &vec![2, 3, 4] => RegularityClass::EngelGeneralPosition,
        _ => {
            let witnesses = flag
                .points
                .iter()
                .zip(&flag.growth)
                .filter(|(_, g)| {
                    g != &&vec![2, 2] && g != &&vec![2, 3, 3] && g != &&vec![2, 3, 4]
                })
                .map(|(p, g)| (p.clone(), g.clone()))
                .collect::<Vec<_>>();
            let witnesses = if witnesses.is_empty() {
                // mixed classes: report every point with its growth
                flag.points
                    .iter()
                    .zip(&flag.growth)
                    .map(|(p, g)| (p.clone(), g.clone()))
                    .collect()
            } else {
                witnesses
            };
            RegularityClass::NonRegular(witnesses)
        }
    };
    Ok((class, flag))
}

/// Outcome of checking a candidate symmetry field against a distribution.
#[derive(Clone, Debug)]
pub struct SymmetryReport {
    pub is_symmetry: bool,
    /// Tangent to the distribution everywhere?
    pub characteristic: bool,
    pub max_residual: f64,
    pub witnesses: Vec<Point>,
}

/// A field `v` is a symmetry when `[v, s]` stays inside the distribution at
/// every grid point, for every spanning field `s`. Residual is the norm of
/// the bracket component orthogonal to the span.
pub fn verify_symmetry(
    v: &VectorField,
    dist: &Distribution,
    grid: &[Point],
    tol: &Tolerances,
) -> Result<SymmetryReport, DistError> {
    let brackets: Vec<VectorField> = dist
        .spans
        .iter()
        .map(|s| v.lie_bracket(s).map(|b| b.simplify()))
        .collect::<Result<_, _>>()?;
    let mut max_residual = 0.0f64;
    let mut witnesses = Vec::new();
    let mut characteristic = true;
    for p in grid {
        let span_vals = dist.span_values(p)?;
        let (basis, _) = linalg::pivoted_basis(&span_vals, tol.rank_rel);
        if basis.len() < dist.rank() {
            return Err(DistError::RankDrop {
                point: p.coords.clone(),
            });
        }
        let mut cache = crate::expr::EvalCache::new();
        let mut worst_here = 0.0f64;
        for b in &brackets {
            let val = b.eval_with(&p.coords, &mut cache)?;
            let res = linalg::orthogonal_residual(&val, &basis);
            worst_here = crate::fmath::max(worst_here, res);
        }
        if worst_here > tol.symmetry {
            witnesses.push(p.clone());
        }
        max_residual = crate::fmath::max(max_residual, worst_here);
        let vval = v.eval_with(&p.coords, &mut cache)?;
        let vres = linalg::orthogonal_residual(&vval, &basis);
        if vres > tol.rank_rel * (1.0 + linalg::norm(&vval)) {
            characteristic = false;
        }
    }
    Ok(SymmetryReport {
        is_symmetry: witnesses.is_empty(),
        characteristic,
        max_residual,
        witnesses,
    })
}

/// The canonical line inside a general-position 2-distribution at a point:
/// the unique direction `v` whose brackets with the first derived system
/// stay inside it. Returned as a unit vector with the first nonzero
/// component positive, together with its coefficients in the span basis.
pub fn canonical_line(
    dist: &Distribution,
    flag: &DerivedFlag,
    point: &Point,
    tol: &Tolerances,
) -> Result<(Vec<f64>, [f64; 2]), DistError> {
    assert_eq!(dist.rank(), 2);
    // general position at the point: growth (2,3,4)
    let probe = derived_flag(dist, core::slice::from_ref(point), 4, tol)?;
    if probe.growth[0] != vec![2, 3, 4] {
        return Err(DistError::NotGeneralPosition);
    }
    // basis of the first derived system and a unit normal to it
    let p3_fields = flag.fields_up_to(1);
    let mut cache = crate::expr::EvalCache::new();
    let mut p3_vals = Vec::new();
    for f in &p3_fields {
        p3_vals.push(f.eval_with(&point.coords, &mut cache)?);
    }
    let (p3_basis, _) = linalg::pivoted_basis(&p3_vals, tol.rank_rel);
    if p3_basis.len() != 3 {
        return Err(DistError::NotGeneralPosition);
    }
    let normal = unit_complement(&p3_basis, dist.dim);

    // rows: transversal components of [s_i, eta] for eta spanning the
    // derived system; the kernel of the 2-column matrix is the line
    let mut rows = Vec::new();
    for eta in &p3_fields {
        let mut row = vec![0.0; 2];
        let mut nonzero = false;
        for (i, s) in dist.spans.iter().enumerate() {
            let b = s.lie_bracket(eta)?;
            let val = b.eval_with(&point.coords, &mut cache)?;
            row[i] = linalg::dot(&val, &normal);
            if row[i].abs() > 0.0 {
                nonzero = true;
            }
        }
        if nonzero {
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Err(DistError::AmbiguousKernel);
    }
    let m = linalg::Mat::from_rows(&rows);
    let (_, sigma, v) = linalg::svd(&m);
    let smax = sigma[0];
    if smax <= 0.0 {
        return Err(DistError::AmbiguousKernel);
    }
    // expect exactly one singular value at numerical zero
    if sigma[1] > tol.rank_rel * smax {
        return Err(DistError::AmbiguousKernel);
    }
    let coeffs = [v[(0, 1)], v[(1, 1)]];
    let span_vals = dist.span_values(point)?;
    let mut dir = vec![0.0; dist.dim];
    for i in 0..dist.dim {
        dir[i] = coeffs[0] * span_vals[0][i] + coeffs[1] * span_vals[1][i];
    }
    let n = linalg::norm(&dir);
    if n == 0.0 {
        return Err(DistError::AmbiguousKernel);
    }
    for d in dir.iter_mut() {
        *d /= n;
    }
    // sign normalization: first nonzero component positive
    if let Some(first) = dir.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            for d in dir.iter_mut() {
                *d = -*d;
            }
        }
    }
    Ok((dir, coeffs))
}

/// Orthonormal vector spanning the complement of `basis` in R^dim
/// (only used when the complement is one-dimensional).
fn unit_complement(basis: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut best = vec![0.0; dim];
    let mut best_norm = -1.0;
    for i in 0..dim {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        let r = linalg::orthogonal_residual(&e, basis);
        if r > best_norm {
            best_norm = r;
            let mut v = e;
            for b in basis {
                let d = linalg::dot(&v, b);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= d * bi;
                }
            }
            let n = linalg::norm(&v);
            for vi in v.iter_mut() {
                *vi /= n;
            }
            best = v;
        }
    }
    best
}

/// Graded data of the filtration at a point: dimensions of the quotients,
/// the span-level bracket pairing, and the pairing into the top quotient.
/// The adapted orthonormal basis used to trivialize the quotients is
/// returned for reporting.
#[derive(Clone, Debug)]
pub struct TanakaData {
    pub point: Point,
    pub graded_dims: Vec<usize>,
    /// Class of `[s1, s2]` in the first quotient (rank-2 case); the full
    /// antisymmetric pairing matrix is `[[0, l], [-l, 0]]`.
    pub two_form: Option<f64>,
    /// Pairing of each span direction into the top quotient, normalized by
    /// the two-form scale.
    pub one_form: Option<[f64; 2]>,
    pub basis: Vec<Vec<f64>>,
}

/// Graded data at a point for a rank-2 distribution.
pub fn tanaka_data(
    dist: &Distribution,
    point: &Point,
    tol: &Tolerances,
) -> Result<TanakaData, DistError> {
    assert_eq!(dist.rank(), 2, "graded data implemented for rank 2");
    let flag = derived_flag(dist, core::slice::from_ref(point), 4, tol)?;
    let growth = &flag.growth[0];
    let mut graded_dims = vec![growth[0]];
    for w in growth.windows(2) {
        if w[1] > w[0] {
            graded_dims.push(w[1] - w[0]);
        }
    }
    // adapted orthonormal basis along the flag, in deterministic order:
    // spans first, then brackets by level
    let mut cache = crate::expr::EvalCache::new();
    let mut vals = Vec::new();
    for f in flag.fields_up_to(flag.levels.len() - 1) {
        vals.push(f.eval_with(&point.coords, &mut cache)?);
    }
    let (basis, _) = linalg::pivoted_basis(&vals, tol.rank_rel);

    let mut two_form = None;
    let mut one_form = None;
    if graded_dims.len() >= 2 {
        // q3 = first basis vector beyond the span
        let q3 = &basis[2];
        let bracket = dist.spans[0].lie_bracket(&dist.spans[1])?;
        let bval = bracket.eval_with(&point.coords, &mut cache)?;
        let lambda = linalg::dot(&bval, q3);
        two_form = Some(lambda);
        if graded_dims.len() >= 3 {
            let q4 = &basis[3];
            let mut pair = [0.0; 2];
            for (i, s) in dist.spans.iter().enumerate() {
                let b = s.lie_bracket(&bracket)?;
                let val = b.eval_with(&point.coords, &mut cache)?;
                pair[i] = linalg::dot(&val, q4) / lambda;
            }
            one_form = Some(pair);
        }
    }
    Ok(TanakaData {
        point: point.clone(),
        graded_dims,
        two_form,
        one_form,
        basis,
    })
}

/// The three normal forms used across the verification suites.
pub mod normal_forms {
    use super::*;
    use crate::expr::Expr;

    /// Kernel of {dx1 = 0, dx2 = 0}: spanned by d3, d4.
    pub fn integrable() -> Distribution {
        Distribution::new(vec![
            VectorField::coordinate(4, 2),
            VectorField::coordinate(4, 3),
        ])
    }

    /// Kernel of {dx1 = 0, x2 dx3 - dx4 = 0}: spanned by d2 and d3 + x2 d4.
    pub fn contact_cylinder() -> Distribution {
        Distribution::new(vec![
            VectorField::coordinate(4, 1),
            VectorField::new(
                4,
                vec![Expr::zero(), Expr::zero(), Expr::one(), Expr::var(1)],
            ),
        ])
    }

    /// Kernel of {dx1 + x2 dx4 = 0, dx2 + x3 dx4 = 0}: spanned by d3 and
    /// d4 - x2 d1 - x3 d2.
    pub fn engel() -> Distribution {
        Distribution::new(vec![
            VectorField::coordinate(4, 2),
            VectorField::new(
                4,
                vec![
                    Expr::var(1).neg(),
                    Expr::var(2).neg(),
                    Expr::zero(),
                    Expr::one(),
                ],
            ),
        ])
    }
}
