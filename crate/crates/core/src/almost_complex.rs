//! Almost complex structures on 4-dimensional charts and their Nijenhuis
//! invariants: the obstruction tensor itself, its image distribution, the
//! eigenframe invariant carrying the two canonical lines with metrics and
//! orientations, realization of a distribution as a Nijenhuis image, and the
//! projected (procomplex/cocomplex) operators on 3-dimensional slices.

use alloc::vec;
use alloc::vec::Vec;

use crate::distribution::{verify_symmetry, DistError, Distribution};
use crate::expr::{EvalCache, EvalError, Expr, Point};
use crate::exterior::{
    sym_adjugate, sym_det, CalcError, DiffForm, EndoField, VectorField, VectorValued2Form,
};
use crate::fmath;
use crate::linalg::{self, Mat};
use crate::tolerances::Tolerances;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum AcsError {
    #[error("endomorphism squares to -1 fails at {point:?}")]
    NotAlmostComplex { point: Vec<f64> },
    #[error("Nijenhuis tensor vanishes on the sample set")]
    NijenhuisVanishes { witnesses: Vec<Point> },
    #[error("first derived system of the image distribution is trivial")]
    DerivedDegenerate,
    #[error("eigenvalues of the frame map are not real and distinct at {point:?}")]
    ComplexEigenvalues { point: Vec<f64> },
    #[error("field is not a symmetry of the distribution at {witness:?}")]
    NotASymmetry { witness: Vec<f64> },
    #[error("frame fields become dependent at {point:?}")]
    FrameDependent { point: Vec<f64> },
    #[error("projection along the parameter axis degenerates at {point:?}")]
    ProjectionDegenerate { point: Vec<f64> },
    #[error("annihilator does not normalize against the kernel field at {point:?}")]
    NotNormalized { point: Vec<f64> },
    #[error("seed endomorphism does not square to -1 on the distribution at {point:?}")]
    SeedNotComplex { point: Vec<f64> },
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Calc(#[from] CalcError),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
}

/// An endomorphism field with `j^2 = -1`.
#[derive(Clone, Debug)]
pub struct AlmostComplexStructure {
    pub endo: EndoField,
}

impl AlmostComplexStructure {
    /// Wrap an endomorphism field, checking `j^2 + 1 = 0` on the samples.
    pub fn new(endo: EndoField, samples: &[Point], tol: &Tolerances) -> Result<Self, AcsError> {
        let j2 = endo.compose(&endo);
        for p in samples {
            let m = j2.eval_mat(p)?;
            let mut worst = 0.0f64;
            for i in 0..endo.dim {
                for k in 0..endo.dim {
                    let expect = if i == k { -1.0 } else { 0.0 };
                    worst = fmath::max(worst, fmath::abs(m[(i, k)] - expect));
                }
            }
            if worst > tol.j_squared {
                return Err(AcsError::NotAlmostComplex {
                    point: p.coords.clone(),
                });
            }
        }
        Ok(AlmostComplexStructure { endo })
    }

    /// The standard constant structure `j d1 = d2, j d3 = d4`.
    pub fn standard() -> Self {
        let mut mat = vec![vec![Expr::zero(); 4]; 4];
        mat[1][0] = Expr::one();
        mat[0][1] = Expr::int(-1);
        mat[3][2] = Expr::one();
        mat[2][3] = Expr::int(-1);
        AlmostComplexStructure {
            endo: EndoField::from_rows(mat),
        }
    }

    pub fn dim(&self) -> usize {
        self.endo.dim
    }
}

/// The Nijenhuis tensor
/// `N(x, y) = [jx, jy] - j[jx, y] - j[x, jy] - [x, y]`
/// as an exact vector-valued 2-form on the coordinate frame.
pub fn nijenhuis(acs: &AlmostComplexStructure) -> Result<VectorValued2Form, AcsError> {
    let j = &acs.endo;
    let n = j.dim;
    let mut vals = Vec::new();
    for pair in VectorValued2Form::pairs(n) {
        let (a, b) = (pair[0], pair[1]);
        let ja = j.column(a);
        let jb = j.column(b);
        let term1 = ja.lie_bracket(&jb)?;
        // [j d_a, d_b] = -d_b(j d_a)
        let eb = VectorField::coordinate(n, b);
        let ea = VectorField::coordinate(n, a);
        let term2 = j.apply(&ja.lie_bracket(&eb)?);
        let term3 = j.apply(&ea.lie_bracket(&jb)?);
        // [d_a, d_b] = 0; keep large components as shared DAGs
        let total = term1.sub(&term2).sub(&term3).simplify_small(512);
        vals.push(total);
    }
    Ok(VectorValued2Form { dim: n, vals })
}

/// The image distribution of the Nijenhuis tensor with its regularity
/// report.
#[derive(Clone, Debug)]
pub struct ImageReport {
    pub dist: Distribution,
    /// Largest deviation of `j(span)` from the span across the grid.
    pub j_invariance_residual: f64,
    /// Points where the tensor is numerically zero (excluded from the span
    /// checks and reported).
    pub vanishing: Vec<Point>,
}

/// Span the image of the Nijenhuis tensor by two of its coordinate values,
/// chosen to maximize the worst-case conditioning over the grid.
pub fn image_distribution(
    acs: &AlmostComplexStructure,
    nij: &VectorValued2Form,
    grid: &[Point],
    tol: &Tolerances,
) -> Result<ImageReport, AcsError> {
    let n = acs.dim();
    let pairs = VectorValued2Form::pairs(n);
    let mut vanishing = Vec::new();
    let mut live_points = Vec::new();
    for p in grid {
        let mut cache = EvalCache::new();
        let mut norm = 0.0f64;
        for v in &nij.vals {
            for c in v.eval_with(&p.coords, &mut cache)? {
                norm = fmath::max(norm, fmath::abs(c));
            }
        }
        if norm <= tol.nondegen {
            vanishing.push(p.clone());
        } else {
            live_points.push(p.clone());
        }
    }
    if live_points.is_empty() {
        return Err(AcsError::NijenhuisVanishes {
            witnesses: vanishing,
        });
    }
    // pick the candidate pair with the best worst-case second singular value
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..pairs.len() {
        for k in (i + 1)..pairs.len() {
            let mut worst = f64::INFINITY;
            for p in &live_points {
                let mut cache = EvalCache::new();
                let vi = nij.vals[i].eval_with(&p.coords, &mut cache)?;
                let vk = nij.vals[k].eval_with(&p.coords, &mut cache)?;
                let m = Mat::from_cols(&[vi, vk]);
                let (smin, _) = linalg::sigma_range(&m);
                if smin < worst {
                    worst = smin;
                }
            }
            if best.map(|(b, _, _)| worst > b).unwrap_or(true) {
                best = Some((worst, i, k));
            }
        }
    }
    let (_, bi, bk) = best.expect("nonempty candidate set");
    let dist = Distribution::new(vec![nij.vals[bi].clone(), nij.vals[bk].clone()]);

    // rank must be exactly 2 away from the vanishing locus, the span must be
    // j-invariant, and every tensor value must lie inside it
    let mut j_res = 0.0f64;
    for p in &live_points {
        let span_vals = dist.span_values(p)?;
        let (basis, _) = linalg::pivoted_basis(&span_vals, tol.rank_rel);
        if basis.len() != 2 {
            return Err(AcsError::FrameDependent {
                point: p.coords.clone(),
            });
        }
        let jm = acs.endo.eval_mat(p)?;
        for s in &span_vals {
            let js = jm.matvec(s);
            j_res = fmath::max(j_res, linalg::orthogonal_residual(&js, &basis));
        }
        let mut cache = EvalCache::new();
        for v in &nij.vals {
            let val = v.eval_with(&p.coords, &mut cache)?;
            j_res = fmath::max(j_res, linalg::orthogonal_residual(&val, &basis));
        }
    }
    Ok(ImageReport {
        dist,
        j_invariance_residual: j_res,
        vanishing,
    })
}

/// Residuals of the defining eigenframe relations at a point.
#[derive(Clone, Copy, Debug, Default)]
pub struct FrameResiduals {
    /// `|N(x1, x3) - x1|`
    pub n13: f64,
    /// `|N(x2, x3) + x2|`
    pub n23: f64,
    /// `|N(x1, x4) - x2|`
    pub n14: f64,
    /// `|N(x2, x4) - x1|`
    pub n24_plus: f64,
    /// `|N(x2, x4) + x1|`
    pub n24_minus: f64,
}

/// The full pointwise invariant: the frame, the two canonical lines, the
/// metric scales and orientations on the quotients, and the two graded
/// bracket scalars.
#[derive(Clone, Debug)]
pub struct UTXiInvariant {
    pub point: Point,
    /// x1, x2, x3, x4 of the defining relations.
    pub frame: [Vec<f64>; 4],
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    /// Quotient length of x3 against the image plane.
    pub t_metric_scale: f64,
    /// Quotient length of x4 against the first derived space.
    pub xi_metric_scale: f64,
    /// +1 for the default half-space of x3, -1 when labels are swapped.
    pub t_orientation: i8,
    /// Sign of the x4 class against the chart complement direction.
    pub xi_orientation: i8,
    /// Graded bracket pairing of the two lines into the first quotient.
    pub omega2: f64,
    /// Graded bracket pairing of each line into the top quotient
    /// (normalized by the quotient units; convention in the README).
    pub omega1: [f64; 2],
    pub residuals: FrameResiduals,
}

/// Compute the eigenframe invariant at a point. `swap_halfspace` flips the
/// half-space used for x3, which interchanges the two lines.
pub fn utxi_invariant(
    acs: &AlmostComplexStructure,
    nij: &VectorValued2Form,
    point: &Point,
    swap_halfspace: bool,
    tol: &Tolerances,
) -> Result<UTXiInvariant, AcsError> {
    let n = acs.dim();
    assert_eq!(n, 4);
    let coords = &point.coords;
    let mut cache = EvalCache::new();

    // span of the image at the point, with the generating fields kept for
    // bracket computations
    let mut vals = Vec::new();
    for v in &nij.vals {
        vals.push(v.eval_with(coords, &mut cache)?);
    }
    let norm = vals
        .iter()
        .flat_map(|v| v.iter())
        .fold(0.0f64, |a, x| fmath::max(a, fmath::abs(*x)));
    if norm <= tol.nondegen {
        return Err(AcsError::NijenhuisVanishes {
            witnesses: vec![point.clone()],
        });
    }
    let (span_basis, chosen) = linalg::pivoted_basis(&vals, tol.rank_rel);
    if span_basis.len() != 2 || chosen.len() < 2 {
        return Err(AcsError::NijenhuisVanishes {
            witnesses: vec![point.clone()],
        });
    }
    let w1 = &nij.vals[chosen[0]];
    let w2 = &nij.vals[chosen[1]];

    // first derived direction
    let bracket = w1.lie_bracket(w2)?;
    let mut xi3p = bracket.eval_with(coords, &mut cache)?;
    let trans = linalg::orthogonal_residual(&xi3p, &span_basis);
    let bnorm = linalg::norm(&xi3p);
    if trans <= tol.rank_rel * fmath::max(bnorm, 1.0) {
        return Err(AcsError::DerivedDegenerate);
    }
    if swap_halfspace {
        for c in xi3p.iter_mut() {
            *c = -*c;
        }
    }

    // the 2x2 matrix of  eta -> N(eta, xi3')  on the image plane
    let w1v = w1.eval_with(coords, &mut cache)?;
    let w2v = w2.eval_with(coords, &mut cache)?;
    let span_mat = Mat::from_cols(&[w1v.clone(), w2v.clone()]);
    let mut a = Mat::zeros(2, 2);
    for (col, wv) in [&w1v, &w2v].iter().enumerate() {
        let nv = nij.value_on(wv, &xi3p, coords, &mut cache)?;
        let c = linalg::pseudo_solve(&span_mat, &nv, tol.rank_rel);
        a[(0, col)] = c[0];
        a[(1, col)] = c[1];
    }
    let Some(((l1, v1), (l2, _))) = linalg::eig2(&a) else {
        return Err(AcsError::ComplexEigenvalues {
            point: point.coords.clone(),
        });
    };
    if !(l1 > 0.0 && l2 < 0.0) {
        return Err(AcsError::ComplexEigenvalues {
            point: point.coords.clone(),
        });
    }
    let f = l1;

    // x1 on the positive eigenline, unit length, deterministic sign
    let mut xi1 = vec![0.0; n];
    for i in 0..n {
        xi1[i] = v1[0] * w1v[i] + v1[1] * w2v[i];
    }
    let nx = linalg::norm(&xi1);
    for c in xi1.iter_mut() {
        *c /= nx;
    }
    if let Some(first) = xi1.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            for c in xi1.iter_mut() {
                *c = -*c;
            }
        }
    }
    let xi3: Vec<f64> = xi3p.iter().map(|c| c / f).collect();
    let jm = acs.endo.eval_mat(point)?;
    let xi2 = jm.matvec(&xi1);

    // x4 solves N(x1, x4) = x2 modulo image-plane shifts; the minimum-norm
    // solution has zero component along the plane
    let mut m = Mat::zeros(n, n);
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let col = nij.value_on(&xi1, &e, coords, &mut cache)?;
        for i in 0..n {
            m[(i, k)] = col[i];
        }
    }
    let xi4 = linalg::pseudo_solve(&m, &xi2, tol.rank_rel);
    let solved = m.matvec(&xi4);
    let solve_res = linalg::norm(
        &solved
            .iter()
            .zip(&xi2)
            .map(|(a, b)| a - b)
            .collect::<Vec<_>>(),
    );
    if solve_res > tol.frame {
        return Err(AcsError::ComplexEigenvalues {
            point: point.coords.clone(),
        });
    }

    // quotient metrics
    let t_metric_scale = linalg::orthogonal_residual(&xi3, &span_basis);
    let mut p3_vals = vals.clone();
    p3_vals.push(xi3.clone());
    let (p3_basis, _) = linalg::pivoted_basis(&p3_vals, tol.rank_rel);
    let xi_metric_scale = linalg::orthogonal_residual(&xi4, &p3_basis);
    if xi_metric_scale <= tol.rank_rel {
        return Err(AcsError::DerivedDegenerate);
    }

    // residuals of the defining relations
    let mut check = |u: &[f64], v: &[f64], target: &[f64], sign: f64| -> Result<f64, AcsError> {
        let got = nij.value_on(u, v, coords, &mut cache)?;
        let d: Vec<f64> = got
            .iter()
            .zip(target)
            .map(|(g, t)| g - sign * t)
            .collect();
        Ok(linalg::norm(&d))
    };
    let residuals = FrameResiduals {
        n13: check(&xi1, &xi3, &xi1, 1.0)?,
        n23: check(&xi2, &xi3, &xi2, -1.0)?,
        n14: check(&xi1, &xi4, &xi2, 1.0)?,
        n24_plus: check(&xi2, &xi4, &xi1, 1.0)?,
        n24_minus: check(&xi2, &xi4, &xi1, -1.0)?,
    };

    // graded bracket scalars, normalized by the quotient units (see README
    // for the pairing convention)
    let q3u: Vec<f64> = {
        let mut r = xi3.clone();
        for b in &span_basis {
            let d = linalg::dot(&r, b);
            for (ri, bi) in r.iter_mut().zip(b) {
                *ri -= d * bi;
            }
        }
        let nn = linalg::norm(&r);
        r.iter().map(|x| x / nn).collect()
    };
    let q4u: Vec<f64> = {
        let mut r = xi4.clone();
        for b in &p3_basis {
            let d = linalg::dot(&r, b);
            for (ri, bi) in r.iter_mut().zip(b) {
                *ri -= d * bi;
            }
        }
        let nn = linalg::norm(&r);
        r.iter().map(|x| x / nn).collect()
    };
    // field extensions: x1 as a constant combination of the generating
    // fields, x2 as j applied to it
    let c1 = linalg::pseudo_solve(&span_mat, &xi1, tol.rank_rel);
    let xi1_field = w1
        .scale(&Expr::float(c1[0]))
        .add(&w2.scale(&Expr::float(c1[1])));
    let xi2_field = acs.endo.apply(&xi1_field);
    let b12 = xi1_field.lie_bracket(&xi2_field)?;
    let b12v = b12.eval_with(coords, &mut cache)?;
    let t_unit = linalg::dot(&xi3, &q3u);
    let omega2 = linalg::dot(&b12v, &q3u) / t_unit;
    let xi_unit = linalg::dot(&xi4, &q4u);
    let mut omega1 = [0.0; 2];
    for (i, field) in [&xi1_field, &xi2_field].iter().enumerate() {
        let br = field.lie_bracket(&bracket)?;
        let val = br.eval_with(coords, &mut cache)?;
        let bracket_t = linalg::dot(&bracket.eval_with(coords, &mut cache)?, &q3u);
        omega1[i] = linalg::dot(&val, &q4u) / (bracket_t / t_unit) / xi_unit;
    }

    let xi_orientation = if linalg::dot(&xi4, &q4u) >= 0.0 { 1 } else { -1 };
    Ok(UTXiInvariant {
        point: point.clone(),
        u1: xi1.clone(),
        u2: xi2.clone(),
        frame: [xi1, xi2, xi3, xi4],
        t_metric_scale,
        xi_metric_scale,
        t_orientation: if swap_halfspace { -1 } else { 1 },
        xi_orientation,
        omega2,
        omega1,
        residuals,
    })
}

/// Report from realizing a distribution as a Nijenhuis image.
#[derive(Clone, Debug)]
pub struct RealizeReport {
    pub acs: AlmostComplexStructure,
    /// `j^2 + 1` vanished structurally after simplification.
    pub j_squared_structural: bool,
    /// Grid points where the image equals the distribution (within the rank
    /// tolerance).
    pub matched: usize,
    /// Points where the tensor vanishes numerically (excluded from the
    /// equality count).
    pub vanishing: Vec<Point>,
    /// Points where the image differs from the distribution.
    pub mismatched: Vec<Point>,
    pub nij: VectorValued2Form,
}

/// Build `j` from a spanned 2-distribution and two transversal symmetries:
/// `j s1 = s2`, `j s2 = -s1` on the span and the same rotation on the
/// symmetry pair. The image of the resulting Nijenhuis tensor recovers the
/// distribution wherever the tensor is nonzero.
pub fn realize_distribution(
    dist: &Distribution,
    s1: &VectorField,
    s2: &VectorField,
    grid: &[Point],
    tol: &Tolerances,
) -> Result<RealizeReport, AcsError> {
    assert_eq!(dist.rank(), 2);
    let n = dist.dim;
    assert_eq!(n, 4);
    for s in [s1, s2] {
        let rep = verify_symmetry(s, dist, grid, tol)?;
        if !rep.is_symmetry {
            return Err(AcsError::NotASymmetry {
                witness: rep.witnesses[0].coords.clone(),
            });
        }
    }
    // frame matrix F = [xi1 xi2 s1 s2], j = F K F^{-1} with K the rotation
    // sending (xi1, xi2, s1, s2) to (xi2, -xi1, s2, -s1)
    let cols = [
        dist.spans[0].clone(),
        dist.spans[1].clone(),
        s1.clone(),
        s2.clone(),
    ];
    let mut fmat = vec![vec![Expr::zero(); n]; n];
    for (c, field) in cols.iter().enumerate() {
        for r in 0..n {
            fmat[r][c] = field.comps[r].clone();
        }
    }
    let det = sym_det(&fmat).simplify();
    for p in grid {
        let d = det.eval(p)?;
        if fmath::abs(d) <= tol.degenerate_rel {
            return Err(AcsError::FrameDependent {
                point: p.coords.clone(),
            });
        }
    }
    let adj = sym_adjugate(&fmat);
    let mut k = vec![vec![Expr::zero(); n]; n];
    k[1][0] = Expr::one();
    k[0][1] = Expr::int(-1);
    k[3][2] = Expr::one();
    k[2][3] = Expr::int(-1);
    // j = F K adj(F) / det(F)
    let fk = EndoField::from_rows(fmat.clone()).compose(&EndoField::from_rows(k));
    let fkadj = fk.compose(&EndoField::from_rows(adj));
    let mut jmat = vec![vec![Expr::zero(); n]; n];
    for (i, row) in jmat.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = (fkadj.mat[i][c].clone() / det.clone()).simplify();
        }
    }
    let j = EndoField::from_rows(jmat);
    let j2 = j.compose(&j).simplify();
    let minus_id = EndoField::identity(n).scale(&Expr::int(-1)).simplify();
    let j_squared_structural = j2 == minus_id;
    let acs = AlmostComplexStructure { endo: j };
    let nij = nijenhuis(&acs)?;

    let mut matched = 0usize;
    let mut vanishing = Vec::new();
    let mut mismatched = Vec::new();
    for p in grid {
        let mut cache = EvalCache::new();
        let mut nvals = Vec::new();
        let mut norm = 0.0f64;
        for v in &nij.vals {
            let val = v.eval_with(&p.coords, &mut cache)?;
            for c in &val {
                norm = fmath::max(norm, fmath::abs(*c));
            }
            nvals.push(val);
        }
        if norm <= tol.nondegen {
            vanishing.push(p.clone());
            continue;
        }
        let span_vals = dist.span_values(p)?;
        let d = linalg::subspace_distance(&nvals, &span_vals, tol.rank_rel);
        if d <= tol.frame {
            matched += 1;
        } else {
            mismatched.push(p.clone());
        }
    }
    Ok(RealizeReport {
        acs,
        j_squared_structural,
        matched,
        vanishing,
        mismatched,
        nij,
    })
}

/// A parameter-dependent projected structure on the slices of a 4-chart:
/// `j_family` annihilates the parameter axis and maps slice directions to
/// slice directions with spectrum {0, +-i}; `w` spans its kernel inside the
/// slice.
#[derive(Clone, Debug)]
pub struct ProcomplexStructure {
    pub t_axis: usize,
    pub j_family: EndoField,
    pub w: VectorField,
}

#[derive(Clone, Debug)]
pub struct ProcomplexReport {
    /// max |J^3 + J| entry over the grid
    pub spectrum_residual: f64,
    /// rank J == 2 everywhere
    pub rank_ok: bool,
}

/// Project an almost complex structure along a chosen coordinate axis.
pub fn procomplex_from_acs(
    acs: &AlmostComplexStructure,
    t_axis: usize,
    grid: &[Point],
    tol: &Tolerances,
) -> Result<(ProcomplexStructure, ProcomplexReport), AcsError> {
    let n = acs.dim();
    let j = &acs.endo;
    let mut mat = vec![vec![Expr::zero(); n]; n];
    for c in 0..n {
        if c == t_axis {
            continue;
        }
        for r in 0..n {
            if r == t_axis {
                continue;
            }
            mat[r][c] = j.mat[r][c].clone();
        }
    }
    let j_family = EndoField::from_rows(mat);
    let mut wcomps = vec![Expr::zero(); n];
    for (r, comp) in wcomps.iter_mut().enumerate() {
        if r != t_axis {
            *comp = j.mat[r][t_axis].clone();
        }
    }
    let w = VectorField::new(n, wcomps).simplify();
    for p in grid {
        let wv = w.eval_at(p)?;
        if linalg::norm(&wv) <= tol.degenerate_rel {
            return Err(AcsError::ProjectionDegenerate {
                point: p.coords.clone(),
            });
        }
    }
    // spectrum check: J^3 + J = 0 and rank J = 2
    let j3 = j_family.compose(&j_family).compose(&j_family);
    let spectral = j3.add(&j_family).simplify();
    let mut spectrum_residual = 0.0f64;
    let mut rank_ok = true;
    for p in grid {
        let m = spectral.eval_mat(p)?;
        for v in &m.data {
            spectrum_residual = fmath::max(spectrum_residual, fmath::abs(*v));
        }
        let jm = j_family.eval_mat(p)?;
        if linalg::rank(&jm, tol.rank_rel) != 2 {
            rank_ok = false;
        }
    }
    Ok((
        ProcomplexStructure {
            t_axis,
            j_family,
            w,
        },
        ProcomplexReport {
            spectrum_residual,
            rank_ok,
        },
    ))
}

impl ProcomplexStructure {
    /// Projector onto the image plane along the kernel directions:
    /// `-J^2` (identity on the image, zero on the kernel and the axis).
    pub fn image_projector(&self) -> EndoField {
        self.j_family
            .compose(&self.j_family)
            .scale(&Expr::int(-1))
    }

    /// The operator measuring obstruction to invariance of the family:
    /// `A = (L_w J - J dJ/dt) . (-J^2)`, which kills the kernel field and
    /// the parameter axis by construction.
    pub fn nijenhuis_operator(&self) -> Result<EndoField, AcsError> {
        let lw = self.j_family.lie_derivative(&self.w)?;
        let jprime = self.j_family.diff(self.t_axis);
        let core = lw.sub(&self.j_family.compose(&jprime));
        Ok(core.compose(&self.image_projector()).simplify())
    }

    /// The slice 1-form vanishing on the image plane and the axis with
    /// value 1 on the kernel field, as an exact expression form.
    pub fn alpha(&self) -> Result<DiffForm, AcsError> {
        let n = self.j_family.dim;
        // Pr_w = Id + J^2 - E_tt projects onto the kernel line
        let mut id = EndoField::identity(n);
        id.mat[self.t_axis][self.t_axis] = Expr::zero();
        let pr = id.add(&self.j_family.compose(&self.j_family));
        // alpha(v) = <w, Pr_w v> / <w, w>
        let mut wting = Expr::zero();
        for c in &self.w.comps {
            wting = wting + c.clone() * c.clone();
        }
        let comps = (0..n)
            .map(|k| {
                let col = pr.column(k);
                let mut dot = Expr::zero();
                for (a, b) in col.comps.iter().zip(&self.w.comps) {
                    dot = dot + a.clone() * b.clone();
                }
                (dot / wting.clone()).simplify()
            })
            .collect();
        Ok(DiffForm::from_components(n, 1, comps))
    }

    /// Max residual of the anticommutation identity
    /// `A J + J A - (L_w alpha) (x) w = 0` over the sample points.
    pub fn anticommutation_residual(
        &self,
        samples: &[Point],
    ) -> Result<f64, AcsError> {
        let a = self.nijenhuis_operator()?;
        let alpha = self.alpha()?;
        let lw_alpha = alpha.lie_derivative(&self.w)?;
        let n = self.j_family.dim;
        // (L_w alpha) (x) w as an endomorphism field
        let mut outer = vec![vec![Expr::zero(); n]; n];
        for (r, row) in outer.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = self.w.comps[r].clone() * lw_alpha.comps[c].clone();
            }
        }
        let residual = a
            .compose(&self.j_family)
            .add(&self.j_family.compose(&a))
            .sub(&EndoField::from_rows(outer));
        let mut worst = 0.0f64;
        for p in samples {
            let m = residual.eval_mat(p)?;
            for v in &m.data {
                worst = fmath::max(worst, fmath::abs(*v));
            }
        }
        Ok(worst)
    }
}

/// A time-independent projected structure on a 3-chart.
#[derive(Clone, Debug)]
pub struct CocomplexStructure {
    pub j: EndoField,
    pub w: VectorField,
    pub alpha: DiffForm,
}

#[derive(Clone, Debug)]
pub struct CocomplexReport {
    pub structure: CocomplexStructure,
    /// The invariance obstruction `A = L_w j`.
    pub a_operator: EndoField,
    /// max |L_w alpha| component over the grid
    pub lw_alpha_residual: f64,
    /// max anticommutation residual over the grid
    pub anticommutation_residual: f64,
    /// points where `A` is numerically nonzero and its image equals the
    /// distribution
    pub image_matched: usize,
    /// points where `A` vanishes numerically
    pub a_vanishing: Vec<Point>,
    /// points where the image containment fails
    pub image_mismatched: Vec<Point>,
}

/// Build a time-independent projected structure with prescribed kernel
/// field `w` and a seed rotation on the distribution; its invariance
/// obstruction has image inside (generically equal to) the distribution.
pub fn cocomplex_realize(
    dist: &Distribution,
    w: &VectorField,
    seed: &EndoField,
    grid: &[Point],
    tol: &Tolerances,
) -> Result<CocomplexReport, AcsError> {
    assert_eq!(dist.dim, 3);
    assert_eq!(dist.rank(), 2);
    let (u1, u2) = (&dist.spans[0], &dist.spans[1]);

    // annihilator normalized against w: alpha = (u1 x u2) / det[u1 u2 w]
    let cross = |a: &VectorField, b: &VectorField| -> Vec<Expr> {
        vec![
            a.comps[1].clone() * b.comps[2].clone() - a.comps[2].clone() * b.comps[1].clone(),
            a.comps[2].clone() * b.comps[0].clone() - a.comps[0].clone() * b.comps[2].clone(),
            a.comps[0].clone() * b.comps[1].clone() - a.comps[1].clone() * b.comps[0].clone(),
        ]
    };
    let alpha0 = cross(u1, u2);
    let mut pairing = Expr::zero();
    for (a, b) in alpha0.iter().zip(&w.comps) {
        pairing = pairing + a.clone() * b.clone();
    }
    let pairing = pairing.simplify();
    for p in grid {
        let v = pairing.eval(p)?;
        if fmath::abs(v) <= tol.degenerate_rel {
            return Err(AcsError::NotNormalized {
                point: p.coords.clone(),
            });
        }
    }
    let alpha = DiffForm::from_components(
        3,
        1,
        alpha0
            .iter()
            .map(|c| (c.clone() / pairing.clone()).simplify())
            .collect(),
    );

    let rep = verify_symmetry(w, dist, grid, tol)?;
    if !rep.is_symmetry {
        return Err(AcsError::NotASymmetry {
            witness: rep.witnesses[0].coords.clone(),
        });
    }

    // seed must square to -1 on the distribution
    for p in grid {
        let mut cache = EvalCache::new();
        for u in [u1, u2] {
            let seeded = seed.apply(&seed.apply(u)).add(u);
            let val = seeded.eval_with(&p.coords, &mut cache)?;
            if linalg::norm(&val) > tol.frame {
                return Err(AcsError::SeedNotComplex {
                    point: p.coords.clone(),
                });
            }
        }
    }

    // assemble J with J u_i = seed(u_i), J w = 0 by a symbolic solve
    let cols = [u1.clone(), u2.clone(), w.clone()];
    let mut bmat = vec![vec![Expr::zero(); 3]; 3];
    for (c, field) in cols.iter().enumerate() {
        for r in 0..3 {
            bmat[r][c] = field.comps[r].clone();
        }
    }
    let det = sym_det(&bmat).simplify();
    for p in grid {
        if fmath::abs(det.eval(p)?) <= tol.degenerate_rel {
            return Err(AcsError::FrameDependent {
                point: p.coords.clone(),
            });
        }
    }
    let adj = sym_adjugate(&bmat);
    let images = [seed.apply(u1), seed.apply(u2), VectorField::zero(3)];
    let mut imat = vec![vec![Expr::zero(); 3]; 3];
    for (c, field) in images.iter().enumerate() {
        for r in 0..3 {
            imat[r][c] = field.comps[r].clone();
        }
    }
    let prod = EndoField::from_rows(imat).compose(&EndoField::from_rows(adj));
    let mut jmat = vec![vec![Expr::zero(); 3]; 3];
    for (i, row) in jmat.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = (prod.mat[i][c].clone() / det.clone()).simplify();
        }
    }
    let j = EndoField::from_rows(jmat);

    // invariance obstruction and its checks
    let a_op = j.lie_derivative(w)?.simplify();
    let lw_alpha = alpha.lie_derivative(w)?;
    let lw_alpha_residual = lw_alpha.max_abs_on(grid)?;

    // anticommutation: A J + J A - (L_w alpha) (x) w
    let mut outer = vec![vec![Expr::zero(); 3]; 3];
    for (r, row) in outer.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = w.comps[r].clone() * lw_alpha.comps[c].clone();
        }
    }
    let residual_field = a_op
        .compose(&j)
        .add(&j.compose(&a_op))
        .sub(&EndoField::from_rows(outer));
    let mut anticommutation_residual = 0.0f64;
    let mut image_matched = 0usize;
    let mut a_vanishing = Vec::new();
    let mut image_mismatched = Vec::new();
    for p in grid {
        let m = residual_field.eval_mat(p)?;
        for v in &m.data {
            anticommutation_residual = fmath::max(anticommutation_residual, fmath::abs(*v));
        }
        let am = a_op.eval_mat(p)?;
        let norm: f64 = am.data.iter().fold(0.0, |acc, x| fmath::max(acc, fmath::abs(*x)));
        if norm <= tol.nondegen {
            a_vanishing.push(p.clone());
            continue;
        }
        let a_cols: Vec<Vec<f64>> = (0..3).map(|c| am.col(c)).collect();
        let span_vals = dist.span_values(p)?;
        let (span_basis, _) = linalg::pivoted_basis(&span_vals, tol.rank_rel);
        let mut contained = true;
        for cvec in &a_cols {
            if linalg::orthogonal_residual(cvec, &span_basis) > tol.frame * (1.0 + norm) {
                contained = false;
            }
        }
        let (a_basis, _) = linalg::pivoted_basis(&a_cols, tol.rank_rel);
        if contained && a_basis.len() == 2 {
            image_matched += 1;
        } else if !contained {
            image_mismatched.push(p.clone());
        }
    }

    Ok(CocomplexReport {
        structure: CocomplexStructure { j, w: w.clone(), alpha },
        a_operator: a_op,
        lw_alpha_residual,
        anticommutation_residual,
        image_matched,
        a_vanishing,
        image_mismatched,
    })
}
