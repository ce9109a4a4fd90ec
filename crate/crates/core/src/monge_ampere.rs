//! The elliptic pair pipeline on a symplectic 4-chart: type classification
//! by effectiveness and the Pfaffian sign, normalization to Pf = 1, the
//! Lepage division of d(theta), the curvature-like vector 2-form tied to the
//! dual field, nondegeneracy verdicts, the canonical frame with its
//! structure functions and relation tables, and the slope invariant.
//!
//! All frame solves are symbolic (Cramer over expressions) so the bracket
//! entering the frame is exact; a finite-difference bracket mode exists as a
//! fallback for coefficient expressions that resist simplification.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::almost_complex::{nijenhuis, AcsError, AlmostComplexStructure};
use crate::expr::{EvalCache, EvalError, Expr, Point};
use crate::exterior::{
    endo_from_pair, lepage_divide, pfaffian, sharp, CalcError, DiffForm, EndoField, VectorField,
    VectorValued2Form,
};
use crate::fmath;
use crate::linalg::{self, Mat};
use crate::tolerances::Tolerances;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum MaError {
    #[error("pair is not elliptic on the grid")]
    TypeMismatch,
    #[error("first form is not closed at {point:?}")]
    SymplecticNotClosed { point: Vec<f64> },
    #[error("frame construction failed at step `{step}` at {point:?}")]
    DegeneratePoint { step: String, point: Vec<f64> },
    #[error("frame matrix is singular at {point:?}")]
    FrameSingular { point: Vec<f64> },
    #[error(transparent)]
    Calc(#[from] CalcError),
    #[error(transparent)]
    Acs(#[from] AcsError),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
}

/// Pair type by effectiveness and the sign of the Pfaffian.
#[derive(Clone, Debug, PartialEq)]
pub enum MaType {
    Elliptic,
    Hyperbolic,
    Parabolic,
    /// `theta ^ omega != 0` somewhere.
    NotEffective { witness: Point },
    /// The Pfaffian changes sign (or parabolic rank fails) on the grid.
    Mixed { witnesses: Vec<Point> },
}

impl MaType {
    pub fn name(&self) -> &'static str {
        match self {
            MaType::Elliptic => "Elliptic",
            MaType::Hyperbolic => "Hyperbolic",
            MaType::Parabolic => "Parabolic",
            MaType::NotEffective { .. } => "NotEffective",
            MaType::Mixed { .. } => "Mixed",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ClassifyDetail {
    pub pf: Expr,
    pub pf_min: f64,
    pub pf_max: f64,
    pub effective_residual: f64,
}

/// Classify the pair over the grid.
pub fn classify_pair(
    omega: &DiffForm,
    theta: &DiffForm,
    grid: &[Point],
    tol: &Tolerances,
) -> Result<(MaType, ClassifyDetail), MaError> {
    let pf = pfaffian(theta, omega, grid, tol)?;
    let effect = theta.wedge(omega)?;
    let mut eff_res = 0.0f64;
    let mut not_effective: Option<Point> = None;
    for p in grid {
        let scale = scale_of(theta, p)? * scale_of(omega, p)? + 1e-30;
        let v = effect.comps[0].eval(p)?;
        eff_res = fmath::max(eff_res, fmath::abs(v) / scale);
        if fmath::abs(v) > tol.pf_sign * scale && not_effective.is_none() {
            not_effective = Some(p.clone());
        }
    }
    let mut pf_min = f64::INFINITY;
    let mut pf_max = f64::NEG_INFINITY;
    let mut pf_vals = Vec::new();
    for p in grid {
        let v = pf.eval(p)?;
        pf_min = if v < pf_min { v } else { pf_min };
        pf_max = fmath::max(pf_max, v);
        pf_vals.push(v);
    }
    let detail = ClassifyDetail {
        pf,
        pf_min,
        pf_max,
        effective_residual: eff_res,
    };
    if let Some(witness) = not_effective {
        return Ok((MaType::NotEffective { witness }, detail));
    }
    let tau = tol.pf_sign;
    let ty = if pf_min > tau {
        MaType::Elliptic
    } else if pf_max < -tau {
        MaType::Hyperbolic
    } else if pf_vals.iter().all(|v| fmath::abs(*v) <= tau) {
        // parabolic requires pointwise rank 2 of theta
        let mut ok = true;
        let mut witnesses = Vec::new();
        for p in grid {
            let th = eval_form_matrix(theta, p)?;
            if linalg::rank(&th, tol.rank_rel) != 2 {
                ok = false;
                witnesses.push(p.clone());
            }
        }
        if ok {
            MaType::Parabolic
        } else {
            MaType::Mixed { witnesses }
        }
    } else {
        let witnesses = grid
            .iter()
            .zip(&pf_vals)
            .filter(|(_, v)| fmath::abs(**v) <= tau)
            .map(|(p, _)| p.clone())
            .collect();
        MaType::Mixed { witnesses }
    };
    Ok((ty, detail))
}

fn scale_of(form: &DiffForm, p: &Point) -> Result<f64, EvalError> {
    let mut s = 0.0f64;
    for c in form.eval_comps(p)? {
        s = fmath::max(s, fmath::abs(c));
    }
    Ok(fmath::max(s, 1e-15))
}

fn eval_form_matrix(form: &DiffForm, p: &Point) -> Result<Mat, EvalError> {
    let n = form.dim;
    let mut m = Mat::zeros(n, n);
    let mut cache = EvalCache::new();
    for (pos, pair) in crate::exterior::increasing_subsets(n, 2).iter().enumerate() {
        let v = form.comps[pos].eval_cached(&p.coords, &mut cache)?;
        m[(pair[0], pair[1])] = v;
        m[(pair[1], pair[0])] = -v;
    }
    Ok(m)
}

/// A normalized elliptic pair with its derived structure.
#[derive(Clone, Debug)]
pub struct MongeAmperePair {
    pub omega: DiffForm,
    pub theta: DiffForm,
    /// theta rescaled so the Pfaffian is 1.
    pub theta_hat: DiffForm,
    pub pf: Expr,
    pub j: EndoField,
    pub dtheta_hat: DiffForm,
    pub alpha: DiffForm,
    pub x_alpha: VectorField,
    pub nij: VectorValued2Form,
}

/// Normalize an elliptic pair: rescale theta so the Pfaffian is 1, extract
/// `j`, divide `d theta` by the symplectic form, and keep the dual field.
pub fn normalize_elliptic(
    omega: &DiffForm,
    theta: &DiffForm,
    grid: &[Point],
    tol: &Tolerances,
) -> Result<MongeAmperePair, MaError> {
    let (ty, detail) = classify_pair(omega, theta, grid, tol)?;
    if ty != MaType::Elliptic {
        return Err(MaError::TypeMismatch);
    }
    // the symplectic form must be closed
    let domega = omega.ext_d()?.simplify();
    for p in grid {
        for c in domega.eval_comps(p)? {
            if fmath::abs(c) > tol.exact_zero {
                return Err(MaError::SymplecticNotClosed {
                    point: p.coords.clone(),
                });
            }
        }
    }
    let scale = Expr::one() / detail.pf.clone().sqrt();
    let theta_hat = theta.scale(&scale).simplify();
    let j = endo_from_pair(omega, &theta_hat, grid, tol)?;
    let acs = AlmostComplexStructure::new(j, grid, tol)?;
    let dtheta_hat = theta_hat.ext_d()?.simplify();
    let alpha = lepage_divide(&dtheta_hat, omega, grid, tol)?.simplify();
    let x_alpha = sharp(omega, &alpha, grid, tol)?.simplify();
    let nij = nijenhuis(&acs)?;
    Ok(MongeAmperePair {
        omega: omega.clone(),
        theta: theta.clone(),
        theta_hat,
        pf: detail.pf,
        j: acs.endo,
        dtheta_hat,
        alpha,
        x_alpha,
        nij,
    })
}

impl MongeAmperePair {
    /// alpha evaluated on an expression field.
    fn alpha_on(&self, v: &VectorField) -> Expr {
        let mut acc = Expr::zero();
        for (a, c) in self.alpha.comps.iter().zip(&v.comps) {
            acc = acc + a.clone() * c.clone();
        }
        acc
    }

    /// alpha on a pointwise vector.
    pub fn alpha_at(&self, v: &[f64], coords: &[f64], cache: &mut EvalCache) -> Result<f64, EvalError> {
        let mut acc = 0.0;
        for (a, c) in self.alpha.comps.iter().zip(v) {
            acc += a.eval_cached(coords, cache)? * c;
        }
        Ok(acc)
    }

    /// omega on two pointwise vectors.
    pub fn omega_at(
        &self,
        u: &[f64],
        v: &[f64],
        coords: &[f64],
        cache: &mut EvalCache,
    ) -> Result<f64, EvalError> {
        let mut acc = 0.0;
        for (pos, pair) in crate::exterior::increasing_subsets(4, 2).iter().enumerate() {
            let c = self.omega.comps[pos].eval_cached(coords, cache)?;
            if c != 0.0 {
                acc += c * (u[pair[0]] * v[pair[1]] - u[pair[1]] * v[pair[0]]);
            }
        }
        Ok(acc)
    }
}

/// The vector 2-form combining the Nijenhuis tensor with the Lepage form:
/// `R(x, y) = N(x, y) - x a(jy) + y a(jx) - jx a(y) + jy a(x)`.
pub fn r_tensor(pair: &MongeAmperePair) -> Result<VectorValued2Form, MaError> {
    let n = 4usize;
    let mut vals = Vec::new();
    for p in VectorValued2Form::pairs(n) {
        let (a, b) = (p[0], p[1]);
        let ea = VectorField::coordinate(n, a);
        let eb = VectorField::coordinate(n, b);
        let ja = pair.j.column(a);
        let jb = pair.j.column(b);
        let alpha_jb = pair.alpha_on(&jb);
        let alpha_ja = pair.alpha_on(&ja);
        let alpha_a = pair.alpha.comps[a].clone();
        let alpha_b = pair.alpha.comps[b].clone();
        let total = pair
            .nij
            .value(a, b)
            .sub(&ea.scale(&alpha_jb))
            .add(&eb.scale(&alpha_ja))
            .sub(&ja.scale(&alpha_b))
            .add(&jb.scale(&alpha_a))
            .simplify_small(512);
        vals.push(total);
    }
    Ok(VectorValued2Form { dim: n, vals })
}

/// Residual of the duality identity `j R(x, y) = 2 omega(x, y) X_alpha` on
/// one pair of pointwise vectors.
pub fn jr_identity_residual(
    pair: &MongeAmperePair,
    r: &VectorValued2Form,
    x: &[f64],
    y: &[f64],
    point: &Point,
    cache: &mut EvalCache,
) -> Result<f64, MaError> {
    let coords = &point.coords;
    let rv = r.value_on(x, y, coords, cache)?;
    let jm = pair.j.eval_mat(point)?;
    let jr = jm.matvec(&rv);
    let om = pair.omega_at(x, y, coords, cache)?;
    let xa = pair.x_alpha.eval_with(coords, cache)?;
    let d: Vec<f64> = jr.iter().zip(&xa).map(|(a, b)| a - 2.0 * om * b).collect();
    Ok(linalg::norm(&d))
}

/// Pointwise nondegeneracy verdict with the auxiliary inclusion checks.
#[derive(Clone, Debug)]
pub struct NondegVerdict {
    pub n_norm: f64,
    pub n_nonzero: bool,
    pub dalpha_value: f64,
    pub dalpha_nonzero: bool,
    pub overall: bool,
    /// max |alpha| on the normalized image-plane basis
    pub alpha_on_plane: f64,
    /// orthogonal residual of the dual field against the tensor image
    pub xalpha_in_image: f64,
    /// dim(Ker alpha intersect j Ker alpha) == 2
    pub lagrangian_plane_ok: bool,
    /// `R = 0 implies N = 0` held (vacuously true when R != 0)
    pub lemma2_consistent: bool,
}

/// Both defining conditions at a point: a nonzero tensor, and `d alpha`
/// nonvanishing on the image plane.
pub fn nondegenerate(
    pair: &MongeAmperePair,
    r: &VectorValued2Form,
    point: &Point,
    tol: &Tolerances,
) -> Result<NondegVerdict, MaError> {
    let coords = &point.coords;
    let mut cache = EvalCache::new();
    let mut n_norm = 0.0f64;
    let mut n_vals = Vec::new();
    for v in &pair.nij.vals {
        let val = v.eval_with(coords, &mut cache)?;
        for c in &val {
            n_norm = fmath::max(n_norm, fmath::abs(*c));
        }
        n_vals.push(val);
    }
    let n_nonzero = n_norm > tol.nondegen;

    // image plane spanned by the dual field and its rotation
    let xa = pair.x_alpha.eval_with(coords, &mut cache)?;
    let jm = pair.j.eval_mat(point)?;
    let jxa = jm.matvec(&xa);
    let xa_norm = linalg::norm(&xa);
    let (dalpha_value, alpha_on_plane, xalpha_in_image) = if xa_norm > tol.nondegen {
        let z1: Vec<f64> = xa.iter().map(|c| c / xa_norm).collect();
        let jn = linalg::norm(&jxa);
        let z2: Vec<f64> = jxa.iter().map(|c| c / jn).collect();
        let dalpha = pair.alpha.ext_d()?;
        let da = dalpha.value_on(&[z1.clone(), z2.clone()], point)?;
        let a1 = pair.alpha_at(&z1, coords, &mut cache)?;
        let a2 = pair.alpha_at(&z2, coords, &mut cache)?;
        let (basis, _) = linalg::pivoted_basis(&n_vals, tol.rank_rel);
        let xres = if basis.len() == 2 {
            linalg::orthogonal_residual(&z1, &basis)
        } else {
            f64::INFINITY
        };
        (da, fmath::max(fmath::abs(a1), fmath::abs(a2)), xres)
    } else {
        (0.0, 0.0, f64::INFINITY)
    };
    let dalpha_nonzero = fmath::abs(dalpha_value) > tol.nondegen;

    // Ker alpha and j Ker alpha intersect in the (Lagrangian) image plane
    let mut alpha_vec = vec![0.0; 4];
    for (k, c) in pair.alpha.comps.iter().enumerate() {
        alpha_vec[k] = c.eval_cached(coords, &mut cache)?;
    }
    // alpha . j as a covector
    let mut alpha_j = vec![0.0; 4];
    for k in 0..4 {
        for i in 0..4 {
            alpha_j[k] += alpha_vec[i] * jm[(i, k)];
        }
    }
    let m = Mat::from_rows(&[alpha_vec.clone(), alpha_j]);
    let kernel_dim = 4 - linalg::rank(&m, tol.rank_rel);
    let lagrangian_plane_ok = !n_nonzero || kernel_dim == 2;

    // R = 0 at the point must force N = 0
    let mut r_norm = 0.0f64;
    for v in &r.vals {
        for c in v.eval_with(coords, &mut cache)? {
            r_norm = fmath::max(r_norm, fmath::abs(c));
        }
    }
    let lemma2_consistent = r_norm > tol.nondegen || !n_nonzero;

    Ok(NondegVerdict {
        n_norm,
        n_nonzero,
        dalpha_value,
        dalpha_nonzero,
        overall: n_nonzero && dalpha_nonzero,
        alpha_on_plane,
        xalpha_in_image,
        lagrangian_plane_ok,
        lemma2_consistent,
    })
}

/// How the frame bracket is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BracketMode {
    /// Exact expression bracket (default).
    Symbolic,
    /// Central differences with one Richardson step.
    NumericFd,
}

/// The canonical frame as symbolic fields (symbolic mode only).
#[derive(Clone, Debug)]
pub struct CanonicalFrame {
    pub p1: VectorField,
    pub p2: VectorField,
    pub q1: VectorField,
    pub q2: VectorField,
    pub z0: VectorField,
    pub l1_generator: VectorField,
}

/// Frame data evaluated at one grid point.
#[derive(Clone, Debug)]
pub struct FramePointData {
    pub point: Point,
    /// P1, P2, Q1, Q2
    pub frame: [Vec<f64>; 4],
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub z0: Vec<f64>,
    /// unit complex scalar fixing the line pair inside the kernel plane
    pub w: (f64, f64),
    /// `arg(w) / 2`, the slope invariant (mod pi)
    pub slope: f64,
    /// residuals: alpha(X0), alpha(jX0), alpha(Y0), alpha(jY0) - 1
    pub lemma3: [f64; 4],
    /// |omega(X0, jY0) - lambda| for the input scale lambda
    pub normalization_residual: f64,
}

/// Outcome of the frame construction over a grid.
#[derive(Clone, Debug)]
pub struct FrameResult {
    /// Symbolic fields when built in symbolic mode.
    pub fields: Option<CanonicalFrame>,
    pub points: Vec<FramePointData>,
    /// (step, point) pairs where the construction failed; such points are
    /// excluded, never interpolated across.
    pub degenerate: Vec<(String, Point)>,
}

/// Build the canonical frame. The construction per point:
/// X0 is the dual field (any rescaling gives the same frame, checked by the
/// gauge tests); Y0 solves `N(X0, Y0) = X0` modulo the image plane; P1 is
/// the multiple of X0 with `omega(P1, jY0) = 1`; P2 = j P1; Z0 = [P1, P2];
/// the kernel-plane line through the rotated bracket gives Q2 normalized by
/// `omega(P2, Q2) = 1` (equivalently `N(P1, Q2) = P1`, verified by the
/// relation tables); Q1 = j Q2.
pub fn canonical_frame(
    pair: &MongeAmperePair,
    grid: &[Point],
    tol: &Tolerances,
    mode: BracketMode,
) -> Result<FrameResult, MaError> {
    let fields = match mode {
        BracketMode::Symbolic => {
            let p1 = pair.x_alpha.clone();
            let p2 = pair.j.apply(&p1).simplify();
            let z0 = p1.lie_bracket(&p2)?.simplify();
            let jz0 = pair.j.apply(&z0).simplify();
            let a_z0 = pair.alpha_on(&z0).simplify();
            let a_jz0 = pair.alpha_on(&jz0).simplify();
            let l1_generator = z0.scale(&a_jz0).sub(&jz0.scale(&a_z0)).simplify();
            // t = omega(P2, G) extracts the normalization scalar
            let t = omega_on_fields(&pair.omega, &p2, &l1_generator).simplify();
            let q2 = VectorField::new(
                4,
                l1_generator
                    .comps
                    .iter()
                    .map(|c| (c.clone() / t.clone()).simplify())
                    .collect(),
            );
            let q1 = pair.j.apply(&q2).simplify();
            Some(CanonicalFrame {
                p1,
                p2,
                q1,
                q2,
                z0,
                l1_generator,
            })
        }
        BracketMode::NumericFd => None,
    };

    let mut points = Vec::new();
    let mut degenerate = Vec::new();
    for p in grid {
        match frame_at_point(pair, p, 1.0, tol, mode) {
            Ok(data) => points.push(data),
            Err(MaError::DegeneratePoint { step, point }) => {
                degenerate.push((step, Point::new(point)));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(FrameResult {
        fields,
        points,
        degenerate,
    })
}

fn omega_on_fields(omega: &DiffForm, u: &VectorField, v: &VectorField) -> Expr {
    let mut acc = Expr::zero();
    for (pos, pair) in crate::exterior::increasing_subsets(4, 2).iter().enumerate() {
        let c = &omega.comps[pos];
        if c.is_zero_const() {
            continue;
        }
        let term = u.comps[pair[0]].clone() * v.comps[pair[1]].clone()
            - u.comps[pair[1]].clone() * v.comps[pair[0]].clone();
        acc = acc + c.clone() * term;
    }
    acc
}

/// Pointwise frame pipeline. `lambda` rescales the canonical generator (the
/// result must not depend on it); the bracket is exact or finite-difference
/// per `mode`.
pub fn frame_at_point(
    pair: &MongeAmperePair,
    point: &Point,
    lambda: f64,
    tol: &Tolerances,
    mode: BracketMode,
) -> Result<FramePointData, MaError> {
    let coords = &point.coords;
    let mut cache = EvalCache::new();
    let fail = |step: &str| MaError::DegeneratePoint {
        step: String::from(step),
        point: point.coords.clone(),
    };

    // X0: a generator of the dual line
    let xa = pair.x_alpha.eval_with(coords, &mut cache)?;
    let x0: Vec<f64> = xa.iter().map(|c| lambda * c).collect();
    if linalg::norm(&x0) <= tol.nondegen {
        return Err(fail("x0"));
    }
    let jm = pair.j.eval_mat(point)?;

    // Y0: minimum-norm solution of N(X0, .) = X0 (zero component along the
    // image plane in the adapted orthonormal frame)
    let mut m = Mat::zeros(4, 4);
    for k in 0..4 {
        let mut e = vec![0.0; 4];
        e[k] = 1.0;
        let col = pair.nij.value_on(&x0, &e, coords, &mut cache)?;
        for i in 0..4 {
            m[(i, k)] = col[i];
        }
    }
    let y0 = linalg::pseudo_solve(&m, &x0, tol.rank_rel);
    let solved = m.matvec(&y0);
    let res = linalg::norm(&solved.iter().zip(&x0).map(|(a, b)| a - b).collect::<Vec<_>>());
    if res > tol.frame * (1.0 + linalg::norm(&x0)) {
        return Err(fail("y0"));
    }

    // Lemma-3 residuals
    let jx0 = jm.matvec(&x0);
    let jy0 = jm.matvec(&y0);
    let lemma3 = [
        fmath::abs(pair.alpha_at(&x0, coords, &mut cache)? / lambda),
        fmath::abs(pair.alpha_at(&jx0, coords, &mut cache)? / lambda),
        fmath::abs(pair.alpha_at(&y0, coords, &mut cache)?),
        fmath::abs(pair.alpha_at(&jy0, coords, &mut cache)? - 1.0),
    ];
    for r in lemma3 {
        if r > tol.frame * 10.0 {
            return Err(fail("lemma3"));
        }
    }

    // P1: rescale X0 so omega(P1, jY0) = 1
    let s = pair.omega_at(&x0, &jy0, coords, &mut cache)?;
    if fmath::abs(s) <= tol.nondegen {
        return Err(fail("p1"));
    }
    let normalization_residual = fmath::abs(s - lambda);
    let p1: Vec<f64> = x0.iter().map(|c| c / s).collect();
    let p2 = jm.matvec(&p1);

    // Z0 = [P1, P2]
    let z0 = match mode {
        BracketMode::Symbolic => {
            let p1f = pair.x_alpha.clone();
            let p2f = pair.j.apply(&p1f);
            let z = p1f.lie_bracket(&p2f)?;
            let zv = z.eval_with(coords, &mut cache)?;
            // the symbolic bracket is of the lambda-free fields; P1 here is
            // X_alpha / s with s = lambda, so the brackets agree
            zv
        }
        BracketMode::NumericFd => {
            frame_bracket_fd(pair, point, lambda, tol)?
        }
    };

    // L1: the kernel-plane line inside the rotated bracket plane
    let jz0 = jm.matvec(&z0);
    let a_z0 = pair.alpha_at(&z0, coords, &mut cache)?;
    let a_jz0 = pair.alpha_at(&jz0, coords, &mut cache)?;
    let scale = fmath::hypot2(a_z0, a_jz0);
    if scale <= tol.nondegen {
        return Err(fail("l1"));
    }
    let g: Vec<f64> = z0
        .iter()
        .zip(&jz0)
        .map(|(z, jz)| a_jz0 * z - a_z0 * jz)
        .collect();

    // Q2 = G / omega(P2, G); Q1 = j Q2
    let t = pair.omega_at(&p2, &g, coords, &mut cache)?;
    if fmath::abs(t) <= tol.nondegen {
        return Err(fail("q2"));
    }
    let q2: Vec<f64> = g.iter().map(|c| c / t).collect();
    let q1 = jm.matvec(&q2);

    // the unit complex scalar w with alpha(w Z0) = 0, |w| = 1,
    // Re(w) > 0 or (Re(w) = 0, Im(w) > 0); values within exact_zero of the
    // boundary are snapped to it so the measure-zero rule stays stable
    let (mut wx, mut wy) = (a_jz0 / scale, -a_z0 / scale);
    if fmath::abs(wx) <= tol.exact_zero {
        wx = 0.0;
    }
    if wx < 0.0 || (wx == 0.0 && wy < 0.0) {
        wx = -wx;
        wy = -wy;
    }
    let slope = 0.5 * fmath::atan2(wy, wx);

    Ok(FramePointData {
        point: point.clone(),
        frame: [p1, p2, q1, q2],
        x0,
        y0,
        z0,
        w: (wx, wy),
        slope,
        lemma3,
        normalization_residual,
    })
}

/// Finite-difference bracket of the pointwise-normalized frame fields.
fn frame_bracket_fd(
    pair: &MongeAmperePair,
    point: &Point,
    lambda: f64,
    tol: &Tolerances,
) -> Result<Vec<f64>, MaError> {
    let h = tol.fd_step;
    // P fields evaluated from scratch at shifted points
    let p_at = |q: &Point| -> Result<(Vec<f64>, Vec<f64>), MaError> {
        let mut cache = EvalCache::new();
        let coords = &q.coords;
        let xa = pair.x_alpha.eval_with(coords, &mut cache)?;
        let x0: Vec<f64> = xa.iter().map(|c| lambda * c).collect();
        let jm = pair.j.eval_mat(q)?;
        let mut m = Mat::zeros(4, 4);
        for k in 0..4 {
            let mut e = vec![0.0; 4];
            e[k] = 1.0;
            let col = pair.nij.value_on(&x0, &e, coords, &mut cache)?;
            for i in 0..4 {
                m[(i, k)] = col[i];
            }
        }
        let y0 = linalg::pseudo_solve(&m, &x0, tol.rank_rel);
        let jy0 = jm.matvec(&y0);
        let s = pair.omega_at(&x0, &jy0, coords, &mut cache)?;
        let p1: Vec<f64> = x0.iter().map(|c| c / s).collect();
        let p2 = jm.matvec(&p1);
        Ok((p1, p2))
    };
    let (p1_0, p2_0) = p_at(point)?;
    let dirderiv = |along: &[f64], which: usize, step: f64| -> Result<Vec<f64>, MaError> {
        let mut up = point.clone();
        let mut dn = point.clone();
        for i in 0..4 {
            up.coords[i] += step * along[i];
            dn.coords[i] -= step * along[i];
        }
        let (u1, u2) = p_at(&up)?;
        let (d1, d2) = p_at(&dn)?;
        let (u, d) = if which == 1 { (u1, d1) } else { (u2, d2) };
        Ok(u.iter().zip(&d).map(|(a, b)| (a - b) / (2.0 * step)).collect())
    };
    let richardson = |along: &[f64], which: usize| -> Result<Vec<f64>, MaError> {
        let d1 = dirderiv(along, which, h)?;
        let d2 = dirderiv(along, which, h / 2.0)?;
        Ok(d1.iter().zip(&d2).map(|(a, b)| (4.0 * b - a) / 3.0).collect())
    };
    let dp2 = richardson(&p1_0, 2)?;
    let dp1 = richardson(&p2_0, 1)?;
    Ok(dp2.iter().zip(&dp1).map(|(a, b)| a - b).collect())
}

/// Bracket coefficients `[f_i, f_j] = sum_k c^k_ij f_k` at a point, for the
/// six increasing pairs, with the reconstruction residual.
#[derive(Clone, Debug)]
pub struct StructureFunctions {
    pub point: Point,
    /// `coeffs[pair][k]` for pairs (0,1), (0,2), (0,3), (1,2), (1,3), (2,3).
    pub coeffs: [[f64; 4]; 6],
    pub residual: f64,
}

/// Expand the six frame brackets in the frame itself.
pub fn structure_functions(
    pair: &MongeAmperePair,
    frame: &FrameResult,
    tol: &Tolerances,
    mode: BracketMode,
) -> Result<Vec<StructureFunctions>, MaError> {
    let mut out = Vec::new();
    match mode {
        BracketMode::Symbolic => {
            let fields = frame
                .fields
                .as_ref()
                .expect("symbolic mode carries fields");
            let list = [&fields.p1, &fields.p2, &fields.q1, &fields.q2];
            // exact brackets of the six pairs
            let mut brackets = Vec::new();
            for i in 0..4 {
                for j in (i + 1)..4 {
                    brackets.push(((i, j), list[i].lie_bracket(list[j])?));
                }
            }
            for data in &frame.points {
                out.push(expand_at(pair, data, &brackets, tol, |b, p, cache| {
                    b.eval_with(&p.coords, cache).map_err(MaError::from)
                })?);
            }
        }
        BracketMode::NumericFd => {
            for data in &frame.points {
                let vals = fd_frame_brackets(pair, data, tol)?;
                let mut brackets = Vec::new();
                let mut idx = 0usize;
                for i in 0..4 {
                    for j in (i + 1)..4 {
                        brackets.push(((i, j), vals[idx].clone()));
                        idx += 1;
                    }
                }
                out.push(expand_at(pair, data, &brackets, tol, |b, _, _| Ok(b.clone()))?);
            }
        }
    }
    Ok(out)
}

fn expand_at<B>(
    _pair: &MongeAmperePair,
    data: &FramePointData,
    brackets: &[((usize, usize), B)],
    tol: &Tolerances,
    eval: impl Fn(&B, &Point, &mut EvalCache) -> Result<Vec<f64>, MaError>,
) -> Result<StructureFunctions, MaError> {
    let mut cache = EvalCache::new();
    let fmat = Mat::from_cols(&data.frame.to_vec());
    let mut coeffs = [[0.0; 4]; 6];
    let mut residual = 0.0f64;
    for (slot, ((_, _), b)) in brackets.iter().enumerate() {
        let val = eval(b, &data.point, &mut cache)?;
        let Some(c) = linalg::solve(&fmat, &val, tol.degenerate_rel) else {
            return Err(MaError::FrameSingular {
                point: data.point.coords.clone(),
            });
        };
        let recon = fmat.matvec(&c);
        let r = linalg::norm(
            &recon
                .iter()
                .zip(&val)
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        );
        residual = fmath::max(residual, r);
        coeffs[slot].copy_from_slice(&c);
    }
    Ok(StructureFunctions {
        point: data.point.clone(),
        coeffs,
        residual,
    })
}

/// Finite-difference brackets of all six frame pairs at a point.
fn fd_frame_brackets(
    pair: &MongeAmperePair,
    data: &FramePointData,
    tol: &Tolerances,
) -> Result<Vec<Vec<f64>>, MaError> {
    let h = tol.fd_step;
    let frame_at = |q: &Point| -> Result<[Vec<f64>; 4], MaError> {
        let d = frame_at_point(pair, q, 1.0, tol, BracketMode::Symbolic)
            .or_else(|_| frame_at_point(pair, q, 1.0, tol, BracketMode::NumericFd))?;
        Ok(d.frame)
    };
    // derivative of frame field `which` along direction
    let dirderiv = |along: &[f64], which: usize, step: f64| -> Result<Vec<f64>, MaError> {
        let mut up = data.point.clone();
        let mut dn = data.point.clone();
        for i in 0..4 {
            up.coords[i] += step * along[i];
            dn.coords[i] -= step * along[i];
        }
        let fu = frame_at(&up)?;
        let fd = frame_at(&dn)?;
        Ok(fu[which]
            .iter()
            .zip(&fd[which])
            .map(|(a, b)| (a - b) / (2.0 * step))
            .collect())
    };
    let richardson = |along: &[f64], which: usize| -> Result<Vec<f64>, MaError> {
        let d1 = dirderiv(along, which, h)?;
        let d2 = dirderiv(along, which, h / 2.0)?;
        Ok(d1.iter().zip(&d2).map(|(a, b)| (4.0 * b - a) / 3.0).collect())
    };
    let mut out = Vec::new();
    for i in 0..4 {
        for j in (i + 1)..4 {
            let dji = richardson(&data.frame[i], j)?;
            let dij = richardson(&data.frame[j], i)?;
            out.push(dji.iter().zip(&dij).map(|(a, b)| a - b).collect());
        }
    }
    Ok(out)
}

/// Residuals of the four frame relation tables at one point.
#[derive(Clone, Debug)]
pub struct TableReport {
    pub point: Point,
    pub omega_residual: f64,
    pub nijenhuis_residual: f64,
    pub j_residual: f64,
    pub alpha_residual: f64,
    pub pass: bool,
}

/// Check the defining tables of the frame: the symplectic pairings, the
/// Nijenhuis values, the rotation action and the kernel-form values.
pub fn verify_frame_tables(
    pair: &MongeAmperePair,
    frame: &FrameResult,
    tol: &Tolerances,
) -> Result<Vec<TableReport>, MaError> {
    let mut out = Vec::new();
    for data in &frame.points {
        let coords = &data.point.coords;
        let mut cache = EvalCache::new();
        let [p1, p2, q1, q2] = &data.frame;

        // omega table
        let omega_expect = [
            ((0usize, 1usize), 0.0f64),
            ((0, 2), 1.0),
            ((0, 3), 0.0),
            ((1, 2), 0.0),
            ((1, 3), 1.0),
            ((2, 3), 0.0),
        ];
        let fr = [p1, p2, q1, q2];
        let mut omega_residual = 0.0f64;
        for ((i, j), expect) in omega_expect {
            let v = pair.omega_at(fr[i], fr[j], coords, &mut cache)?;
            omega_residual = fmath::max(omega_residual, fmath::abs(v - expect));
        }

        // Nijenhuis table: N(P1,P2)=0, N(P1,Q1)=-P2, N(P1,Q2)=P1,
        // N(P2,Q1)=-P1, N(P2,Q2)=-P2, N(Q1,Q2)=0
        let zero = vec![0.0; 4];
        let neg = |v: &[f64]| -> Vec<f64> { v.iter().map(|x| -x).collect() };
        let n_expect: [((usize, usize), Vec<f64>); 6] = [
            ((0, 1), zero.clone()),
            ((0, 2), neg(p2)),
            ((0, 3), p1.clone()),
            ((1, 2), neg(p1)),
            ((1, 3), neg(p2)),
            ((2, 3), zero),
        ];
        let mut nijenhuis_residual = 0.0f64;
        for ((i, j), expect) in &n_expect {
            let v = pair.nij.value_on(fr[*i], fr[*j], coords, &mut cache)?;
            let d: Vec<f64> = v.iter().zip(expect).map(|(a, b)| a - b).collect();
            nijenhuis_residual = fmath::max(nijenhuis_residual, linalg::norm(&d));
        }

        // j row: jP1 = P2, jP2 = -P1, jQ1 = -Q2, jQ2 = Q1
        let jm = pair.j.eval_mat(&data.point)?;
        let j_expect: [(usize, Vec<f64>); 4] = [
            (0, p2.clone()),
            (1, neg(p1)),
            (2, neg(q2)),
            (3, q1.clone()),
        ];
        let mut j_residual = 0.0f64;
        for (i, expect) in &j_expect {
            let v = jm.matvec(fr[*i]);
            let d: Vec<f64> = v.iter().zip(expect).map(|(a, b)| a - b).collect();
            j_residual = fmath::max(j_residual, linalg::norm(&d));
        }

        // alpha row: alpha(P1) = alpha(P2) = alpha(Q2) = 0, alpha(Q1) = 1
        let a_expect = [0.0, 0.0, 1.0, 0.0];
        let mut alpha_residual = 0.0f64;
        for (i, expect) in a_expect.iter().enumerate() {
            let v = pair.alpha_at(fr[i], coords, &mut cache)?;
            alpha_residual = fmath::max(alpha_residual, fmath::abs(v - expect));
        }

        let pass = omega_residual <= tol.table
            && nijenhuis_residual <= tol.table
            && j_residual <= tol.table
            && alpha_residual <= tol.table;
        out.push(TableReport {
            point: data.point.clone(),
            omega_residual,
            nijenhuis_residual,
            j_residual,
            alpha_residual,
            pass,
        });
    }
    Ok(out)
}

/// Model forms used by the verification suites.
pub mod models {
    use super::*;

    /// The standard symplectic form dx12 + dx34.
    pub fn standard_omega() -> DiffForm {
        DiffForm::zero(4, 2)
            .with_term(&[0, 1], Expr::one())
            .with_term(&[2, 3], Expr::one())
    }

    /// Effective elliptic basis element dx14 + dx23 (square = volume).
    pub fn beta1() -> DiffForm {
        DiffForm::zero(4, 2)
            .with_term(&[0, 3], Expr::one())
            .with_term(&[1, 2], Expr::one())
    }

    /// Effective elliptic basis element dx13 - dx24 (square = volume,
    /// orthogonal to beta1 under the wedge pairing).
    pub fn beta2() -> DiffForm {
        DiffForm::zero(4, 2)
            .with_term(&[0, 2], Expr::one())
            .with_term(&[1, 3], Expr::int(-1))
    }

    /// The rotating effective family `cos(phi) beta1 + sin(phi) beta2`,
    /// which has Pfaffian identically 1 and is nondegenerate everywhere.
    pub fn rotating_theta(phi: &Expr) -> DiffForm {
        beta1()
            .scale(&phi.clone().cos())
            .add(&beta2().scale(&phi.clone().sin()))
            .simplify()
    }
}
