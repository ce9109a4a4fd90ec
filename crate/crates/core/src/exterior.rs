//! Vector fields, differential forms and endomorphism fields over a chart,
//! with the exterior-calculus operations and the symplectic linear algebra
//! built on them.
//!
//! Forms store one coefficient per strictly increasing multi-index, in
//! lexicographic order, and evaluate with the determinant convention:
//! `phi(e_{i1},..,e_{ik})` equals the stored coefficient for an increasing
//! index tuple, with no 1/k! factors. All pointwise solves (`sharp`,
//! `lepage_divide`, `endo_from_pair`) run symbolically by Cramer's rule so
//! downstream Lie brackets of the constructed fields stay exact.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::expr::{EvalCache, EvalError, Expr, Point};
use crate::fmath;
use crate::linalg::{self, Mat};
use crate::tolerances::Tolerances;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum CalcError {
    #[error("chart dimensions differ: {0} vs {1}")]
    ChartMismatch(usize, usize),
    #[error("form degree {degree} out of range for chart dimension {dim}")]
    DegreeOverflow { degree: usize, dim: usize },
    #[error("operation needs a form of degree >= 1")]
    DegreeError,
    #[error("symplectic form degenerates at sample {point:?}")]
    DegenerateSymplectic { point: Vec<f64> },
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
}

fn check_dim(a: usize, b: usize) -> Result<(), CalcError> {
    if a != b {
        return Err(CalcError::ChartMismatch(a, b));
    }
    Ok(())
}

/// Strictly increasing k-subsets of 0..n in lexicographic order.
pub fn increasing_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k > n {
        return Vec::new();
    }
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k - 1;
        while idx[i] == i + n - k {
            if i == 0 {
                return out;
            }
            i -= 1;
        }
        idx[i] += 1;
        for j in (i + 1)..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn subset_position(subsets: &[Vec<usize>], target: &[usize]) -> usize {
    subsets
        .iter()
        .position(|s| s.as_slice() == target)
        .expect("increasing index tuple in range")
}

/// Merge two strictly increasing index tuples. Returns the merged tuple and
/// the sign of the interleaving permutation, or None when they intersect.
pub fn merge_sign(a: &[usize], b: &[usize]) -> Option<(Vec<usize>, i32)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    let mut inversions = 0usize;
    while i < a.len() && j < b.len() {
        if a[i] == b[j] {
            return None;
        }
        if a[i] < b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            // b[j] jumps over the remaining elements of a
            inversions += a.len() - i;
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    let sign = if inversions % 2 == 0 { 1 } else { -1 };
    Some((out, sign))
}

/// Sort an index tuple, tracking the permutation sign; None on repeats.
fn sorted_with_sign(indices: &[usize]) -> Option<(Vec<usize>, i32)> {
    let mut v: Vec<usize> = indices.to_vec();
    let mut sign = 1i32;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    for w in v.windows(2) {
        if w[0] == w[1] {
            return None;
        }
    }
    Some((v, sign))
}

/// A vector field with expression coefficients in the coordinate frame.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub dim: usize,
    pub comps: Vec<Expr>,
}

impl VectorField {
    pub fn new(dim: usize, comps: Vec<Expr>) -> Self {
        assert_eq!(comps.len(), dim);
        VectorField { dim, comps }
    }

    pub fn zero(dim: usize) -> Self {
        VectorField {
            dim,
            comps: vec![Expr::zero(); dim],
        }
    }

    /// The coordinate field along axis `i`.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut comps = vec![Expr::zero(); dim];
        comps[i] = Expr::one();
        VectorField { dim, comps }
    }

    pub fn from_consts(dim: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), dim);
        VectorField {
            dim,
            comps: values.iter().map(|&v| Expr::float(v)).collect(),
        }
    }

    pub fn scale(&self, c: &Expr) -> Self {
        VectorField {
            dim: self.dim,
            comps: self.comps.iter().map(|e| c.clone() * e.clone()).collect(),
        }
    }

    pub fn add(&self, other: &VectorField) -> Self {
        assert_eq!(self.dim, other.dim);
        VectorField {
            dim: self.dim,
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        }
    }

    pub fn sub(&self, other: &VectorField) -> Self {
        assert_eq!(self.dim, other.dim);
        VectorField {
            dim: self.dim,
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.clone() - b.clone())
                .collect(),
        }
    }

    pub fn simplify(&self) -> Self {
        VectorField {
            dim: self.dim,
            comps: self.comps.iter().map(|e| e.simplify()).collect(),
        }
    }

    /// Component-wise size-guarded simplification.
    pub fn simplify_small(&self, node_cap: usize) -> Self {
        VectorField {
            dim: self.dim,
            comps: self
                .comps
                .iter()
                .map(|e| e.simplify_small(node_cap))
                .collect(),
        }
    }

    /// Apply the field as a derivation to a scalar expression.
    pub fn derive(&self, f: &Expr) -> Expr {
        let mut acc = Expr::zero();
        for (k, vk) in self.comps.iter().enumerate() {
            acc = acc + vk.clone() * f.diff(k);
        }
        acc
    }

    /// Lie bracket `[v, w]^i = v^k d_k w^i - w^k d_k v^i`, exact.
    pub fn lie_bracket(&self, other: &VectorField) -> Result<VectorField, CalcError> {
        check_dim(self.dim, other.dim)?;
        let comps = (0..self.dim)
            .map(|i| self.derive(&other.comps[i]) - other.derive(&self.comps[i]))
            .collect();
        Ok(VectorField {
            dim: self.dim,
            comps,
        })
    }

    pub fn eval_at(&self, p: &Point) -> Result<Vec<f64>, EvalError> {
        let mut cache = EvalCache::new();
        self.eval_with(&p.coords, &mut cache)
    }

    pub fn eval_with(&self, coords: &[f64], cache: &mut EvalCache) -> Result<Vec<f64>, EvalError> {
        self.comps
            .iter()
            .map(|e| e.eval_cached(coords, cache))
            .collect()
    }
}

/// A differential k-form; `comps[c]` is the coefficient of the c-th
/// increasing multi-index of `increasing_subsets(dim, degree)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffForm {
    pub dim: usize,
    pub degree: usize,
    pub comps: Vec<Expr>,
}

impl DiffForm {
    pub fn zero(dim: usize, degree: usize) -> Self {
        let len = increasing_subsets(dim, degree).len();
        DiffForm {
            dim,
            degree,
            comps: vec![Expr::zero(); len],
        }
    }

    pub fn from_components(dim: usize, degree: usize, comps: Vec<Expr>) -> Self {
        assert_eq!(comps.len(), increasing_subsets(dim, degree).len());
        DiffForm { dim, degree, comps }
    }

    /// Add `coeff * dx_I` for an increasing index tuple `I` (0-based).
    pub fn with_term(mut self, indices: &[usize], coeff: Expr) -> Self {
        let subsets = increasing_subsets(self.dim, self.degree);
        let pos = subset_position(&subsets, indices);
        let old = core::mem::replace(&mut self.comps[pos], Expr::zero());
        self.comps[pos] = old + coeff;
        self
    }

    pub fn simplify(&self) -> Self {
        DiffForm {
            dim: self.dim,
            degree: self.degree,
            comps: self.comps.iter().map(|e| e.simplify()).collect(),
        }
    }

    pub fn add(&self, other: &DiffForm) -> Self {
        assert_eq!((self.dim, self.degree), (other.dim, other.degree));
        DiffForm {
            dim: self.dim,
            degree: self.degree,
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        }
    }

    pub fn scale(&self, c: &Expr) -> Self {
        DiffForm {
            dim: self.dim,
            degree: self.degree,
            comps: self.comps.iter().map(|e| c.clone() * e.clone()).collect(),
        }
    }

    /// Coefficient at an arbitrary index tuple, with antisymmetry signs.
    pub fn coeff_at(&self, indices: &[usize]) -> Expr {
        match sorted_with_sign(indices) {
            None => Expr::zero(),
            Some((sorted, sign)) => {
                let subsets = increasing_subsets(self.dim, self.degree);
                let pos = subset_position(&subsets, &sorted);
                if sign > 0 {
                    self.comps[pos].clone()
                } else {
                    self.comps[pos].clone().neg()
                }
            }
        }
    }

    /// Exterior derivative.
    pub fn ext_d(&self) -> Result<DiffForm, CalcError> {
        if self.degree >= self.dim {
            return Err(CalcError::DegreeOverflow {
                degree: self.degree + 1,
                dim: self.dim,
            });
        }
        let out_subsets = increasing_subsets(self.dim, self.degree + 1);
        let comps = out_subsets
            .iter()
            .map(|k_idx| {
                let mut acc = Expr::zero();
                for (pos, &i) in k_idx.iter().enumerate() {
                    let rest: Vec<usize> = k_idx
                        .iter()
                        .enumerate()
                        .filter(|&(p, _)| p != pos)
                        .map(|(_, &v)| v)
                        .collect();
                    let term = self.coeff_at(&rest).diff(i);
                    acc = if pos % 2 == 0 { acc + term } else { acc - term };
                }
                acc.simplify()
            })
            .collect();
        Ok(DiffForm {
            dim: self.dim,
            degree: self.degree + 1,
            comps,
        })
    }

    /// Wedge product, graded-commutative with the determinant convention.
    pub fn wedge(&self, other: &DiffForm) -> Result<DiffForm, CalcError> {
        check_dim(self.dim, other.dim)?;
        let degree = self.degree + other.degree;
        if degree > self.dim {
            return Err(CalcError::DegreeOverflow {
                degree,
                dim: self.dim,
            });
        }
        let a_idx = increasing_subsets(self.dim, self.degree);
        let b_idx = increasing_subsets(self.dim, other.degree);
        let out_idx = increasing_subsets(self.dim, degree);
        let mut comps = vec![Expr::zero(); out_idx.len()];
        for (ia, i_tuple) in a_idx.iter().enumerate() {
            if self.comps[ia].is_zero_const() {
                continue;
            }
            for (ib, j_tuple) in b_idx.iter().enumerate() {
                if other.comps[ib].is_zero_const() {
                    continue;
                }
                if let Some((merged, sign)) = merge_sign(i_tuple, j_tuple) {
                    let pos = subset_position(&out_idx, &merged);
                    let term = self.comps[ia].clone() * other.comps[ib].clone();
                    let term = if sign > 0 { term } else { term.neg() };
                    let old = core::mem::replace(&mut comps[pos], Expr::zero());
                    comps[pos] = old + term;
                }
            }
        }
        Ok(DiffForm {
            dim: self.dim,
            degree,
            comps: comps.into_iter().map(|e| e.simplify()).collect(),
        })
    }

    /// Interior product (contraction in the first slot).
    pub fn interior(&self, v: &VectorField) -> Result<DiffForm, CalcError> {
        check_dim(self.dim, v.dim)?;
        if self.degree == 0 {
            return Err(CalcError::DegreeError);
        }
        let out_idx = increasing_subsets(self.dim, self.degree - 1);
        let comps = out_idx
            .iter()
            .map(|j_tuple| {
                let mut acc = Expr::zero();
                for i in 0..self.dim {
                    if j_tuple.contains(&i) {
                        continue;
                    }
                    let mut full = vec![i];
                    full.extend_from_slice(j_tuple);
                    let c = self.coeff_at(&full);
                    acc = acc + v.comps[i].clone() * c;
                }
                acc.simplify()
            })
            .collect();
        Ok(DiffForm {
            dim: self.dim,
            degree: self.degree - 1,
            comps,
        })
    }

    /// Lie derivative along `v`, from the component formula
    /// `(L_v phi)_I = v(phi_I) + sum_s (d_{i_s} v^m) phi_{I[s := m]}`.
    /// The Cartan identity `L_v = i_v d + d i_v` is asserted in tests, not
    /// used as the implementation.
    pub fn lie_derivative(&self, v: &VectorField) -> Result<DiffForm, CalcError> {
        check_dim(self.dim, v.dim)?;
        let idx = increasing_subsets(self.dim, self.degree);
        let comps = idx
            .iter()
            .map(|i_tuple| {
                let mut acc = v.derive(&self.coeff_at(i_tuple));
                for (s, &is) in i_tuple.iter().enumerate() {
                    for m in 0..self.dim {
                        let dv = v.comps[m].diff(is);
                        if dv.is_zero_const() {
                            continue;
                        }
                        let mut replaced = i_tuple.clone();
                        replaced[s] = m;
                        acc = acc + dv * self.coeff_at(&replaced);
                    }
                }
                acc.simplify()
            })
            .collect();
        Ok(DiffForm {
            dim: self.dim,
            degree: self.degree,
            comps,
        })
    }

    /// Full antisymmetric coefficient matrix of a 2-form.
    pub fn as_matrix(&self) -> Vec<Vec<Expr>> {
        assert_eq!(self.degree, 2);
        let mut m = vec![vec![Expr::zero(); self.dim]; self.dim];
        for i in 0..self.dim {
            for j in 0..self.dim {
                if i != j {
                    m[i][j] = self.coeff_at(&[i, j]);
                }
            }
        }
        m
    }

    pub fn eval_comps(&self, p: &Point) -> Result<Vec<f64>, EvalError> {
        let mut cache = EvalCache::new();
        self.comps
            .iter()
            .map(|e| e.eval_cached(&p.coords, &mut cache))
            .collect()
    }

    /// Evaluate on pointwise vectors with the determinant convention.
    pub fn value_on(&self, vectors: &[Vec<f64>], p: &Point) -> Result<f64, EvalError> {
        assert_eq!(vectors.len(), self.degree);
        let comps = self.eval_comps(p)?;
        let idx = increasing_subsets(self.dim, self.degree);
        let mut acc = 0.0;
        for (pos, i_tuple) in idx.iter().enumerate() {
            if comps[pos] == 0.0 {
                continue;
            }
            acc += comps[pos] * minor_det(vectors, i_tuple);
        }
        Ok(acc)
    }

    /// Max |coefficient| over the sample points.
    pub fn max_abs_on(&self, samples: &[Point]) -> Result<f64, EvalError> {
        let mut worst = 0.0f64;
        for p in samples {
            for c in self.eval_comps(p)? {
                worst = fmath::max(worst, fmath::abs(c));
            }
        }
        Ok(worst)
    }
}

/// Determinant of the k x k matrix picking coordinate rows `i_tuple` from
/// the column vectors.
fn minor_det(vectors: &[Vec<f64>], i_tuple: &[usize]) -> f64 {
    let k = i_tuple.len();
    let mut m = Mat::zeros(k, k);
    for (r, &i) in i_tuple.iter().enumerate() {
        for (c, vec_c) in vectors.iter().enumerate() {
            m[(r, c)] = vec_c[i];
        }
    }
    det_numeric(&m)
}

fn det_numeric(m: &Mat) -> f64 {
    let n = m.rows;
    match n {
        0 => 1.0,
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        _ => {
            let mut acc = 0.0;
            for j in 0..n {
                let mut sub = Mat::zeros(n - 1, n - 1);
                for r in 1..n {
                    let mut cc = 0;
                    for c in 0..n {
                        if c == j {
                            continue;
                        }
                        sub[(r - 1, cc)] = m[(r, c)];
                        cc += 1;
                    }
                }
                let term = m[(0, j)] * det_numeric(&sub);
                acc += if j % 2 == 0 { term } else { -term };
            }
            acc
        }
    }
}

/// An endomorphism field; `mat[i][j]` is the `d_i` component of the image of
/// `d_j` (columns are images of the coordinate fields).
#[derive(Clone, Debug, PartialEq)]
pub struct EndoField {
    pub dim: usize,
    pub mat: Vec<Vec<Expr>>,
}

impl EndoField {
    pub fn identity(dim: usize) -> Self {
        let mut mat = vec![vec![Expr::zero(); dim]; dim];
        for (i, row) in mat.iter_mut().enumerate() {
            row[i] = Expr::one();
        }
        EndoField { dim, mat }
    }

    pub fn zero(dim: usize) -> Self {
        EndoField {
            dim,
            mat: vec![vec![Expr::zero(); dim]; dim],
        }
    }

    pub fn from_rows(rows: Vec<Vec<Expr>>) -> Self {
        let dim = rows.len();
        for r in &rows {
            assert_eq!(r.len(), dim);
        }
        EndoField { dim, mat: rows }
    }

    /// Column `j` as a vector field (the image of the j-th coordinate field).
    pub fn column(&self, j: usize) -> VectorField {
        VectorField {
            dim: self.dim,
            comps: (0..self.dim).map(|i| self.mat[i][j].clone()).collect(),
        }
    }

    pub fn apply(&self, v: &VectorField) -> VectorField {
        assert_eq!(self.dim, v.dim);
        let comps = (0..self.dim)
            .map(|i| {
                let mut acc = Expr::zero();
                for j in 0..self.dim {
                    acc = acc + self.mat[i][j].clone() * v.comps[j].clone();
                }
                acc
            })
            .collect();
        VectorField {
            dim: self.dim,
            comps,
        }
    }

    pub fn compose(&self, other: &EndoField) -> EndoField {
        assert_eq!(self.dim, other.dim);
        let mut mat = vec![vec![Expr::zero(); self.dim]; self.dim];
        for (i, row) in mat.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let mut acc = Expr::zero();
                for k in 0..self.dim {
                    acc = acc + self.mat[i][k].clone() * other.mat[k][j].clone();
                }
                *cell = acc;
            }
        }
        EndoField { dim: self.dim, mat }
    }

    pub fn add(&self, other: &EndoField) -> EndoField {
        assert_eq!(self.dim, other.dim);
        EndoField {
            dim: self.dim,
            mat: self
                .mat
                .iter()
                .zip(&other.mat)
                .map(|(ra, rb)| {
                    ra.iter()
                        .zip(rb)
                        .map(|(a, b)| a.clone() + b.clone())
                        .collect()
                })
                .collect(),
        }
    }

    pub fn sub(&self, other: &EndoField) -> EndoField {
        assert_eq!(self.dim, other.dim);
        EndoField {
            dim: self.dim,
            mat: self
                .mat
                .iter()
                .zip(&other.mat)
                .map(|(ra, rb)| {
                    ra.iter()
                        .zip(rb)
                        .map(|(a, b)| a.clone() - b.clone())
                        .collect()
                })
                .collect(),
        }
    }

    pub fn scale(&self, c: &Expr) -> EndoField {
        EndoField {
            dim: self.dim,
            mat: self
                .mat
                .iter()
                .map(|row| row.iter().map(|e| c.clone() * e.clone()).collect())
                .collect(),
        }
    }

    pub fn simplify(&self) -> EndoField {
        EndoField {
            dim: self.dim,
            mat: self
                .mat
                .iter()
                .map(|row| row.iter().map(|e| e.simplify()).collect())
                .collect(),
        }
    }

    /// Entry-wise partial derivative (parameter families).
    pub fn diff(&self, var: usize) -> EndoField {
        EndoField {
            dim: self.dim,
            mat: self
                .mat
                .iter()
                .map(|row| row.iter().map(|e| e.diff(var)).collect())
                .collect(),
        }
    }

    /// Lie derivative along `v`: `(L_v e)(u) = [v, e u] - e [v, u]`, expanded
    /// exactly on the coordinate frame.
    pub fn lie_derivative(&self, v: &VectorField) -> Result<EndoField, CalcError> {
        check_dim(self.dim, v.dim)?;
        let mut mat = vec![vec![Expr::zero(); self.dim]; self.dim];
        for k in 0..self.dim {
            let col = self.column(k);
            let bracket = v.lie_bracket(&col)?;
            // e([v, d_k]) = -sum_m (d_k v^m) e(d_m)
            let mut correction = VectorField::zero(self.dim);
            for m in 0..self.dim {
                let dv = v.comps[m].diff(k);
                if dv.is_zero_const() {
                    continue;
                }
                correction = correction.add(&self.column(m).scale(&dv));
            }
            let out = bracket.add(&correction);
            for (i, row) in mat.iter_mut().enumerate() {
                row[k] = out.comps[i].simplify();
            }
        }
        Ok(EndoField { dim: self.dim, mat })
    }

    pub fn eval_mat(&self, p: &Point) -> Result<Mat, EvalError> {
        let mut cache = EvalCache::new();
        let mut out = Mat::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[(i, j)] = self.mat[i][j].eval_cached(&p.coords, &mut cache)?;
            }
        }
        Ok(out)
    }
}

/// A vector-valued 2-form: one vector field per increasing index pair.
#[derive(Clone, Debug)]
pub struct VectorValued2Form {
    pub dim: usize,
    pub vals: Vec<VectorField>,
}

impl VectorValued2Form {
    pub fn pairs(dim: usize) -> Vec<Vec<usize>> {
        increasing_subsets(dim, 2)
    }

    pub fn from_fn(
        dim: usize,
        mut f: impl FnMut(usize, usize) -> VectorField,
    ) -> VectorValued2Form {
        let vals = Self::pairs(dim).iter().map(|p| f(p[0], p[1])).collect();
        VectorValued2Form { dim, vals }
    }

    pub fn value(&self, a: usize, b: usize) -> VectorField {
        if a == b {
            return VectorField::zero(self.dim);
        }
        let pairs = Self::pairs(self.dim);
        let (key, flip) = if a < b { ([a, b], false) } else { ([b, a], true) };
        let pos = pairs.iter().position(|p| p.as_slice() == key).unwrap();
        if flip {
            self.vals[pos].scale(&Expr::int(-1))
        } else {
            self.vals[pos].clone()
        }
    }

    /// Bilinear evaluation on pointwise vectors.
    pub fn value_on(
        &self,
        u: &[f64],
        v: &[f64],
        coords: &[f64],
        cache: &mut EvalCache,
    ) -> Result<Vec<f64>, EvalError> {
        let mut acc = vec![0.0; self.dim];
        for (pos, pair) in Self::pairs(self.dim).iter().enumerate() {
            let (a, b) = (pair[0], pair[1]);
            let w = u[a] * v[b] - u[b] * v[a];
            if w == 0.0 {
                continue;
            }
            let field = self.vals[pos].eval_with(coords, cache)?;
            for (out, f) in acc.iter_mut().zip(&field) {
                *out += w * f;
            }
        }
        Ok(acc)
    }

    /// Max |component| over the samples.
    pub fn max_abs_on(&self, samples: &[Point]) -> Result<f64, EvalError> {
        let mut worst = 0.0f64;
        for p in samples {
            let mut cache = EvalCache::new();
            for v in &self.vals {
                for c in v.eval_with(&p.coords, &mut cache)? {
                    worst = fmath::max(worst, fmath::abs(c));
                }
            }
        }
        Ok(worst)
    }

    pub fn simplify(&self) -> VectorValued2Form {
        VectorValued2Form {
            dim: self.dim,
            vals: self.vals.iter().map(|v| v.simplify()).collect(),
        }
    }
}

// --- symbolic dense linear algebra ---------------------------------------

/// Determinant of a square expression matrix by Laplace expansion.
pub fn sym_det(m: &[Vec<Expr>]) -> Expr {
    let n = m.len();
    match n {
        0 => Expr::one(),
        1 => m[0][0].clone(),
        2 => m[0][0].clone() * m[1][1].clone() - m[0][1].clone() * m[1][0].clone(),
        _ => {
            let mut acc = Expr::zero();
            for j in 0..n {
                if m[0][j].is_zero_const() {
                    continue;
                }
                let sub: Vec<Vec<Expr>> = (1..n)
                    .map(|r| {
                        (0..n)
                            .filter(|&c| c != j)
                            .map(|c| m[r][c].clone())
                            .collect()
                    })
                    .collect();
                let term = m[0][j].clone() * sym_det(&sub);
                acc = if j % 2 == 0 { acc + term } else { acc - term };
            }
            acc
        }
    }
}

/// Adjugate (transposed cofactor matrix): `m * adj(m) = det(m) * id`.
pub fn sym_adjugate(m: &[Vec<Expr>]) -> Vec<Vec<Expr>> {
    let n = m.len();
    let mut adj = vec![vec![Expr::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let sub: Vec<Vec<Expr>> = (0..n)
                .filter(|&r| r != i)
                .map(|r| {
                    (0..n)
                        .filter(|&c| c != j)
                        .map(|c| m[r][c].clone())
                        .collect()
                })
                .collect();
            let minor = sym_det(&sub);
            let signed = if (i + j) % 2 == 0 { minor } else { minor.neg() };
            // adjugate transposes the cofactors
            adj[j][i] = signed;
        }
    }
    adj
}

/// Solve `m x = rhs` by Cramer's rule; the result components are exact
/// rational expressions with `det(m)` in the denominator.
pub fn sym_solve(m: &[Vec<Expr>], rhs: &[Expr]) -> Vec<Expr> {
    let det = sym_det(m).simplify();
    let adj = sym_adjugate(m);
    (0..m.len())
        .map(|i| {
            let mut acc = Expr::zero();
            for (j, r) in rhs.iter().enumerate() {
                acc = acc + adj[i][j].clone() * r.clone();
            }
            (acc / det.clone()).simplify()
        })
        .collect()
}

// --- symplectic operations ------------------------------------------------

/// Pfaffian ratio `theta ^ theta / omega ^ omega` as a scalar expression.
pub fn pfaffian(
    theta: &DiffForm,
    omega: &DiffForm,
    samples: &[Point],
    tol: &Tolerances,
) -> Result<Expr, CalcError> {
    check_dim(theta.dim, omega.dim)?;
    assert_eq!(theta.degree, 2);
    assert_eq!(omega.degree, 2);
    let t4 = theta.wedge(theta)?.comps[0].clone();
    let w4 = omega.wedge(omega)?.comps[0].clone();
    for p in samples {
        let den = w4.eval(p)?;
        if fmath::abs(den) <= tol.degenerate_rel {
            return Err(CalcError::DegenerateSymplectic {
                point: p.coords.clone(),
            });
        }
    }
    Ok((t4 / w4).simplify())
}

/// The vector field dual to a 1-form: the unique `X` with
/// `omega(X, Z) = alpha(Z)` for all `Z`, solved symbolically.
pub fn sharp(
    omega: &DiffForm,
    alpha: &DiffForm,
    samples: &[Point],
    tol: &Tolerances,
) -> Result<VectorField, CalcError> {
    check_dim(omega.dim, alpha.dim)?;
    assert_eq!(omega.degree, 2);
    assert_eq!(alpha.degree, 1);
    let n = omega.dim;
    // omega(X, d_k) = sum_i X^i omega_{ik}
    let m: Vec<Vec<Expr>> = (0..n)
        .map(|k| (0..n).map(|i| omega.coeff_at(&[i, k])).collect())
        .collect();
    ensure_invertible(&m, samples, tol)?;
    let x = sym_solve(&m, &alpha.comps);
    Ok(VectorField::new(n, x))
}

/// Divide a 3-form by the symplectic form: the unique 1-form `alpha` with
/// `omega ^ alpha = big_omega` (an isomorphism in dimension 4).
pub fn lepage_divide(
    big_omega: &DiffForm,
    omega: &DiffForm,
    samples: &[Point],
    tol: &Tolerances,
) -> Result<DiffForm, CalcError> {
    check_dim(big_omega.dim, omega.dim)?;
    assert_eq!(omega.degree, 2);
    assert_eq!(big_omega.degree, 3);
    let n = omega.dim;
    assert_eq!(n, 4, "Lepage division is specific to dimension 4");
    let triples = increasing_subsets(n, 3);
    // (omega ^ alpha)_K = sum_{pos} (-1)^(2 - pos) omega_{K minus k_pos} alpha_{k_pos}
    let mut m = vec![vec![Expr::zero(); n]; triples.len()];
    for (row, k_tuple) in triples.iter().enumerate() {
        for (pos, &i) in k_tuple.iter().enumerate() {
            let rest: Vec<usize> = k_tuple.iter().filter(|&&v| v != i).copied().collect();
            let coeff = omega.coeff_at(&rest);
            m[row][i] = if pos % 2 == 0 { coeff } else { coeff.neg() };
        }
    }
    ensure_invertible(&m, samples, tol)?;
    let alpha = sym_solve(&m, &big_omega.comps);
    Ok(DiffForm::from_components(n, 1, alpha))
}

/// The endomorphism `j` defined by `theta(X, Y) = omega(j X, Y)`; by the
/// skew symmetry of both forms `omega(j X, Y) = omega(X, j Y)` holds
/// automatically.
pub fn endo_from_pair(
    omega: &DiffForm,
    theta: &DiffForm,
    samples: &[Point],
    tol: &Tolerances,
) -> Result<EndoField, CalcError> {
    check_dim(omega.dim, theta.dim)?;
    assert_eq!(omega.degree, 2);
    assert_eq!(theta.degree, 2);
    let n = omega.dim;
    let om = omega.as_matrix();
    ensure_invertible(&om, samples, tol)?;
    let adj = sym_adjugate(&om);
    let det = sym_det(&om).simplify();
    let th = theta.as_matrix();
    // j = Omega^{-1} Theta
    let mut mat = vec![vec![Expr::zero(); n]; n];
    for (i, row) in mat.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let mut acc = Expr::zero();
            for k in 0..n {
                acc = acc + adj[i][k].clone() * th[k][j].clone();
            }
            *cell = (acc / det.clone()).simplify();
        }
    }
    Ok(EndoField { dim: n, mat })
}

fn ensure_invertible(
    m: &[Vec<Expr>],
    samples: &[Point],
    tol: &Tolerances,
) -> Result<(), CalcError> {
    for p in samples {
        let mut num = Mat::zeros(m.len(), m.len());
        let mut cache = EvalCache::new();
        for (i, row) in m.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                num[(i, j)] = e.eval_cached(&p.coords, &mut cache)?;
            }
        }
        let (smin, smax) = linalg::sigma_range(&num);
        if smax == 0.0 || smin <= tol.degenerate_rel * smax {
            return Err(CalcError::DegenerateSymplectic {
                point: p.coords.clone(),
            });
        }
    }
    Ok(())
}

/// Render a vector field compactly for reports.
pub fn render_field(v: &VectorField) -> String {
    let mut parts = Vec::new();
    for (i, c) in v.comps.iter().enumerate() {
        if c.is_zero_const() {
            continue;
        }
        parts.push(format!("({})*e{}", c, i + 1));
    }
    if parts.is_empty() {
        return String::from("0");
    }
    parts.join(" + ")
}

/// Finite-difference Lie bracket at a point (central differences with one
/// Richardson step); fallback for expressions that resist simplification.
pub fn bracket_numeric_at(
    v: &VectorField,
    w: &VectorField,
    p: &Point,
    step: f64,
) -> Result<Vec<f64>, EvalError> {
    let n = v.dim;
    let dir = |field: &VectorField, along: &[f64], h: f64| -> Result<Vec<f64>, EvalError> {
        let mut up = p.clone();
        let mut dn = p.clone();
        for i in 0..n {
            up.coords[i] += h * along[i];
            dn.coords[i] -= h * along[i];
        }
        let fu = field.eval_at(&up)?;
        let fd = field.eval_at(&dn)?;
        Ok(fu
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect())
    };
    let richardson = |field: &VectorField, along: &[f64]| -> Result<Vec<f64>, EvalError> {
        let d1 = dir(field, along, step)?;
        let d2 = dir(field, along, step / 2.0)?;
        Ok(d1
            .iter()
            .zip(&d2)
            .map(|(a, b)| (4.0 * b - a) / 3.0)
            .collect())
    };
    let vp = v.eval_at(p)?;
    let wp = w.eval_at(p)?;
    let dw = richardson(w, &vp)?;
    let dv = richardson(v, &wp)?;
    Ok(dw.iter().zip(&dv).map(|(a, b)| a - b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn pt(xs: &[f64]) -> Point {
        Point::new(xs.to_vec())
    }

    fn grid4() -> Vec<Point> {
        let mut out = Vec::new();
        for a in [-0.5, 0.5] {
            for b in [-0.5, 0.5] {
                out.push(pt(&[a, b, 0.3, -0.7]));
            }
        }
        out
    }

    fn standard_omega() -> DiffForm {
        DiffForm::zero(4, 2)
            .with_term(&[0, 1], Expr::one())
            .with_term(&[2, 3], Expr::one())
    }

    #[test]
    fn coordinate_bracket() {
        // [d1, x1 d2] = d2
        let v = VectorField::coordinate(4, 0);
        let w = VectorField::new(
            4,
            vec![Expr::zero(), Expr::var(0), Expr::zero(), Expr::zero()],
        );
        let b = v.lie_bracket(&w).unwrap().simplify();
        assert_eq!(b, VectorField::coordinate(4, 1));
    }

    #[test]
    fn bracket_antisymmetry() {
        let v = VectorField::new(
            4,
            vec![
                parse("x2*x3", 4).unwrap(),
                parse("sin(x1)", 4).unwrap(),
                Expr::one(),
                parse("x4^2", 4).unwrap(),
            ],
        );
        let b = v.lie_bracket(&v).unwrap().simplify();
        assert_eq!(b, VectorField::zero(4));
    }

    #[test]
    fn d_of_x2_dx4() {
        // d(x2 dx4) = dx2 ^ dx4
        let phi = DiffForm::zero(4, 1).with_term(&[3], Expr::var(1));
        let d = phi.ext_d().unwrap();
        let expect = DiffForm::zero(4, 2).with_term(&[1, 3], Expr::one());
        assert_eq!(d.simplify(), expect.simplify());
    }

    #[test]
    fn contact_form_differential() {
        // d(p dq - du) = dp ^ dq on (p, q, u) = (x1, x2, x3)
        let alpha = DiffForm::zero(3, 1)
            .with_term(&[1], Expr::var(0))
            .with_term(&[2], Expr::int(-1));
        let d = alpha.ext_d().unwrap();
        let expect = DiffForm::zero(3, 2).with_term(&[0, 1], Expr::one());
        assert_eq!(d.simplify(), expect.simplify());
    }

    #[test]
    fn contact_condition_nonzero() {
        // (p dq - du) ^ d(p dq - du) = -dp^dq^du != 0
        let alpha = DiffForm::zero(3, 1)
            .with_term(&[1], Expr::var(0))
            .with_term(&[2], Expr::int(-1));
        let w = alpha.wedge(&alpha.ext_d().unwrap()).unwrap();
        assert_eq!(w.comps[0].simplify(), Expr::int(-1));
    }

    #[test]
    fn d_squared_vanishes_structurally() {
        let theta = DiffForm::zero(4, 1)
            .with_term(&[0], parse("sin(x2*x3)", 4).unwrap())
            .with_term(&[1], parse("x1*exp(x4)", 4).unwrap())
            .with_term(&[3], parse("x1^2*x3", 4).unwrap());
        let dd = theta.ext_d().unwrap().ext_d().unwrap().simplify();
        for c in &dd.comps {
            assert!(c.is_zero_const(), "nonzero d^2 component: {}", c);
        }
    }

    #[test]
    fn volume_coefficient() {
        let a = DiffForm::zero(4, 2).with_term(&[0, 1], Expr::one());
        let b = DiffForm::zero(4, 2).with_term(&[2, 3], Expr::one());
        let v = a.wedge(&b).unwrap();
        assert_eq!(v.comps[0].simplify(), Expr::one());
    }

    #[test]
    fn odd_wedge_self_is_zero() {
        let a = DiffForm::zero(4, 1)
            .with_term(&[0], parse("x2", 4).unwrap())
            .with_term(&[2], parse("x4*x1", 4).unwrap());
        let w = a.wedge(&a).unwrap().simplify();
        for c in &w.comps {
            assert!(c.is_zero_const());
        }
    }

    #[test]
    fn interior_of_coordinate_two_form() {
        // i_{d1}(dx1 ^ dx2) = dx2
        let phi = DiffForm::zero(4, 2).with_term(&[0, 1], Expr::one());
        let v = VectorField::coordinate(4, 0);
        let out = phi.interior(&v).unwrap();
        let expect = DiffForm::zero(4, 1).with_term(&[1], Expr::one());
        assert_eq!(out.simplify(), expect.simplify());
    }

    #[test]
    fn interior_of_zero_form_is_degree_error() {
        let f = DiffForm::zero(4, 0);
        let v = VectorField::coordinate(4, 0);
        assert!(matches!(f.interior(&v), Err(CalcError::DegreeError)));
    }

    #[test]
    fn interior_twice_vanishes() {
        let phi = DiffForm::zero(4, 3)
            .with_term(&[0, 1, 2], parse("x4", 4).unwrap())
            .with_term(&[1, 2, 3], parse("x1*x2", 4).unwrap());
        let v = VectorField::new(
            4,
            vec![
                parse("x2", 4).unwrap(),
                Expr::one(),
                parse("x1", 4).unwrap(),
                parse("x3", 4).unwrap(),
            ],
        );
        let once = phi.interior(&v).unwrap();
        let twice = once.interior(&v).unwrap().simplify();
        for c in &twice.comps {
            assert!(c.is_zero_const());
        }
    }

    #[test]
    fn lie_derivative_simple() {
        // L_{d1}(x1 dx2) = dx2
        let phi = DiffForm::zero(4, 1).with_term(&[1], Expr::var(0));
        let v = VectorField::coordinate(4, 0);
        let out = phi.lie_derivative(&v).unwrap();
        let expect = DiffForm::zero(4, 1).with_term(&[1], Expr::one());
        assert_eq!(out.simplify(), expect.simplify());
    }

    #[test]
    fn lie_derivative_constant_inputs_vanish() {
        let phi = DiffForm::zero(4, 2)
            .with_term(&[0, 2], Expr::int(3))
            .with_term(&[1, 3], Expr::ratio(-2, 5));
        let v = VectorField::from_consts(4, &[1.0, -2.0, 0.5, 3.0]);
        let out = phi.lie_derivative(&v).unwrap().simplify();
        for c in &out.comps {
            assert!(c.is_zero_const());
        }
    }

    #[test]
    fn lie_derivative_endo_constant() {
        let e = EndoField::identity(4);
        let v = VectorField::coordinate(4, 0);
        let out = e.lie_derivative(&v).unwrap().simplify();
        assert_eq!(out, EndoField::zero(4).simplify());
    }

    #[test]
    fn pfaffian_of_model_forms() {
        let omega = standard_omega();
        let tol = Tolerances::default();
        let grid = grid4();
        // theta = dx12 - dx34 -> Pf = -1 (hand expansion: theta^theta = -2 vol,
        // omega^omega = 2 vol)
        let theta = DiffForm::zero(4, 2)
            .with_term(&[0, 1], Expr::one())
            .with_term(&[2, 3], Expr::int(-1));
        assert_eq!(
            pfaffian(&theta, &omega, &grid, &tol).unwrap(),
            Expr::int(-1)
        );
        // theta = omega -> Pf = 1
        assert_eq!(pfaffian(&omega, &omega, &grid, &tol).unwrap(), Expr::one());
        // theta = dx12 -> Pf = 0 (parabolic indicator)
        let para = DiffForm::zero(4, 2).with_term(&[0, 1], Expr::one());
        assert_eq!(pfaffian(&para, &omega, &grid, &tol).unwrap(), Expr::zero());
    }

    #[test]
    fn sharp_standard_dx1() {
        let omega = standard_omega();
        let alpha = DiffForm::zero(4, 1).with_term(&[0], Expr::one());
        let tol = Tolerances::default();
        let x = sharp(&omega, &alpha, &grid4(), &tol).unwrap().simplify();
        // omega(X, .) = dx1 gives X = -d2; substituting back must return alpha
        assert_eq!(x.comps[1], Expr::int(-1));
        let back = omega.interior(&x).unwrap().simplify();
        assert_eq!(back, alpha.simplify());
    }

    #[test]
    fn sharp_of_zero_is_zero() {
        let omega = standard_omega();
        let alpha = DiffForm::zero(4, 1);
        let tol = Tolerances::default();
        let x = sharp(&omega, &alpha, &grid4(), &tol).unwrap().simplify();
        assert_eq!(x, VectorField::zero(4));
    }

    #[test]
    fn sharp_degenerate_omega_fails() {
        let omega = DiffForm::zero(4, 2).with_term(&[0, 1], Expr::one());
        let alpha = DiffForm::zero(4, 1).with_term(&[0], Expr::one());
        let tol = Tolerances::default();
        assert!(matches!(
            sharp(&omega, &alpha, &grid4(), &tol),
            Err(CalcError::DegenerateSymplectic { .. })
        ));
    }

    #[test]
    fn lepage_division_uniqueness() {
        let omega = standard_omega();
        let tol = Tolerances::default();
        let grid = grid4();
        // Omega = omega ^ dx1 -> alpha = dx1
        let dx1 = DiffForm::zero(4, 1).with_term(&[0], Expr::one());
        let rhs = omega.wedge(&dx1).unwrap();
        let alpha = lepage_divide(&rhs, &omega, &grid, &tol).unwrap().simplify();
        assert_eq!(alpha, dx1.simplify());
        // Omega = 0 -> alpha = 0
        let zero = DiffForm::zero(4, 3);
        let alpha0 = lepage_divide(&zero, &omega, &grid, &tol)
            .unwrap()
            .simplify();
        assert_eq!(alpha0, DiffForm::zero(4, 1).simplify());
    }

    #[test]
    fn lepage_division_recovers_dtheta() {
        // theta = x1 (dx14 + dx23): omega ^ alpha = d theta exactly
        let omega = standard_omega();
        let tol = Tolerances::default();
        let grid = grid4();
        let theta = DiffForm::zero(4, 2)
            .with_term(&[0, 3], Expr::var(0))
            .with_term(&[1, 2], Expr::var(0));
        let dtheta = theta.ext_d().unwrap();
        let alpha = lepage_divide(&dtheta, &omega, &grid, &tol).unwrap();
        let recon = omega.wedge(&alpha).unwrap().simplify();
        assert_eq!(recon, dtheta.simplify());
    }

    #[test]
    fn endo_from_pair_identity_and_models() {
        let omega = standard_omega();
        let tol = Tolerances::default();
        let grid = grid4();
        // theta = omega -> j = id
        let j = endo_from_pair(&omega, &omega, &grid, &tol)
            .unwrap()
            .simplify();
        assert_eq!(j, EndoField::identity(4).simplify());
        // elliptic model: theta = dx14 + dx23 -> j^2 = -1
        let theta = DiffForm::zero(4, 2)
            .with_term(&[0, 3], Expr::one())
            .with_term(&[1, 2], Expr::one());
        let j = endo_from_pair(&omega, &theta, &grid, &tol).unwrap();
        let j2 = j.compose(&j).simplify();
        assert_eq!(j2, EndoField::identity(4).scale(&Expr::int(-1)).simplify());
        // hyperbolic model: theta = dx12 - dx34 -> j^2 = +1
        let htheta = DiffForm::zero(4, 2)
            .with_term(&[0, 1], Expr::one())
            .with_term(&[2, 3], Expr::int(-1));
        let j = endo_from_pair(&omega, &htheta, &grid, &tol).unwrap();
        let j2 = j.compose(&j).simplify();
        assert_eq!(j2, EndoField::identity(4).simplify());
    }

    #[test]
    fn sym_solve_inverts() {
        let m = vec![
            vec![Expr::var(0), Expr::one()],
            vec![Expr::int(-1), Expr::var(1)],
        ];
        let rhs = vec![Expr::one(), Expr::zero()];
        let x = sym_solve(&m, &rhs);
        let r0 = (m[0][0].clone() * x[0].clone() + m[0][1].clone() * x[1].clone()).simplify();
        let r1 = (m[1][0].clone() * x[0].clone() + m[1][1].clone() * x[1].clone()).simplify();
        assert_eq!(r0, Expr::one());
        assert_eq!(r1, Expr::zero());
    }
}
