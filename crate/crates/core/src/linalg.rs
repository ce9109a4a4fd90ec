//! Small dense numeric linear algebra: the charts are 3- or 4-dimensional,
//! so everything here targets matrices of a handful of rows and columns.
//! Rank decisions go through singular values with a relative cutoff.

use alloc::vec;
use alloc::vec::Vec;

use crate::fmath;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Mat {
        let r = rows.len();
        let c = rows.first().map(|v| v.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c);
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    /// Columns are the given vectors.
    pub fn from_cols(cols: &[Vec<f64>]) -> Mat {
        let c = cols.len();
        let r = cols.first().map(|v| v.len()).unwrap_or(0);
        let mut m = Mat::zeros(r, c);
        for (j, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), r);
            for i in 0..r {
                m[(i, j)] = col[i];
            }
        }
        m
    }

    pub fn identity(n: usize) -> Mat {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn frobenius(&self) -> f64 {
        fmath::sqrt(self.data.iter().map(|x| x * x).sum())
    }
}

impl core::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Singular value decomposition by one-sided Jacobi rotations.
/// Returns (u, sigma, v) with `a = u * diag(sigma) * v^T`, sigma descending.
pub fn svd(a: &Mat) -> (Mat, Vec<f64>, Mat) {
    // work on the transpose when rows < cols so columns are long
    if a.rows < a.cols {
        let (u, s, v) = svd(&a.transpose());
        return (v, s, u);
    }
    let m = a.rows;
    let n = a.cols;
    let mut u = a.clone();
    let mut v = Mat::identity(n);
    let eps = 1e-15;
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for i in 0..m {
                    alpha += u[(i, p)] * u[(i, p)];
                    beta += u[(i, q)] * u[(i, q)];
                    gamma += u[(i, p)] * u[(i, q)];
                }
                off = fmath::max(off, fmath::abs(gamma) / fmath::max(fmath::sqrt(alpha * beta), 1e-300));
                if fmath::abs(gamma) <= eps * fmath::sqrt(alpha * beta) {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + fmath::sqrt(1.0 + zeta * zeta))
                } else {
                    -1.0 / (-zeta + fmath::sqrt(1.0 + zeta * zeta))
                };
                let c = 1.0 / fmath::sqrt(1.0 + t * t);
                let s = c * t;
                for i in 0..m {
                    let up = u[(i, p)];
                    let uq = u[(i, q)];
                    u[(i, p)] = c * up - s * uq;
                    u[(i, q)] = s * up + c * uq;
                }
                for i in 0..n {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if off < 1e-14 {
            break;
        }
    }
    let mut sigma: Vec<f64> = (0..n)
        .map(|j| fmath::sqrt((0..m).map(|i| u[(i, j)] * u[(i, j)]).sum()))
        .collect();
    // sort descending, permuting u and v columns accordingly
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));
    let mut u_sorted = Mat::zeros(m, n);
    let mut v_sorted = Mat::zeros(n, n);
    let mut s_sorted = vec![0.0; n];
    for (new_j, &old_j) in order.iter().enumerate() {
        s_sorted[new_j] = sigma[old_j];
        for i in 0..m {
            u_sorted[(i, new_j)] = u[(i, old_j)];
        }
        for i in 0..n {
            v_sorted[(i, new_j)] = v[(i, old_j)];
        }
    }
    sigma = s_sorted;
    for j in 0..n {
        if sigma[j] > 0.0 {
            for i in 0..m {
                u_sorted[(i, j)] /= sigma[j];
            }
        }
    }
    (u_sorted, sigma, v_sorted)
}

/// Numerical rank: number of singular values above `rel_tol * sigma_max`.
pub fn rank(a: &Mat, rel_tol: f64) -> usize {
    let (_, sigma, _) = svd(a);
    let smax = sigma.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    sigma.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Smallest and largest singular values.
pub fn sigma_range(a: &Mat) -> (f64, f64) {
    let (_, sigma, _) = svd(a);
    let smax = sigma.first().copied().unwrap_or(0.0);
    let smin = sigma.last().copied().unwrap_or(0.0);
    (smin, smax)
}

/// Solve a square system by Gaussian elimination with partial pivoting.
/// Returns None when the pivot degenerates below `rel_tol` of the largest
/// entry.
pub fn solve(a: &Mat, b: &[f64], rel_tol: f64) -> Option<Vec<f64>> {
    assert_eq!(a.rows, a.cols);
    assert_eq!(b.len(), a.rows);
    let n = a.rows;
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    let scale = m.data.iter().fold(0.0f64, |acc, x| fmath::max(acc, fmath::abs(*x)));
    for k in 0..n {
        let (mut pivot_row, mut pivot_val) = (k, fmath::abs(m[(k, k)]));
        for i in (k + 1)..n {
            let v = fmath::abs(m[(i, k)]);
            if v > pivot_val {
                pivot_row = i;
                pivot_val = v;
            }
        }
        if pivot_val <= rel_tol * fmath::max(scale, 1e-300) {
            return None;
        }
        if pivot_row != k {
            for j in 0..n {
                let t = m[(k, j)];
                m[(k, j)] = m[(pivot_row, j)];
                m[(pivot_row, j)] = t;
            }
            rhs.swap(k, pivot_row);
        }
        for i in (k + 1)..n {
            let f = m[(i, k)] / m[(k, k)];
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                m[(i, j)] -= f * m[(k, j)];
            }
            rhs[i] -= f * rhs[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for j in (i + 1)..n {
            s -= m[(i, j)] * x[j];
        }
        x[i] = s / m[(i, i)];
    }
    Some(x)
}

/// Minimum-norm least-squares solution via the SVD pseudoinverse.
pub fn pseudo_solve(a: &Mat, b: &[f64], rel_tol: f64) -> Vec<f64> {
    let (u, sigma, v) = svd(a);
    let smax = sigma.first().copied().unwrap_or(0.0);
    let mut x = vec![0.0; a.cols];
    for j in 0..sigma.len() {
        if sigma[j] <= rel_tol * smax || sigma[j] == 0.0 {
            continue;
        }
        let mut coeff = 0.0;
        for i in 0..a.rows {
            coeff += u[(i, j)] * b[i];
        }
        coeff /= sigma[j];
        for i in 0..a.cols {
            x[i] += coeff * v[(i, j)];
        }
    }
    x
}

/// Real eigenvalues and eigenvectors of a 2x2 matrix, or None when the
/// discriminant is negative. Returns ((lambda1, v1), (lambda2, v2)) with
/// lambda1 >= lambda2.
#[allow(clippy::type_complexity)]
pub fn eig2(a: &Mat) -> Option<((f64, [f64; 2]), (f64, [f64; 2]))> {
    assert!(a.rows == 2 && a.cols == 2);
    let (p, q, r, s) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
    let tr = p + s;
    let det = p * s - q * r;
    let disc = tr * tr - 4.0 * det;
    if disc < 0.0 {
        return None;
    }
    let sq = fmath::sqrt(disc);
    let l1 = (tr + sq) / 2.0;
    let l2 = (tr - sq) / 2.0;
    let vec_for = |l: f64| -> [f64; 2] {
        // rows of (A - l I) are orthogonal to the eigenvector
        let r1 = [p - l, q];
        let r2 = [r, s - l];
        let n1 = fmath::hypot2(r1[0], r1[1]);
        let n2 = fmath::hypot2(r2[0], r2[1]);
        let row = if n1 >= n2 { r1 } else { r2 };
        let n = fmath::hypot2(row[0], row[1]);
        if n == 0.0 {
            return [1.0, 0.0];
        }
        let v = [-row[1] / n, row[0] / n];
        v
    };
    Some(((l1, vec_for(l1)), (l2, vec_for(l2))))
}

/// Greedy pivoted Gram-Schmidt over `candidates` in the given order.
/// Returns (orthonormal basis, indices of chosen candidates). A candidate is
/// adjoined when its orthogonal remainder exceeds `rel_tol` times its norm.
pub fn pivoted_basis(candidates: &[Vec<f64>], rel_tol: f64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut chosen = Vec::new();
    for (idx, cand) in candidates.iter().enumerate() {
        let norm0 = fmath::sqrt(cand.iter().map(|x| x * x).sum());
        if norm0 == 0.0 {
            continue;
        }
        let mut residual = cand.clone();
        for b in &basis {
            let dot: f64 = residual.iter().zip(b).map(|(x, y)| x * y).sum();
            for (r, bv) in residual.iter_mut().zip(b) {
                *r -= dot * bv;
            }
        }
        let norm: f64 = fmath::sqrt(residual.iter().map(|x| x * x).sum());
        if norm > rel_tol * norm0 {
            for r in residual.iter_mut() {
                *r /= norm;
            }
            basis.push(residual);
            chosen.push(idx);
        }
    }
    (basis, chosen)
}

/// Norm of the component of `v` orthogonal to the span of `basis`
/// (orthonormal).
pub fn orthogonal_residual(v: &[f64], basis: &[Vec<f64>]) -> f64 {
    let mut residual = v.to_vec();
    for b in basis {
        let dot: f64 = residual.iter().zip(b).map(|(x, y)| x * y).sum();
        for (r, bv) in residual.iter_mut().zip(b) {
            *r -= dot * bv;
        }
    }
    fmath::sqrt(residual.iter().map(|x| x * x).sum())
}

/// Frobenius distance between the orthogonal projectors onto two spans;
/// zero iff the subspaces coincide.
pub fn subspace_distance(a: &[Vec<f64>], b: &[Vec<f64>], rel_tol: f64) -> f64 {
    let (qa, _) = pivoted_basis(a, rel_tol);
    let (qb, _) = pivoted_basis(b, rel_tol);
    let n = a.first().map(|v| v.len()).unwrap_or(0);
    let mut diff = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut pa = 0.0;
            for q in &qa {
                pa += q[i] * q[j];
            }
            let mut pb = 0.0;
            for q in &qb {
                pb += q[i] * q[j];
            }
            diff[(i, j)] = pa - pb;
        }
    }
    diff.frobenius()
}

pub fn norm(v: &[f64]) -> f64 {
    fmath::sqrt(v.iter().map(|x| x * x).sum())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_reconstructs() {
        let a = Mat::from_rows(&[
            vec![1.0, 2.0, 0.0],
            vec![0.0, 1.0, -1.0],
            vec![3.0, 0.0, 2.0],
            vec![1.0, 1.0, 1.0],
        ]);
        let (u, s, v) = svd(&a);
        let mut recon = Mat::zeros(a.rows, a.cols);
        for i in 0..a.rows {
            for j in 0..a.cols {
                for k in 0..s.len() {
                    recon[(i, j)] += u[(i, k)] * s[k] * v[(j, k)];
                }
            }
        }
        for (x, y) in recon.data.iter().zip(&a.data) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_with_threshold() {
        let a = Mat::from_rows(&[
            vec![1.0, 2.0],
            vec![2.0, 4.0 + 1e-12],
        ]);
        assert_eq!(rank(&a, 1e-8), 1);
        let b = Mat::identity(3);
        assert_eq!(rank(&b, 1e-8), 3);
    }

    #[test]
    fn solve_and_pseudo_solve_agree_on_square_systems() {
        let a = Mat::from_rows(&[
            vec![2.0, 1.0, 0.0],
            vec![1.0, 3.0, 1.0],
            vec![0.0, 1.0, 4.0],
        ]);
        let b = vec![1.0, -2.0, 0.5];
        let x = solve(&a, &b, 1e-12).unwrap();
        let y = pseudo_solve(&a, &b, 1e-12);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn min_norm_solution_is_orthogonal_to_kernel() {
        // rank-1 map (x, y) -> (x + y, 2x + 2y)
        let a = Mat::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]]);
        let x = pseudo_solve(&a, &[1.0, 2.0], 1e-12);
        // kernel is (1, -1); min-norm solution has equal components
        assert!((x[0] - x[1]).abs() < 1e-12);
        assert!((x[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn eig2_trace_free() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, -1.0]]);
        let ((l1, v1), (l2, _)) = eig2(&a).unwrap();
        assert!(l1 > 0.0 && l2 < 0.0);
        // check A v1 = l1 v1
        let av = a.matvec(&v1);
        assert!((av[0] - l1 * v1[0]).abs() < 1e-12);
        assert!((av[1] - l1 * v1[1]).abs() < 1e-12);
    }

    #[test]
    fn pivoted_basis_is_deterministic_and_orthonormal() {
        let cands = vec![
            vec![1.0, 0.0, 0.0, 0.0],
            vec![2.0, 0.0, 0.0, 0.0],
            vec![0.0, 3.0, 0.0, 0.0],
            vec![1.0, 1.0, 1.0, 0.0],
        ];
        let (basis, chosen) = pivoted_basis(&cands, 1e-8);
        assert_eq!(chosen, vec![0, 2, 3]);
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let d = dot(a, b);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-12);
            }
        }
    }
}
