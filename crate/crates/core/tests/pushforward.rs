//! Covariance oracles: invariants computed in two linearly related charts
//! must correspond under the pushforward.

use tetrad_core::distribution::{canonical_line, derived_flag, normal_forms, Distribution};
use tetrad_core::expr::{Expr, Point};
use tetrad_core::exterior::{DiffForm, VectorField};
use tetrad_core::linalg;
use tetrad_core::monge_ampere::{
    canonical_frame, models, normalize_elliptic, structure_functions, BracketMode,
};
use tetrad_core::Tolerances;

/// Pull a vector field back along the linear chart map y = L x:
/// (phi^* v)(x) = L^{-1} v(L x).
fn pullback_field(v: &VectorField, l: &[[f64; 4]; 4], l_inv: &[[f64; 4]; 4]) -> VectorField {
    let n = 4;
    // substitute y = L x into the coefficients
    let subs: Vec<Expr> = (0..n)
        .map(|i| {
            let mut acc = Expr::zero();
            for (j, row) in l.iter().enumerate().take(n) {
                let _ = row;
                acc = acc + Expr::float(l[i][j]) * Expr::var(j);
            }
            acc
        })
        .collect();
    let composed: Vec<Expr> = v.comps.iter().map(|c| c.substitute(&subs)).collect();
    let comps = (0..n)
        .map(|i| {
            let mut acc = Expr::zero();
            for (j, cj) in composed.iter().enumerate() {
                acc = acc + Expr::float(l_inv[i][j]) * cj.clone();
            }
            acc.simplify()
        })
        .collect();
    VectorField::new(n, comps)
}

/// Pull a 2-form back along y = L x: (phi^* w)(u, v) = w(L u, L v).
fn pullback_form2(w: &DiffForm, l: &[[f64; 4]; 4]) -> DiffForm {
    let n = 4;
    let subs: Vec<Expr> = (0..n)
        .map(|i| {
            let mut acc = Expr::zero();
            for j in 0..n {
                acc = acc + Expr::float(l[i][j]) * Expr::var(j);
            }
            acc
        })
        .collect();
    let m = w.as_matrix();
    let mut out = DiffForm::zero(n, 2);
    for a in 0..n {
        for b in (a + 1)..n {
            // (phi^* w)(e_a, e_b) = w(L e_a, L e_b), expanded bilinearly
            // over ordered index pairs
            let mut acc = Expr::zero();
            for c in 0..n {
                for d in 0..n {
                    if c == d {
                        continue;
                    }
                    let coeff = Expr::float(l[c][a] * l[d][b]);
                    acc = acc + coeff * m[c][d].substitute(&subs);
                }
            }
            out = out.with_term(&[a, b], acc.simplify());
        }
    }
    out
}

fn apply(l: &[[f64; 4]; 4], x: &[f64]) -> Vec<f64> {
    (0..4)
        .map(|i| (0..4).map(|j| l[i][j] * x[j]).sum())
        .collect()
}

#[test]
fn canonical_line_maps_covariantly() {
    let tol = Tolerances::default();
    // invertible linear change of chart
    let l = [
        [1.0, 0.5, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.25],
        [0.0, 0.0, 1.0, 0.5],
        [0.0, 0.0, 0.0, 1.0],
    ];
    let l_inv = invert4(&l);
    let engel = normal_forms::engel();
    let pulled = Distribution::new(
        engel
            .spans
            .iter()
            .map(|s| pullback_field(s, &l, &l_inv))
            .collect(),
    );
    let x = Point::new(vec![0.3, -0.2, 0.4, 0.1]);
    let y = Point::new(apply(&l, &x.coords));
    let grid = vec![x.clone(), Point::new(vec![0.9, 0.3, -0.5, 0.6])];
    let grid_y: Vec<Point> = grid.iter().map(|p| Point::new(apply(&l, &p.coords))).collect();
    let flag_x = derived_flag(&pulled, &grid, 4, &tol).unwrap();
    let flag_y = derived_flag(&engel, &grid_y, 4, &tol).unwrap();
    let (dir_x, _) = canonical_line(&pulled, &flag_x, &x, &tol).unwrap();
    let (dir_y, _) = canonical_line(&engel, &flag_y, &y, &tol).unwrap();
    // the pulled-back line at x pushes forward to the line at y = Lx
    let pushed = apply(&l, &dir_x);
    let cos = linalg::dot(&pushed, &dir_y).abs() / (linalg::norm(&pushed) * linalg::norm(&dir_y));
    assert!(
        (cos - 1.0).abs() < 1e-9,
        "pushed line {:?} vs {:?}",
        pushed,
        dir_y
    );
}

fn invert4(l: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let m = tetrad_core::linalg::Mat::from_rows(&l.iter().map(|r| r.to_vec()).collect::<Vec<_>>());
    let mut inv = [[0.0; 4]; 4];
    for j in 0..4 {
        let mut e = vec![0.0; 4];
        e[j] = 1.0;
        let col = tetrad_core::linalg::solve(&m, &e, 1e-12).unwrap();
        for i in 0..4 {
            inv[i][j] = col[i];
        }
    }
    inv
}

#[test]
fn structure_functions_are_chart_invariants() {
    // a unitary rotation of the chart preserves the standard symplectic
    // form; the pulled-back pair must have the same structure functions at
    // corresponding points
    let tol = Tolerances::default();
    let c = 0.6f64;
    let s = 0.8f64;
    let l = [
        [c, 0.0, -s, 0.0],
        [0.0, c, 0.0, -s],
        [s, 0.0, c, 0.0],
        [0.0, s, 0.0, c],
    ];
    let omega = models::standard_omega();
    // the pullback of omega along this rotation is omega itself
    let pulled_omega = pullback_form2(&omega, &l);
    let diff = pulled_omega.add(&omega.scale(&Expr::int(-1))).simplify();
    for comp in &diff.comps {
        let p = Point::new(vec![0.3, -0.4, 0.2, 0.7]);
        assert!(comp.eval(&p).unwrap().abs() < 1e-12);
    }
    let theta = models::rotating_theta(&Expr::var(0));
    let pulled_theta = pullback_form2(&theta, &l);

    let base_pts = vec![
        Point::new(vec![0.2, -0.3, 0.5, 0.1]),
        Point::new(vec![-0.4, 0.6, -0.2, 0.8]),
        Point::new(vec![0.7, 0.1, 0.3, -0.5]),
    ];
    let image_pts: Vec<Point> = base_pts
        .iter()
        .map(|p| Point::new(apply(&l, &p.coords)))
        .collect();

    let pair_y = normalize_elliptic(&omega, &theta, &image_pts, &tol).unwrap();
    let frame_y = canonical_frame(&pair_y, &image_pts, &tol, BracketMode::Symbolic).unwrap();
    let sf_y = structure_functions(&pair_y, &frame_y, &tol, BracketMode::Symbolic).unwrap();

    let pair_x = normalize_elliptic(&omega, &pulled_theta, &base_pts, &tol).unwrap();
    let frame_x = canonical_frame(&pair_x, &base_pts, &tol, BracketMode::Symbolic).unwrap();
    let sf_x = structure_functions(&pair_x, &frame_x, &tol, BracketMode::Symbolic).unwrap();

    for (a, b) in sf_x.iter().zip(&sf_y) {
        for (ca, cb) in a.coeffs.iter().zip(&b.coeffs) {
            for (x, y) in ca.iter().zip(cb) {
                assert!(
                    (x - y).abs() < 1e-7,
                    "structure functions differ: {:?} vs {:?}",
                    a.coeffs,
                    b.coeffs
                );
            }
        }
    }
}
