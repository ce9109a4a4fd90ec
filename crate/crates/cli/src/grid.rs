//! Deterministic grids: a lattice enumerated with the last axis fastest,
//! followed by seeded uniform random points.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tetrad_core::expr::Point;

use crate::manifest::GridSpec;

pub fn build_grid(spec: &GridSpec) -> Vec<Point> {
    let n = spec.lattice.min.len();
    let mut points = Vec::new();
    let counts = &spec.lattice.counts;
    let total: usize = counts.iter().product();
    for flat in 0..total {
        let mut rem = flat;
        let mut coords = vec![0.0; n];
        for axis in (0..n).rev() {
            let k = counts[axis];
            let idx = rem % k;
            rem /= k;
            let (lo, hi) = (spec.lattice.min[axis], spec.lattice.max[axis]);
            coords[axis] = if k == 1 {
                (lo + hi) / 2.0
            } else {
                lo + (hi - lo) * (idx as f64) / ((k - 1) as f64)
            };
        }
        points.push(Point::new(coords));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for _ in 0..spec.random {
        let coords = (0..n)
            .map(|axis| {
                let (lo, hi) = (spec.lattice.min[axis], spec.lattice.max[axis]);
                if hi > lo {
                    rng.gen_range(lo..hi)
                } else {
                    lo
                }
            })
            .collect();
        points.push(Point::new(coords));
    }
    points
}
