#![allow(dead_code)]

use smartkl::problems::SeededRng;
use smartkl::{KlProblem, ManifoldKind, NonnegativeSparseMatrix, Point, Tangent};

/// Random interior point, bounded away from the boundary.
pub fn random_point(rng: &mut SeededRng, kind: ManifoldKind, n: usize) -> Point {
    let coords: Vec<f64> = match kind {
        ManifoldKind::Orthant => (0..n).map(|_| rng.uniform_in(0.1, 5.0)).collect(),
        ManifoldKind::Box => (0..n).map(|_| rng.uniform_in(0.05, 0.95)).collect(),
        ManifoldKind::Simplex => {
            let raw: Vec<f64> = (0..n).map(|_| rng.uniform_in(0.1, 1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect()
        }
    };
    Point::new(kind, coords).expect("interior point")
}

/// Random tangent with entries in `[-scale, scale]`, centred on the simplex.
pub fn random_tangent(rng: &mut SeededRng, kind: ManifoldKind, n: usize, scale: f64) -> Tangent {
    let mut coords: Vec<f64> = (0..n).map(|_| rng.uniform_in(-scale, scale)).collect();
    if kind == ManifoldKind::Simplex {
        let mean = coords.iter().sum::<f64>() / n as f64;
        coords.iter_mut().for_each(|c| *c -= mean);
    }
    Tangent::new(kind, coords).expect("valid tangent")
}

pub fn random_vector(rng: &mut SeededRng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.uniform_in(lo, hi)).collect()
}

/// Random nonnegative `m × n` matrix with roughly `density` fill and at least
/// one entry in every row and column.
pub fn random_matrix(rng: &mut SeededRng, m: usize, n: usize, density: f64) -> NonnegativeSparseMatrix {
    let mut dense = vec![0.0; m * n];
    for v in dense.iter_mut() {
        if rng.uniform() < density {
            *v = rng.uniform_in(0.01, 1.0);
        }
    }
    for j in 0..n {
        dense[(j % m) * n + j] = rng.uniform_in(0.1, 1.0);
    }
    for i in 0..m {
        dense[i * n + i % n] = rng.uniform_in(0.1, 1.0);
    }
    NonnegativeSparseMatrix::from_dense(m, n, &dense).expect("valid random matrix")
}

/// Random problem whose data `b` is positive but otherwise unrelated to `A`.
pub fn random_problem(rng: &mut SeededRng, kind: ManifoldKind, m: usize, n: usize) -> KlProblem {
    let a = random_matrix(rng, m, n, 0.4);
    let b = random_vector(rng, m, 0.1, 3.0);
    KlProblem::new(a, b, kind).expect("valid problem")
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE)).fold(0.0, f64::max)
}

pub fn inf_norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// Central difference of `f` at `x` along each ambient coordinate.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            plus[j] += h;
            minus[j] -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}
