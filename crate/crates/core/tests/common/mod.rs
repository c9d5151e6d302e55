//! Independent oracles shared by the property tests and the acceptance run.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uavtilt::gp::{kernel, GpHyperparams};
use uavtilt::morbo::dominates;

/// Posterior mean and variance by explicit dense inversion.
pub fn dense_posterior(points: &[Vec<f64>], values: &[f64], h: &GpHyperparams, jitter: f64, x: &[f64]) -> (f64, f64) {
    let n = points.len();
    let k = DMatrix::from_fn(n, n, |i, j| {
        kernel(&points[i], &points[j], h) + if i == j { h.noise_var + jitter } else { 0.0 }
    });
    let kinv = k.try_inverse().expect("invertible");
    let kx = DVector::from_fn(n, |i, _| kernel(&points[i], x, h));
    let y = DVector::from_fn(n, |i, _| values[i] - h.mean_const);
    let mean = h.mean_const + (kx.transpose() * &kinv * y)[(0, 0)];
    let var = kernel(x, x, h) - (kx.transpose() * &kinv * &kx)[(0, 0)];
    (mean, var)
}

pub struct GpInstance {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub hyper: GpHyperparams,
    pub test: Vec<Vec<f64>>,
}

pub fn gp_instance(seed: u64) -> GpInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(1..=5);
    let n = rng.random_range(1..=25);
    let points: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    let values = points
        .iter()
        .map(|p| p.iter().map(|v| (3.0 * v).sin()).sum::<f64>() + 0.1 * rng.random::<f64>())
        .collect();
    let hyper = GpHyperparams {
        lengthscales: (0..d).map(|_| rng.random_range(0.2..2.0)).collect(),
        signal_var: rng.random_range(0.3..3.0),
        noise_var: rng.random_range(1e-3..0.1),
        mean_const: rng.random_range(-1.0..1.0),
    };
    let test = (0..5).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    GpInstance {
        points,
        values,
        hyper,
        test,
    }
}

/// E[max(Y − f* − ξ, 0)] for Y ~ N(μ, σ²) by composite Simpson over ±12σ.
pub fn ei_numeric(mu: f64, sigma: f64, f_star: f64, xi: f64) -> f64 {
    let n = 200_000;
    let (a, b) = (mu - 12.0 * sigma, mu + 12.0 * sigma);
    let h = (b - a) / n as f64;
    let f = |y: f64| {
        let z = (y - mu) / sigma;
        (y - f_star - xi).max(0.0) * (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
    };
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Nondominated indices by pairwise comparison, ascending.
pub fn oracle_front(points: &[[f64; 2]]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| !points.iter().any(|q| dominates(q, &points[i])))
        .collect()
}

/// Random 2-d point set; `grid` uses coarse values to force ties.
pub fn random_set(rng: &mut ChaCha8Rng, n: usize, grid: bool) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| {
            if grid {
                [rng.random_range(0..6) as f64, rng.random_range(0..6) as f64]
            } else {
                [rng.random::<f64>(), rng.random::<f64>()]
            }
        })
        .collect()
}

/// Fraction of `n` uniform samples of the unit square dominated by `front`.
pub fn monte_carlo_hv(front: &[[f64; 2]], n: usize, rng: &mut ChaCha8Rng) -> f64 {
    let hits = (0..n)
        .filter(|_| {
            let s = [rng.random::<f64>(), rng.random::<f64>()];
            front.iter().any(|p| p[0] >= s[0] && p[1] >= s[1])
        })
        .count();
    hits as f64 / n as f64
}
