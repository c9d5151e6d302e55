//! Dense Cholesky factorization and triangular solves on row-major slices.

use crate::error::{Error, Result};

/// Diagonal jitter ladder, relative to the matrix scale.
pub const JITTER_LADDER: [f64; 5] = [0.0, 1e-8, 1e-6, 1e-4, 1e-2];

/// Lower Cholesky factor of the `n × n` matrix `a`, or `None` if it is not
/// numerically positive definite.
pub fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let li = &l[i * n..i * n + j];
            let lj = &l[j * n..j * n + j];
            let dot: f64 = li.iter().zip(lj).map(|(x, y)| x * y).sum();
            let s = a[i * n + j] - dot;
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Factor `a + jitter·scale·I`, climbing [`JITTER_LADDER`] until it succeeds.
/// Returns the factor and the absolute jitter added.
pub fn cholesky_jittered(a: &[f64], n: usize, scale: f64) -> Result<(Vec<f64>, f64)> {
    let mut work = a.to_vec();
    for &j in &JITTER_LADDER {
        let add = j * scale;
        for i in 0..n {
            work[i * n + i] = a[i * n + i] + add;
        }
        if let Some(l) = cholesky(&work, n) {
            return Ok((l, add));
        }
    }
    Err(Error::Numerical(format!(
        "matrix of size {n} is not positive definite even with jitter"
    )))
}

/// Solve `L x = b`.
pub fn solve_lower(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let s: f64 = row.iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
        x[i] = (x[i] - s) / l[i * n + i];
    }
    x
}

/// Solve `Lᵀ x = b`.
pub fn solve_upper_t(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

/// Solve `L Lᵀ x = b`.
pub fn chol_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    solve_upper_t(l, n, &solve_lower(l, n, b))
}

/// Solve `L X = B` for an `n × m` row-major right-hand side.
pub fn solve_lower_multi(l: &[f64], n: usize, b: &[f64], m: usize) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            let lik = l[i * n + k];
            if lik != 0.0 {
                let (head, tail) = x.split_at_mut(i * m);
                let src = &head[k * m..(k + 1) * m];
                for (d, s) in tail[..m].iter_mut().zip(src) {
                    *d -= lik * s;
                }
            }
        }
        let inv = 1.0 / l[i * n + i];
        x[i * m..(i + 1) * m].iter_mut().for_each(|v| *v *= inv);
    }
    x
}

/// `(L Lᵀ)⁻¹` from the lower factor.
pub fn chol_inverse(l: &[f64], n: usize) -> Vec<f64> {
    let mut eye = vec![0.0; n * n];
    for i in 0..n {
        eye[i * n + i] = 1.0;
    }
    // rows of L⁻¹ transposed are the columns we need: inv = L⁻ᵀ L⁻¹
    let linv = solve_lower_multi(l, n, &eye, n);
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = 0.0;
            for k in i..n {
                s += linv[k * n + i] * linv[k * n + j];
            }
            inv[i * n + j] = s;
            inv[j * n + i] = s;
        }
    }
    inv
}

/// `Σ log L_ii`, half the log-determinant of `L Lᵀ`.
pub fn half_log_det(l: &[f64], n: usize) -> f64 {
    (0..n).map(|i| l[i * n + i].ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_spd(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..n).map(|k| b[i * n + k] * b[j * n + k]).sum::<f64>();
            }
            a[i * n + i] += n as f64 * 0.1;
        }
        a
    }

    #[test]
    fn factor_reproduces_matrix() {
        let n = 12;
        let a = random_spd(n, 1);
        let l = cholesky(&a, n).unwrap();
        for i in 0..n {
            for j in 0..n {
                let s: f64 = (0..n).map(|k| l[i * n + k] * l[j * n + k]).sum();
                assert!((s - a[i * n + j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn solves_and_inverse() {
        let n = 9;
        let a = random_spd(n, 2);
        let l = cholesky(&a, n).unwrap();
        let b: Vec<f64> = (0..n).map(|i| i as f64 - 3.0).collect();
        let x = chol_solve(&l, n, &b);
        for i in 0..n {
            let s: f64 = (0..n).map(|k| a[i * n + k] * x[k]).sum();
            assert!((s - b[i]).abs() < 1e-10);
        }
        let inv = chol_inverse(&l, n);
        for i in 0..n {
            for j in 0..n {
                let s: f64 = (0..n).map(|k| a[i * n + k] * inv[k * n + j]).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
        let multi = solve_lower_multi(&l, n, &b, 1);
        for (a, b) in multi.iter().zip(solve_lower(&l, n, &b)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn jitter_rescues_singular() {
        let a = vec![1.0, 1.0, 1.0, 1.0];
        assert!(cholesky(&a, 2).is_none());
        let (_, j) = cholesky_jittered(&a, 2, 1.0).unwrap();
        assert!(j > 0.0);
        assert!(cholesky_jittered(&[-1.0], 1, 1.0).is_err());
    }
}
