//! Exact Gaussian-process surrogate with a Matérn-5/2 ARD kernel.
//!
//! Inputs live in the unit cube. Hyperparameters are fitted by maximizing
//! the log marginal likelihood plus weak priors on standardized outputs, and
//! are reported back on the raw output scale.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::linalg;
use crate::rng::{self, Rng};

const SQRT5: f64 = 2.236_067_977_499_79;

/// Decision points mapped to `[0,1]^d` with their observed values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub bounds: Vec<[f64; 2]>,
}

impl ObservationSet {
    pub fn new(bounds: Vec<[f64; 2]>) -> Self {
        Self {
            points: Vec::new(),
            values: Vec::new(),
            bounds,
        }
    }

    pub fn unit(d: usize) -> Self {
        Self::new(vec![[0.0, 1.0]; d])
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn push(&mut self, x_unit: Vec<f64>, value: f64) -> Result<()> {
        if x_unit.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x_unit.len(),
            });
        }
        if x_unit.iter().any(|v| !(-1e-12..=1.0 + 1e-12).contains(v)) {
            return config_err("observation outside the unit cube");
        }
        if !value.is_finite() {
            return Err(Error::Numerical(format!("non-finite observation {value}")));
        }
        self.points
            .push(x_unit.into_iter().map(|v| v.clamp(0.0, 1.0)).collect());
        self.values.push(value);
        Ok(())
    }

    pub fn push_raw(&mut self, x: &[f64], value: f64) -> Result<()> {
        let u = self.to_unit(x)?;
        self.push(u, value)
    }

    pub fn to_unit(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(x.iter()
            .zip(&self.bounds)
            .map(|(v, b)| (v - b[0]) / (b[1] - b[0]))
            .collect())
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.bounds)
            .map(|(v, b)| b[0] + v * (b[1] - b[0]))
            .collect()
    }

    /// Index and value of the best observation, lowest index on ties.
    pub fn best(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in self.values.iter().enumerate() {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best
    }

    /// Subset of the observations by index.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            points: idx.iter().map(|&i| self.points[i].clone()).collect(),
            values: idx.iter().map(|&i| self.values[i]).collect(),
            bounds: self.bounds.clone(),
        }
    }
}

/// Kernel and likelihood parameters on the raw output scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparams {
    pub lengthscales: Vec<f64>,
    pub signal_var: f64,
    pub noise_var: f64,
    pub mean_const: f64,
}

impl GpHyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.iter().any(|l| !(*l > 0.0)) {
            return config_err("lengthscales must be positive");
        }
        if !(self.signal_var > 0.0) || !(self.noise_var >= 0.0) || !self.mean_const.is_finite() {
            return config_err("invalid GP variances or mean");
        }
        Ok(())
    }
}

/// Matérn-5/2 correlation at scaled distance `r`.
pub fn matern52(r: f64) -> f64 {
    let s = SQRT5 * r;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

fn scaled(x: &[f64], ls: &[f64]) -> Vec<f64> {
    x.iter().zip(ls).map(|(v, l)| v / l).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `k(a, b)` with the given hyperparameters.
pub fn kernel(a: &[f64], b: &[f64], h: &GpHyperparams) -> f64 {
    let r2: f64 = a
        .iter()
        .zip(b)
        .zip(&h.lengthscales)
        .map(|((x, y), l)| ((x - y) / l).powi(2))
        .sum();
    h.signal_var * matern52(r2.sqrt())
}

/// Bounds and priors of the hyperparameter search, on standardized outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub restarts: usize,
    pub iters: usize,
    pub learning_rate: f64,
    pub lengthscale_bounds: [f64; 2],
    pub signal_var_bounds: [f64; 2],
    pub noise_var_bounds: [f64; 2],
    /// Extra starting point, typically the previous fit.
    pub warm_start: Option<GpHyperparams>,
    /// `(location, scale)` of the log-normal lengthscale prior; `None` uses
    /// the dimension-scaled default.
    #[serde(default)]
    pub lengthscale_prior: Option<[f64; 2]>,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            iters: 100,
            learning_rate: 0.1,
            lengthscale_bounds: [0.005, 10.0],
            signal_var_bounds: [0.05, 20.0],
            noise_var_bounds: [1e-8, 1.0],
            warm_start: None,
            lengthscale_prior: None,
            seed: 0,
        }
    }
}

impl FitOptions {
    /// A short warm-started refit for use inside optimizer loops.
    pub fn quick(warm_start: Option<GpHyperparams>, seed: u64) -> Self {
        let cold = warm_start.is_none();
        Self {
            restarts: if cold { 3 } else { 1 },
            iters: if cold { 60 } else { 25 },
            warm_start,
            seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Standardizer {
    mean: f64,
    std: f64,
}

impl Standardizer {
    fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }

    fn degenerate(&self) -> bool {
        !(self.std > 1e-12 * (1.0 + self.mean.abs()))
    }
}

/// Log-normal lengthscale prior whose location grows with dimension.
fn lengthscale_prior(d: usize) -> (f64, f64) {
    (std::f64::consts::SQRT_2 + 0.5 * (d as f64).ln(), 3f64.sqrt())
}

const SIGNAL_PRIOR: (f64, f64) = (2.0, 0.15);
const NOISE_PRIOR: (f64, f64) = (1.1, 0.05);

/// Negative log posterior of the log-parameters and its gradient.
struct MapObjective<'a> {
    x: &'a [Vec<f64>],
    y: Vec<f64>,
    d: usize,
    prior_ls: (f64, f64),
}

impl MapObjective<'_> {
    fn value_grad(&self, p: &[f64]) -> Option<(f64, Vec<f64>)> {
        let n = self.y.len();
        let d = self.d;
        let ls: Vec<f64> = p[..d].iter().map(|v| v.exp()).collect();
        let s2 = p[d].exp();
        let nv = p[d + 1].exp();
        let z: Vec<Vec<f64>> = self.x.iter().map(|x| scaled(x, &ls)).collect();
        let mut k = vec![0.0; n * n];
        let mut dk_dr = vec![0.0; n * n];
        for i in 0..n {
            k[i * n + i] = s2 + nv;
            dk_dr[i * n + i] = s2 * 5.0 / 3.0;
            for j in 0..i {
                let r = sq_dist(&z[i], &z[j]).sqrt();
                let e = (-SQRT5 * r).exp();
                let kij = s2 * (1.0 + SQRT5 * r + 5.0 * r * r / 3.0) * e;
                let c = s2 * 5.0 / 3.0 * (1.0 + SQRT5 * r) * e;
                k[i * n + j] = kij;
                k[j * n + i] = kij;
                dk_dr[i * n + j] = c;
                dk_dr[j * n + i] = c;
            }
        }
        let l = linalg::cholesky(&k, n)?;
        let alpha = linalg::chol_solve(&l, n, &self.y);
        let fit = 0.5 * self.y.iter().zip(&alpha).map(|(a, b)| a * b).sum::<f64>();
        let lml = -fit - linalg::half_log_det(&l, n) - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        let inv = linalg::chol_inverse(&l, n);

        let mut grad = vec![0.0; d + 2];
        let mut g_s2 = 0.0;
        let mut g_nv = 0.0;
        for i in 0..n {
            let w_ii = alpha[i] * alpha[i] - inv[i * n + i];
            g_nv += w_ii;
            g_s2 += w_ii * s2;
            for j in 0..i {
                let w = alpha[i] * alpha[j] - inv[i * n + j];
                g_s2 += 2.0 * w * (k[i * n + j]);
                let c = 2.0 * w * dk_dr[i * n + j];
                if c != 0.0 {
                    for t in 0..d {
                        let dz = z[i][t] - z[j][t];
                        grad[t] += c * dz * dz;
                    }
                }
            }
        }
        for g in grad.iter_mut().take(d) {
            *g *= 0.5;
        }
        grad[d] = 0.5 * g_s2;
        grad[d + 1] = 0.5 * g_nv * nv;

        // priors, differentiated with respect to the log-parameters
        let (mu, sigma) = self.prior_ls;
        let mut lp = 0.0;
        for t in 0..d {
            let u = p[t];
            lp += -u - (u - mu).powi(2) / (2.0 * sigma * sigma);
            grad[t] += -1.0 - (u - mu) / (sigma * sigma);
        }
        for (idx, (a, b), v) in [(d, SIGNAL_PRIOR, s2), (d + 1, NOISE_PRIOR, nv)] {
            lp += (a - 1.0) * v.ln() - b * v;
            grad[idx] += (a - 1.0) - b * v;
        }
        let obj = lml + lp;
        if !obj.is_finite() {
            return None;
        }
        Some((-obj, grad.into_iter().map(|g| -g).collect()))
    }
}

/// MAP hyperparameters for `obs`, multi-start Adam in log space.
pub fn fit(obs: &ObservationSet, opts: &FitOptions) -> Result<GpHyperparams> {
    let n = obs.len();
    let d = obs.dim();
    if n < 2 {
        return config_err("GP fitting needs at least two observations");
    }
    let st = Standardizer::of(&obs.values);
    let prior_ls = opts
        .lengthscale_prior
        .map_or_else(|| lengthscale_prior(d), |p| (p[0], p[1]));
    let ls_default = (prior_ls.0 - prior_ls.1 * prior_ls.1)
        .exp()
        .clamp(opts.lengthscale_bounds[0], opts.lengthscale_bounds[1]);
    if st.degenerate() {
        return Ok(GpHyperparams {
            lengthscales: vec![ls_default; d],
            signal_var: opts.signal_var_bounds[0],
            noise_var: opts.noise_var_bounds[0],
            mean_const: st.mean,
        });
    }
    let objective = MapObjective {
        x: &obs.points,
        y: obs.values.iter().map(|v| (v - st.mean) / st.std).collect(),
        d,
        prior_ls,
    };
    let lo: Vec<f64> = std::iter::repeat_n(opts.lengthscale_bounds[0].ln(), d)
        .chain([opts.signal_var_bounds[0].ln(), opts.noise_var_bounds[0].ln()])
        .collect();
    let hi: Vec<f64> = std::iter::repeat_n(opts.lengthscale_bounds[1].ln(), d)
        .chain([opts.signal_var_bounds[1].ln(), opts.noise_var_bounds[1].ln()])
        .collect();
    let clamp = |p: &mut Vec<f64>| {
        for (i, v) in p.iter_mut().enumerate() {
            *v = v.clamp(lo[i], hi[i]);
        }
    };

    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(w) = &opts.warm_start {
        if w.lengthscales.len() == d {
            let s2 = w.signal_var / (st.std * st.std);
            let nv = w.noise_var / (st.std * st.std);
            starts.push(
                w.lengthscales
                    .iter()
                    .map(|l| l.ln())
                    .chain([s2.ln(), nv.max(opts.noise_var_bounds[0]).ln()])
                    .collect(),
            );
        }
    }
    starts.push(
        std::iter::repeat_n(ls_default.ln(), d)
            .chain([0.0, 1e-3f64.ln()])
            .collect(),
    );
    let mut rng = rng::stream(opts.seed, rng::STREAM_GP_FIT);
    while starts.len() < opts.restarts.max(1) {
        let mut p: Vec<f64> = (0..d).map(|_| ls_default.ln() + rng.random_range(-2.0..2.0)).collect();
        p.push(rng.random_range(0.3f64.ln()..3f64.ln()));
        p.push(rng.random_range(1e-6f64.ln()..0.1f64.ln()));
        starts.push(p);
    }
    starts.truncate(opts.restarts.max(1));

    let mut best: Option<(f64, Vec<f64>)> = None;
    for mut p in starts {
        clamp(&mut p);
        let Some((mut fval, _)) = objective.value_grad(&p) else {
            continue;
        };
        let mut best_local = (fval, p.clone());
        let mut m = vec![0.0; d + 2];
        let mut v = vec![0.0; d + 2];
        let (b1, b2, eps) = (0.9, 0.999, 1e-8);
        for t in 1..=opts.iters {
            let Some((f, g)) = objective.value_grad(&p) else {
                break;
            };
            fval = f;
            if fval < best_local.0 {
                best_local = (fval, p.clone());
            }
            for i in 0..d + 2 {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let mh = m[i] / (1.0 - b1.powi(t as i32));
                let vh = v[i] / (1.0 - b2.powi(t as i32));
                p[i] -= opts.learning_rate * mh / (vh.sqrt() + eps);
            }
            clamp(&mut p);
        }
        if let Some((f, _)) = objective.value_grad(&p) {
            if f < best_local.0 {
                best_local = (f, p.clone());
            }
        }
        if best.as_ref().is_none_or(|b| best_local.0 < b.0) {
            best = Some(best_local);
        }
    }
    let (_, p) = best.ok_or_else(|| Error::Numerical("every GP fit restart failed".into()))?;
    let var = st.std * st.std;
    Ok(GpHyperparams {
        lengthscales: p[..d].iter().map(|v| v.exp()).collect(),
        signal_var: p[d].exp() * var,
        noise_var: p[d + 1].exp() * var,
        mean_const: st.mean,
    })
}

/// Conditioned GP ready for prediction and sampling.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    pub hyper: GpHyperparams,
    /// Training inputs divided by the lengthscales.
    z: Vec<Vec<f64>>,
    n: usize,
    chol: Vec<f64>,
    alpha: Vec<f64>,
    /// Absolute diagonal jitter that made the factorization succeed.
    pub jitter: f64,
}

impl GpPosterior {
    pub fn new(points: &[Vec<f64>], values: &[f64], hyper: GpHyperparams) -> Result<Self> {
        hyper.validate()?;
        if points.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: values.len(),
            });
        }
        let n = points.len();
        let z: Vec<Vec<f64>> = points.iter().map(|x| scaled(x, &hyper.lengthscales)).collect();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            k[i * n + i] = hyper.signal_var + hyper.noise_var;
            for j in 0..i {
                let v = hyper.signal_var * matern52(sq_dist(&z[i], &z[j]).sqrt());
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        let (chol, jitter) = if n == 0 {
            (Vec::new(), 0.0)
        } else {
            linalg::cholesky_jittered(&k, n, hyper.signal_var)?
        };
        let resid: Vec<f64> = values.iter().map(|v| v - hyper.mean_const).collect();
        let alpha = linalg::chol_solve(&chol, n, &resid);
        Ok(Self {
            hyper,
            z,
            n,
            chol,
            alpha,
            jitter,
        })
    }

    /// Fit hyperparameters and condition in one step.
    pub fn fit(obs: &ObservationSet, opts: &FitOptions) -> Result<Self> {
        let h = fit(obs, opts)?;
        Self::new(&obs.points, &obs.values, h)
    }

    pub fn n_train(&self) -> usize {
        self.n
    }

    /// Lower Cholesky factor of the training covariance, row-major.
    pub fn factor(&self) -> &[f64] {
        &self.chol
    }

    fn cross(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        // n × m, row-major
        let m = xs.len();
        let zs: Vec<Vec<f64>> = xs.iter().map(|x| scaled(x, &self.hyper.lengthscales)).collect();
        let mut kx = vec![0.0; self.n * m];
        for i in 0..self.n {
            for (j, zj) in zs.iter().enumerate() {
                kx[i * m + j] = self.hyper.signal_var * matern52(sq_dist(&self.z[i], zj).sqrt());
            }
        }
        kx
    }

    /// Posterior mean and variance at one point.
    pub fn posterior(&self, x: &[f64]) -> (f64, f64) {
        let (m, v) = self.posterior_batch(std::slice::from_ref(&x.to_vec()));
        (m[0], v[0])
    }

    /// Posterior means and variances at many points.
    pub fn posterior_batch(&self, xs: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let m = xs.len();
        let s2 = self.hyper.signal_var;
        if self.n == 0 {
            return (vec![self.hyper.mean_const; m], vec![s2; m]);
        }
        let kx = self.cross(xs);
        let mut mean = vec![self.hyper.mean_const; m];
        for i in 0..self.n {
            let a = self.alpha[i];
            for j in 0..m {
                mean[j] += kx[i * m + j] * a;
            }
        }
        let v = linalg::solve_lower_multi(&self.chol, self.n, &kx, m);
        let mut var = vec![s2; m];
        for i in 0..self.n {
            for j in 0..m {
                var[j] -= v[i * m + j] * v[i * m + j];
            }
        }
        var.iter_mut().for_each(|x| *x = x.max(0.0));
        (mean, var)
    }

    /// Posterior mean vector and covariance matrix over `xs`.
    pub fn joint(&self, xs: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let m = xs.len();
        let zs: Vec<Vec<f64>> = xs.iter().map(|x| scaled(x, &self.hyper.lengthscales)).collect();
        let mut cov = vec![0.0; m * m];
        for a in 0..m {
            cov[a * m + a] = self.hyper.signal_var;
            for b in 0..a {
                let v = self.hyper.signal_var * matern52(sq_dist(&zs[a], &zs[b]).sqrt());
                cov[a * m + b] = v;
                cov[b * m + a] = v;
            }
        }
        let mut mean = vec![self.hyper.mean_const; m];
        if self.n > 0 {
            let kx = self.cross(xs);
            for i in 0..self.n {
                for j in 0..m {
                    mean[j] += kx[i * m + j] * self.alpha[i];
                }
            }
            let v = linalg::solve_lower_multi(&self.chol, self.n, &kx, m);
            // cov -= Vᵀ V
            for i in 0..self.n {
                let row = &v[i * m..(i + 1) * m];
                for a in 0..m {
                    let va = row[a];
                    if va == 0.0 {
                        continue;
                    }
                    for b in 0..=a {
                        cov[a * m + b] -= va * row[b];
                    }
                }
            }
            for a in 0..m {
                for b in 0..a {
                    cov[b * m + a] = cov[a * m + b];
                }
            }
        }
        (mean, cov)
    }

    /// One draw from the joint posterior over `xs`.
    pub fn sample_joint(&self, xs: &[Vec<f64>], rng: &mut Rng) -> Result<Vec<f64>> {
        Ok(self.sample_paths(xs, 1, rng)?.pop().unwrap_or_default())
    }

    /// `k` independent joint draws sharing one factorization.
    pub fn sample_paths(&self, xs: &[Vec<f64>], k: usize, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
        let m = xs.len();
        if m == 0 {
            return Ok(vec![Vec::new(); k]);
        }
        let (mean, cov) = self.joint(xs);
        let (l, _) = linalg::cholesky_jittered(&cov, m, self.hyper.signal_var.max(1e-300))?;
        let mut out = Vec::with_capacity(k);
        for _ in 0..k {
            let e: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
            let mut s = mean.clone();
            for i in 0..m {
                let row = &l[i * m..i * m + i + 1];
                s[i] += row.iter().zip(&e).map(|(a, b)| a * b).sum::<f64>();
            }
            out.push(s);
        }
        Ok(out)
    }
}

/// Everything needed to rebuild a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpCheckpoint {
    pub hyper: GpHyperparams,
    pub obs: ObservationSet,
}

impl GpCheckpoint {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn restore(&self) -> Result<GpPosterior> {
        GpPosterior::new(&self.obs.points, &self.obs.values, self.hyper.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn hyper(d: usize) -> GpHyperparams {
        GpHyperparams {
            lengthscales: vec![0.3; d],
            signal_var: 2.0,
            noise_var: 0.0,
            mean_const: 0.5,
        }
    }

    fn random_points(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..d).map(|_| r.random::<f64>()).collect()).collect()
    }

    #[test]
    fn matern_values() {
        assert_eq!(matern52(0.0), 1.0);
        let r: f64 = 0.7;
        let s = 5f64.sqrt() * r;
        assert!((matern52(r) - (1.0 + s + 5.0 * r * r / 3.0) * (-s).exp()).abs() < 1e-15);
    }

    #[test]
    fn map_gradient_matches_finite_differences() {
        let x = random_points(12, 3, 9);
        let y: Vec<f64> = x.iter().map(|p| (4.0 * p[0]).sin() + p[1] - p[2] * p[2]).collect();
        let obj = MapObjective {
            x: &x,
            y,
            d: 3,
            prior_ls: lengthscale_prior(3),
        };
        let p = vec![-1.0, -0.5, 0.2, 0.3, -4.0];
        let (_, g) = obj.value_grad(&p).unwrap();
        for i in 0..p.len() {
            let h = 1e-6;
            let mut a = p.clone();
            let mut b = p.clone();
            a[i] += h;
            b[i] -= h;
            let fd = (obj.value_grad(&a).unwrap().0 - obj.value_grad(&b).unwrap().0) / (2.0 * h);
            assert!(
                (fd - g[i]).abs() < 1e-5 * (1.0 + fd.abs()),
                "param {i}: {fd} vs {}",
                g[i]
            );
        }
    }

    #[test]
    fn empty_posterior_is_prior() {
        let g = GpPosterior::new(&[], &[], hyper(2)).unwrap();
        let (m, v) = g.posterior(&[0.2, 0.4]);
        assert_eq!((m, v), (0.5, 2.0));
    }

    #[test]
    fn noise_free_interpolates() {
        let x = random_points(15, 3, 1);
        let y: Vec<f64> = x.iter().map(|p| p[0].sin() + p[1] * p[2]).collect();
        let g = GpPosterior::new(&x, &y, hyper(3)).unwrap();
        for (p, t) in x.iter().zip(&y) {
            let (m, v) = g.posterior(p);
            assert!((m - t).abs() < 1e-8 && v < 1e-8, "{m} {t} {v}");
        }
    }

    #[test]
    fn fit_recovers_degenerate_and_duplicates() {
        let mut obs = ObservationSet::unit(2);
        for p in random_points(10, 2, 3) {
            obs.push(p, 4.0).unwrap();
        }
        let h = fit(&obs, &FitOptions::default()).unwrap();
        assert_eq!(h.signal_var, FitOptions::default().signal_var_bounds[0]);
        assert_eq!(h.mean_const, 4.0);

        let mut obs = ObservationSet::unit(1);
        for (x, y) in [(0.5, 1.0), (0.5, -1.0), (0.1, 0.3), (0.9, 0.2), (0.3, 0.8)] {
            obs.push(vec![x], y).unwrap();
        }
        let h = fit(&obs, &FitOptions::default()).unwrap();
        assert!(h.noise_var > 1e-3, "{h:?}");
        assert!(fit(&ObservationSet::unit(1), &FitOptions::default()).is_err());
    }

    #[test]
    fn fit_is_deterministic() {
        let x = random_points(20, 2, 5);
        let mut obs = ObservationSet::unit(2);
        for p in x {
            let y = (3.0 * p[0]).sin() + p[1];
            obs.push(p, y).unwrap();
        }
        let opts = FitOptions {
            seed: 4,
            ..FitOptions::default()
        };
        assert_eq!(fit(&obs, &opts).unwrap(), fit(&obs, &opts).unwrap());
    }

    #[test]
    fn sample_moments_single_point() {
        let x = random_points(8, 2, 7);
        let y: Vec<f64> = x.iter().map(|p| p[0] - p[1]).collect();
        let mut h = hyper(2);
        h.noise_var = 0.01;
        let g = GpPosterior::new(&x, &y, h).unwrap();
        let q = vec![vec![0.55, 0.45]];
        let (m, v) = g.posterior(&q[0]);
        let mut r = rng::stream(1, 0);
        let draws: Vec<f64> = g
            .sample_paths(&q, 10_000, &mut r)
            .unwrap()
            .into_iter()
            .map(|s| s[0])
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt();
        assert!((mean - m).abs() < 0.02 * v.sqrt() * 3.0 + 1e-12, "{mean} {m}");
        assert!((sd / v.sqrt() - 1.0).abs() < 0.02, "{sd} {}", v.sqrt());
    }

    #[test]
    fn duplicated_candidates_sample_equal() {
        let x = random_points(6, 2, 8);
        let y: Vec<f64> = x.iter().map(|p| p[0]).collect();
        let g = GpPosterior::new(&x, &y, hyper(2)).unwrap();
        let c = vec![vec![0.3, 0.3], vec![0.3, 0.3], vec![0.8, 0.1]];
        let s = g.sample_joint(&c, &mut rng::stream(2, 0)).unwrap();
        assert!((s[0] - s[1]).abs() < 1e-4);
        let again = g.sample_joint(&c, &mut rng::stream(2, 0)).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut obs = ObservationSet::new(vec![[-20.0, 45.0], [5.0, 70.0]]);
        obs.push_raw(&[0.0, 10.0], 1.0).unwrap();
        obs.push_raw(&[30.0, 60.0], 2.0).unwrap();
        let ck = GpCheckpoint { hyper: hyper(2), obs };
        let back = GpCheckpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(back, ck);
        let (a, _) = ck.restore().unwrap().posterior(&[0.2, 0.2]);
        let (b, _) = back.restore().unwrap().posterior(&[0.2, 0.2]);
        assert_eq!(a, b);
        assert_eq!(
            ck.obs.from_unit(&ck.obs.to_unit(&[1.0, 20.0]).unwrap()),
            vec![1.0, 20.0]
        );
    }
}
