//! Expected improvement and the two global optimizers: vanilla BO over the
//! whole box and iterative BO that sweeps one coordinate per iteration.

use std::io::Write;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::gp::{FitOptions, GpHyperparams, GpPosterior, ObservationSet};
use crate::rng::{self, Rng};

/// Objective over raw decision coordinates; larger is better.
pub type EvalFn<'a> = dyn Fn(&[f64]) -> Result<f64> + Sync + 'a;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Which spread enters the improvement formula.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EiForm {
    /// Posterior standard deviation, the usual closed form.
    #[default]
    StdDev,
    /// Posterior variance in place of the standard deviation, as sometimes
    /// printed; kept for comparison runs.
    Variance,
}

/// Incumbent used in the improvement.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Incumbent {
    /// Best observed value.
    #[default]
    Observed,
    /// Largest posterior mean over the current candidate set.
    SurrogateMax,
}

/// `(μ − f* − ξ)Φ(δ) + σφ(δ)`, `δ = (μ − f* − ξ)/σ`; never negative.
pub fn expected_improvement(mu: f64, sigma: f64, f_star: f64, xi: f64) -> f64 {
    let imp = mu - f_star - xi;
    if !(sigma > 0.0) {
        return imp.max(0.0);
    }
    let z = imp / sigma;
    (imp * norm_cdf(z) + sigma * norm_pdf(z)).max(0.0)
}

pub fn expected_improvement_form(mu: f64, sd: f64, f_star: f64, xi: f64, form: EiForm) -> f64 {
    match form {
        EiForm::StdDev => expected_improvement(mu, sd, f_star, xi),
        EiForm::Variance => expected_improvement(mu, sd * sd, f_star, xi),
    }
}

/// Point whose coordinate an iterative-BO step varies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepBase {
    /// Best point of the coordinate path so far; a worse proposal is
    /// recorded but not moved to (coordinate ascent).
    #[default]
    Best,
    /// The previous proposal, whatever its value.
    Last,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoConfig {
    /// Random initial points; `None` means twice the dimension.
    pub n_init: Option<usize>,
    pub n_candidates: usize,
    pub n_batches: usize,
    pub batch_size: usize,
    pub xi: f64,
    pub max_iters: usize,
    /// Iterative BO stops after this many full sweeps without improvement.
    pub ell_max: usize,
    pub seed: u64,
    pub ei_form: EiForm,
    pub incumbent: Incumbent,
    /// Hyperparameters are refitted every this many iterations; in between
    /// the model is only reconditioned on the new data.
    pub refit_every: usize,
    /// Overrides the GP lengthscale prior, see [`FitOptions`].
    pub lengthscale_prior: Option<[f64; 2]>,
    pub step_from: StepBase,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            n_init: None,
            n_candidates: 500,
            n_batches: 10,
            batch_size: 50,
            xi: 0.01,
            max_iters: 250,
            ell_max: 3,
            seed: 0,
            ei_form: EiForm::StdDev,
            incumbent: Incumbent::Observed,
            refit_every: 1,
            lengthscale_prior: None,
            step_from: StepBase::Best,
        }
    }
}

impl BoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_batches * self.batch_size != self.n_candidates || self.n_candidates == 0 {
            return config_err("n_batches × batch_size must equal n_candidates (> 0)");
        }
        if !(0.0..1.0).contains(&self.xi) {
            return config_err("xi must lie in [0, 1)");
        }
        if self.refit_every == 0 {
            return config_err("refit_every must be at least 1");
        }
        Ok(())
    }

    pub fn n_init_for(&self, d: usize) -> usize {
        self.n_init.unwrap_or(2 * d)
    }
}

/// Where a trace record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Initial,
    /// Copied from another run without evaluation.
    Copied,
    Search,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Initial => "initial",
            Phase::Copied => "copied",
            Phase::Search => "search",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// 0 for initial and copied points, then 1, 2, ... for search steps.
    pub iteration: usize,
    pub phase: Phase,
    pub region: Option<usize>,
    /// Raw decision coordinates.
    pub point: Vec<f64>,
    pub value: f64,
    pub best_value: f64,
    /// Record index of the best point so far.
    pub best_index: usize,
}

/// Every evaluated (or copied) point of a run, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub bounds: Vec<[f64; 2]>,
    pub records: Vec<TraceRecord>,
    /// Set when the run stopped on an error; the records are still valid.
    pub aborted: Option<String>,
}

impl RunTrace {
    pub fn new(bounds: Vec<[f64; 2]>) -> Self {
        Self {
            bounds,
            records: Vec::new(),
            aborted: None,
        }
    }

    pub fn push(&mut self, iteration: usize, phase: Phase, region: Option<usize>, point: Vec<f64>, value: f64) {
        let (best_value, best_index) = match self.records.last() {
            Some(last) if last.best_value >= value => (last.best_value, last.best_index),
            _ => (value, self.records.len()),
        };
        self.records.push(TraceRecord {
            iteration,
            phase,
            region,
            point,
            value,
            best_value,
            best_index,
        });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn best(&self) -> Option<&TraceRecord> {
        self.records.last().map(|r| &self.records[r.best_index])
    }

    pub fn best_value(&self) -> f64 {
        self.records.last().map_or(f64::NEG_INFINITY, |r| r.best_value)
    }

    /// Best value among records that were actually evaluated.
    pub fn best_evaluated(&self) -> Option<&TraceRecord> {
        self.records
            .iter()
            .filter(|r| r.phase != Phase::Copied)
            .fold(None, |acc: Option<&TraceRecord>, r| match acc {
                Some(a) if a.value >= r.value => Some(a),
                _ => Some(r),
            })
    }

    pub fn n_evaluated(&self) -> usize {
        self.records.iter().filter(|r| r.phase != Phase::Copied).count()
    }

    pub fn n_search(&self) -> usize {
        self.records.iter().filter(|r| r.phase == Phase::Search).count()
    }

    /// All records as an observation set in unit coordinates.
    pub fn observations(&self) -> Result<ObservationSet> {
        let mut obs = ObservationSet::new(self.bounds.clone());
        for r in &self.records {
            obs.push_raw(&r.point, r.value)?;
        }
        Ok(obs)
    }

    /// `eval_index,iteration,phase,region,value,best_value,best_kpi,proposal_norm`,
    /// where `kpi` maps objective values to a reporting scale.
    pub fn write_csv<W: Write>(&self, w: W, kpi: impl Fn(f64) -> f64) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "eval_index",
            "iteration",
            "phase",
            "region",
            "value",
            "best_value",
            "best_kpi",
            "proposal_norm",
        ])?;
        for (i, r) in self.records.iter().enumerate() {
            let norm = r.point.iter().map(|v| v * v).sum::<f64>().sqrt();
            wtr.write_record([
                i.to_string(),
                r.iteration.to_string(),
                r.phase.as_str().to_string(),
                r.region.map_or_else(String::new, |g| g.to_string()),
                format!("{:.12}", r.value),
                format!("{:.12}", r.best_value),
                format!("{:.6}", kpi(r.best_value)),
                format!("{norm:.6}"),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Latin-hypercube design of `n` points in `[0,1]^d`.
pub fn initial_design(d: usize, n: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    for _ in 0..d {
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            perm.swap(i, j);
        }
        cols.push(
            perm.into_iter()
                .map(|p| (p as f64 + rng.random::<f64>()) / n as f64)
                .collect(),
        );
    }
    (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
}

/// Axis-aligned box in unit coordinates; coordinates with `lo == hi` are fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SearchBox {
    pub fn unit(d: usize) -> Self {
        Self {
            lower: vec![0.0; d],
            upper: vec![1.0; d],
        }
    }

    /// Everything fixed at `base` except coordinate `index`.
    pub fn coordinate(base: &[f64], index: usize) -> Self {
        let mut lower = base.to_vec();
        let mut upper = base.to_vec();
        lower[index] = 0.0;
        upper[index] = 1.0;
        Self { lower, upper }
    }

    pub fn sample(&self, n: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                self.lower
                    .iter()
                    .zip(&self.upper)
                    .map(|(&lo, &hi)| {
                        if hi > lo {
                            lo + (hi - lo) * rng.random::<f64>()
                        } else {
                            lo
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// EI scores of `candidates`, computed in `n_batches` chunks.
pub fn score_ei(model: &GpPosterior, candidates: &[Vec<f64>], f_star: Option<f64>, config: &BoConfig) -> Vec<f64> {
    let chunk = candidates.len().div_ceil(config.n_batches.max(1)).max(1);
    let stats: Vec<(Vec<f64>, Vec<f64>)> = candidates.par_chunks(chunk).map(|c| model.posterior_batch(c)).collect();
    let mu: Vec<f64> = stats.iter().flat_map(|s| s.0.iter().copied()).collect();
    let var: Vec<f64> = stats.iter().flat_map(|s| s.1.iter().copied()).collect();
    let f_star = match (config.incumbent, f_star) {
        (Incumbent::Observed, Some(f)) => f,
        _ => mu.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    mu.iter()
        .zip(&var)
        .map(|(&m, &v)| expected_improvement_form(m, v.sqrt(), f_star, config.xi, config.ei_form))
        .collect()
}

/// Index of the largest score, lowest index on ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Draw `n_candidates` points in `search_box` and return the EI maximizer.
pub fn propose_by_ei(
    model: &GpPosterior,
    search_box: &SearchBox,
    f_star: f64,
    config: &BoConfig,
    rng: &mut Rng,
) -> Vec<f64> {
    let candidates = search_box.sample(config.n_candidates, rng);
    let scores = score_ei(model, &candidates, Some(f_star), config);
    candidates[argmax(&scores)].clone()
}

/// Model refresh policy shared by the optimizers.
#[derive(Debug, Clone)]
pub(crate) struct ModelCache {
    pub hyper: Option<GpHyperparams>,
    pub fits: usize,
    pub refit_every: usize,
    pub seed: u64,
    pub lengthscale_prior: Option<[f64; 2]>,
}

impl ModelCache {
    pub fn new(refit_every: usize, seed: u64, lengthscale_prior: Option<[f64; 2]>) -> Self {
        Self {
            hyper: None,
            fits: 0,
            refit_every: refit_every.max(1),
            seed,
            lengthscale_prior,
        }
    }

    pub fn model(&mut self, obs: &ObservationSet) -> Result<GpPosterior> {
        let refit = self.hyper.is_none() || self.fits % self.refit_every == 0;
        self.fits += 1;
        if refit {
            let opts = FitOptions {
                lengthscale_prior: self.lengthscale_prior,
                ..FitOptions::quick(self.hyper.clone(), self.seed.wrapping_add(self.fits as u64))
            };
            self.hyper = Some(crate::gp::fit(obs, &opts)?);
        }
        let mut h = self.hyper.clone().expect("fitted above");

        if !refit {
            // keep the kernel, track the data mean
            h.mean_const = obs.values.iter().sum::<f64>() / obs.len() as f64;
        }
        GpPosterior::new(&obs.points, &obs.values, h)
    }
}

fn check_bounds(bounds: &[[f64; 2]]) -> Result<()> {
    if bounds.is_empty() {
        return config_err("empty search box");
    }
    if bounds.iter().any(|b| !(b[1] > b[0])) {
        return config_err("every bound needs lo < hi");
    }
    Ok(())
}

fn evaluate_initial(
    eval: &EvalFn,
    obs: &mut ObservationSet,
    trace: &mut RunTrace,
    points: Vec<Vec<f64>>,
) -> Result<()> {
    let raws: Vec<Vec<f64>> = points.iter().map(|u| obs.from_unit(u)).collect();
    let values: Vec<Result<f64>> = raws.par_iter().map(|x| eval(x)).collect();
    for ((u, x), v) in points.into_iter().zip(raws).zip(values) {
        let v = v?;
        obs.push(u, v)?;
        trace.push(0, Phase::Initial, None, x, v);
    }
    Ok(())
}

fn abort(mut trace: RunTrace, e: Error) -> RunTrace {
    trace.aborted = Some(e.to_string());
    trace
}

/// Standard BO over the full box.
pub fn run_vanilla_bo(eval: &EvalFn, bounds: &[[f64; 2]], config: &BoConfig) -> Result<RunTrace> {
    check_bounds(bounds)?;
    config.validate()?;
    let d = bounds.len();
    let mut trace = RunTrace::new(bounds.to_vec());
    let mut obs = ObservationSet::new(bounds.to_vec());
    let mut rng = rng::stream(config.seed, rng::STREAM_INIT_DESIGN);
    let design = initial_design(d, config.n_init_for(d), &mut rng);
    if let Err(e) = evaluate_initial(eval, &mut obs, &mut trace, design) {
        return Ok(abort(trace, e));
    }
    let mut rng = rng::stream(config.seed, rng::STREAM_OPTIMIZER);
    let mut cache = ModelCache::new(config.refit_every, config.seed, config.lengthscale_prior);
    let sbox = SearchBox::unit(d);
    for n in 1..=config.max_iters {
        let mut step = || -> Result<(Vec<f64>, Vec<f64>, f64)> {
            let model = if obs.len() >= 2 { Some(cache.model(&obs)?) } else { None };
            let u = match &model {
                Some(m) => propose_by_ei(m, &sbox, trace.best_value(), config, &mut rng),
                None => sbox.sample(1, &mut rng).pop().expect("one sample"),
            };
            let x = obs.from_unit(&u);
            let v = eval(&x)?;
            Ok((u, x, v))
        };
        match step() {
            Ok((u, x, v)) => {
                obs.push(u, v)?;
                trace.push(n, Phase::Search, None, x, v);
            }
            Err(e) => return Ok(abort(trace, e)),
        }
    }
    Ok(trace)
}

/// Coordinate index swept at iteration `n` (1-based) over `n_coords` cells;
/// also 1-based.
pub fn cycle_index(n: usize, n_coords: usize) -> usize {
    (n - 1) % n_coords + 1
}

/// Iterative BO: starting from `x0`, iteration `n` re-chooses coordinate
/// [`cycle_index`]`(n)` by a one-dimensional EI sweep of a global GP through
/// the base point (see [`StepBase`]), and stops after `ell_max` full sweeps
/// without a better best-observed value or after `max_iters` iterations.
pub fn run_iterative_bo(eval: &EvalFn, bounds: &[[f64; 2]], x0: &[f64], config: &BoConfig) -> Result<RunTrace> {
    check_bounds(bounds)?;
    config.validate()?;
    let d = bounds.len();
    if x0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x0.len(),
        });
    }
    let mut trace = RunTrace::new(bounds.to_vec());
    let mut obs = ObservationSet::new(bounds.to_vec());
    let mut current = obs.to_unit(x0)?;
    let mut rng = rng::stream(config.seed, rng::STREAM_INIT_DESIGN);
    let design = initial_design(d, config.n_init_for(d), &mut rng);
    if let Err(e) = evaluate_initial(eval, &mut obs, &mut trace, design) {
        return Ok(abort(trace, e));
    }
    let mut rng = rng::stream(config.seed, rng::STREAM_OPTIMIZER);
    let mut cache = ModelCache::new(config.refit_every, config.seed, config.lengthscale_prior);
    // best value along the coordinate path; the initial design is not on it
    let mut path_best = f64::NEG_INFINITY;
    let mut sweep_best = f64::NEG_INFINITY;
    let mut best_at_sweep_end = f64::NEG_INFINITY;
    let mut stale = 0;
    for n in 1..=config.max_iters {
        let b = cycle_index(n, d) - 1;
        let sbox = SearchBox::coordinate(&current, b);
        let mut step = || -> Result<(Vec<f64>, Vec<f64>, f64)> {
            let u = if obs.len() >= 2 {
                let model = cache.model(&obs)?;
                propose_by_ei(&model, &sbox, trace.best_value(), config, &mut rng)
            } else {
                sbox.sample(1, &mut rng).pop().expect("one sample")
            };
            let x = obs.from_unit(&u);
            let v = eval(&x)?;
            Ok((u, x, v))
        };
        match step() {
            Ok((u, x, v)) => {
                let accept = match config.step_from {
                    StepBase::Best => v > path_best,
                    StepBase::Last => true,
                };
                if accept {
                    current = u.clone();
                }
                path_best = path_best.max(v);
                obs.push(u, v)?;
                trace.push(n, Phase::Search, None, x, v);
                sweep_best = sweep_best.max(v);
            }
            Err(e) => return Ok(abort(trace, e)),
        }
        if b == d - 1 {
            if sweep_best > best_at_sweep_end {
                best_at_sweep_end = sweep_best;
                stale = 0;
            } else {
                stale += 1;
                if stale >= config.ell_max {
                    break;
                }
            }
        }
    }
    Ok(trace)
}
