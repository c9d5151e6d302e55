//! Trust-region BO: several local GP models, each confined to a box around
//! its best point, with Thompson sampling deciding which region gets the
//! next evaluations.

use std::io::Write;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bo::{initial_design, EvalFn, ModelCache, Phase, RunTrace};
use crate::error::{config_err, Error, Result};
use crate::gp::{GpPosterior, ObservationSet};
use crate::rng::{self, Rng};

/// Candidates of one region and `q` Thompson draws over them.
type Proposals = (Vec<Vec<f64>>, Vec<Vec<f64>>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TurboConfig {
    pub n_regions: usize,
    pub batch_q: usize,
    pub tau_succ: usize,
    pub tau_fail: usize,
    pub l_init: f64,
    pub l_min: f64,
    pub l_max: f64,
    /// Thompson candidates per region and step.
    pub n_candidates: usize,
    /// Initial points per region; `None` means twice the dimension.
    pub n_init: Option<usize>,
    /// Search evaluations after the initial design.
    pub max_evals: usize,
    pub seed: u64,
    /// A region refits its hyperparameters every this many model updates.
    pub refit_every: usize,
}

impl Default for TurboConfig {
    fn default() -> Self {
        Self {
            n_regions: 5,
            batch_q: 5,
            tau_succ: 3,
            tau_fail: 15,
            l_init: 0.8,
            l_min: 0.5f64.powi(7),
            l_max: 1.6,
            n_candidates: 256,
            n_init: None,
            max_evals: 550,
            seed: 0,
            refit_every: 1,
        }
    }
}

impl TurboConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.l_min && self.l_min < self.l_init && self.l_init <= self.l_max) {
            return config_err("need 0 < l_min < l_init <= l_max");
        }
        if self.n_regions == 0 || self.batch_q == 0 || self.n_candidates == 0 {
            return config_err("n_regions, batch_q and n_candidates must be positive");
        }
        if self.tau_succ == 0 || self.tau_fail == 0 || self.refit_every == 0 {
            return config_err("tau_succ, tau_fail and refit_every must be positive");
        }
        if self.n_init == Some(0) || self.n_init == Some(1) {
            return config_err("each region needs at least two initial points");
        }
        Ok(())
    }

    pub fn n_init_for(&self, d: usize) -> usize {
        self.n_init.unwrap_or(2 * d).max(2)
    }
}

/// Per-dimension side lengths `λ_i L / (∏ λ_j)^(1/d)`; their product is `L^d`.
pub fn tr_side_lengths(length: f64, lengthscales: &[f64]) -> Vec<f64> {
    let d = lengthscales.len() as f64;
    let log_gm = lengthscales.iter().map(|l| l.ln()).sum::<f64>() / d;
    lengthscales.iter().map(|l| length * (l.ln() - log_gm).exp()).collect()
}

/// Probability that a candidate coordinate is perturbed away from the center.
pub fn perturbation_prob(d: usize) -> f64 {
    (20.0 / d as f64).min(1.0)
}

/// What an update did to a region's size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionEvent {
    Unchanged,
    Expanded,
    Shrunk,
    /// Length fell below the minimum; the region must be restarted.
    Exhausted,
}

#[derive(Debug, Clone)]
pub struct TrustRegionState {
    pub id: usize,
    pub center: Vec<f64>,
    pub center_value: f64,
    pub length: f64,
    pub succ_count: usize,
    pub fail_count: usize,
    pub local_obs: ObservationSet,
    pub model: Option<GpPosterior>,
    pub alive: bool,
    pub restarts: usize,
    cache: ModelCache,
    stale: bool,
}

impl TrustRegionState {
    /// Region around the best point of `local_obs` (which must be non-empty).
    pub fn new(id: usize, local_obs: ObservationSet, length: f64, refit_every: usize, seed: u64) -> Result<Self> {
        let (best, value) = local_obs
            .best()
            .ok_or_else(|| Error::Config("trust region needs at least one observation".into()))?;
        Ok(Self {
            id,
            center: local_obs.points[best].clone(),
            center_value: value,
            length,
            succ_count: 0,
            fail_count: 0,
            local_obs,
            model: None,
            alive: true,
            restarts: 0,
            cache: ModelCache::new(refit_every, seed, None),
            stale: true,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Side lengths from the current model, or the plain length before one exists.
    pub fn side_lengths(&self) -> Vec<f64> {
        match &self.model {
            Some(m) => tr_side_lengths(self.length, &m.hyper.lengthscales),
            None => vec![self.length; self.dim()],
        }
    }

    /// `center ± L_i/2`, clipped to the unit cube.
    pub fn box_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let sides = self.side_lengths();
        let lo = self
            .center
            .iter()
            .zip(&sides)
            .map(|(c, s)| (c - s / 2.0).max(0.0))
            .collect();
        let hi = self
            .center
            .iter()
            .zip(&sides)
            .map(|(c, s)| (c + s / 2.0).min(1.0))
            .collect();
        (lo, hi)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let (lo, hi) = self.box_bounds();
        x.iter()
            .zip(lo.iter().zip(&hi))
            .all(|(v, (l, h))| *v >= *l - 1e-12 && *v <= *h + 1e-12)
    }

    fn add(&mut self, u: Vec<f64>, value: f64) -> Result<()> {
        self.local_obs.push(u, value)?;
        self.stale = true;
        let (best, v) = self.local_obs.best().expect("just pushed");
        self.center = self.local_obs.points[best].clone();
        self.center_value = v;
        Ok(())
    }

    fn refresh_model(&mut self) -> Result<()> {
        if self.stale && self.local_obs.len() >= 2 {
            self.model = Some(self.cache.model(&self.local_obs)?);
            self.stale = false;
        }
        Ok(())
    }
}

/// Success/failure bookkeeping after a batch from this region was evaluated.
pub fn update_region(tr: &mut TrustRegionState, batch_improved: bool, config: &TurboConfig) -> RegionEvent {
    let mut event = RegionEvent::Unchanged;
    if batch_improved {
        tr.succ_count += 1;
        tr.fail_count = 0;
        if tr.succ_count >= config.tau_succ {
            tr.length = (2.0 * tr.length).min(config.l_max);
            tr.succ_count = 0;
            event = RegionEvent::Expanded;
        }
    } else {
        tr.fail_count += 1;
        tr.succ_count = 0;
        if tr.fail_count >= config.tau_fail {
            tr.length /= 2.0;
            tr.fail_count = 0;
            event = RegionEvent::Shrunk;
        }
    }
    if tr.length < config.l_min {
        tr.alive = false;
        event = RegionEvent::Exhausted;
    }
    event
}

/// `n` candidates in the region's box. Each coordinate is redrawn uniformly
/// in the box with probability [`perturbation_prob`], otherwise copied from
/// the center; at least one coordinate always moves.
pub fn gen_candidates(tr: &TrustRegionState, n: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let d = tr.dim();
    let (lo, hi) = tr.box_bounds();
    let p = perturbation_prob(d);
    (0..n)
        .map(|_| {
            let mut mask: Vec<bool> = (0..d).map(|_| rng.random::<f64>() < p).collect();
            if !mask.iter().any(|&m| m) {
                mask[rng.random_range(0..d)] = true;
            }
            (0..d)
                .map(|i| {
                    if mask[i] {
                        lo[i] + (hi[i] - lo[i]) * rng.random::<f64>()
                    } else {
                        tr.center[i]
                    }
                })
                .collect()
        })
        .collect()
}

/// State of one region after one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDiagnostic {
    pub step: usize,
    pub region: usize,
    pub length: f64,
    pub best_value: f64,
    pub n_local: usize,
    pub restarts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurboOutcome {
    pub trace: RunTrace,
    pub diagnostics: Vec<RegionDiagnostic>,
}

impl TurboOutcome {
    pub fn write_diagnostics_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["step", "region", "length", "best_value", "n_local", "restarts"])?;
        for r in &self.diagnostics {
            wtr.write_record([
                r.step.to_string(),
                r.region.to_string(),
                format!("{:.8}", r.length),
                format!("{:.12}", r.best_value),
                r.n_local.to_string(),
                r.restarts.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn eval_points(eval: &EvalFn, obs: &ObservationSet, points: &[Vec<f64>]) -> Vec<(Vec<f64>, Result<f64>)> {
    points
        .par_iter()
        .map(|u| {
            let x = obs.from_unit(u);
            let v = eval(&x);
            (x, v)
        })
        .collect()
}

/// TuRBO from a fresh Latin-hypercube design of `n_regions · n_init`
/// points, dealt round-robin to the regions.
pub fn run_turbo(eval: &EvalFn, bounds: &[[f64; 2]], config: &TurboConfig) -> Result<TurboOutcome> {
    config.validate()?;
    let d = bounds.len();
    if d == 0 {
        return config_err("empty search box");
    }
    let n = config.n_init_for(d) * config.n_regions;
    let design = initial_design(d, n, &mut rng::stream(config.seed, rng::STREAM_INIT_DESIGN));
    let scratch = ObservationSet::new(bounds.to_vec());
    let mut trace = RunTrace::new(bounds.to_vec());
    for (i, (x, v)) in eval_points(eval, &scratch, &design).into_iter().enumerate() {
        match v {
            Ok(v) => trace.push(0, Phase::Initial, Some(i % config.n_regions), x, v),
            Err(e) => {
                trace.aborted = Some(e.to_string());
                return Ok(TurboOutcome {
                    trace,
                    diagnostics: Vec::new(),
                });
            }
        }
    }
    run_turbo_from(eval, config, trace)
}

/// TuRBO continuing from `initial`, whose records seed the regions: a record
/// with a region tag goes to that region, untagged records are dealt
/// round-robin. Copied records keep their phase.
pub fn run_turbo_from(eval: &EvalFn, config: &TurboConfig, initial: RunTrace) -> Result<TurboOutcome> {
    config.validate()?;
    let bounds = initial.bounds.clone();
    let m = config.n_regions;
    let mut trace = initial;
    if trace.aborted.is_some() {
        return Ok(TurboOutcome {
            trace,
            diagnostics: Vec::new(),
        });
    }
    let mut per_region: Vec<ObservationSet> = vec![ObservationSet::new(bounds.clone()); m];
    let mut untagged = 0;
    for rec in &mut trace.records {
        let g = match rec.region {
            Some(g) if g < m => g,
            _ => {
                untagged += 1;
                (untagged - 1) % m
            }
        };
        rec.region = Some(g);
        per_region[g].push_raw(&rec.point, rec.value)?;
    }
    let mut regions = Vec::with_capacity(m);
    for (g, obs) in per_region.into_iter().enumerate() {
        if obs.is_empty() {
            return config_err(format!("region {g} has no initial points"));
        }
        regions.push(TrustRegionState::new(
            g,
            obs,
            config.l_init,
            config.refit_every,
            rng::substream(config.seed, rng::STREAM_GP_FIT, g as u64).random(),
        )?);
    }

    let mut diagnostics = Vec::new();
    let mut step = 0usize;
    while trace.n_search() < config.max_evals {
        step += 1;
        let q = config.batch_q.min(config.max_evals - trace.n_search());
        let fitted: Vec<Result<()>> = regions.par_iter_mut().map(|tr| tr.refresh_model()).collect();
        if let Some(e) = fitted.into_iter().find_map(|r| r.err()) {
            trace.aborted = Some(e.to_string());
            break;
        }

        // Thompson samples per region: q joint draws over its candidates.
        let proposals: Vec<Result<Proposals>> = regions
            .par_iter()
            .map(|tr| {
                let mut r = rng::substream(config.seed, rng::STREAM_OPTIMIZER, (step * m + tr.id) as u64);
                let cands = gen_candidates(tr, config.n_candidates, &mut r);
                let draws = match &tr.model {
                    Some(model) => model.sample_paths(&cands, q, &mut r)?,
                    None => (0..q)
                        .map(|_| (0..cands.len()).map(|_| r.random::<f64>()).collect())
                        .collect(),
                };
                Ok((cands, draws))
            })
            .collect();
        let mut props = Vec::with_capacity(m);
        for p in proposals {
            match p {
                Ok(p) => props.push(p),
                Err(e) => {
                    trace.aborted = Some(e.to_string());
                    return Ok(TurboOutcome { trace, diagnostics });
                }
            }
        }

        // slot j takes the best unused candidate under draw j across all regions
        let mut taken: Vec<Vec<bool>> = props.iter().map(|(c, _)| vec![false; c.len()]).collect();
        let mut chosen: Vec<(usize, usize)> = Vec::with_capacity(q);
        for j in 0..q {
            let mut best: Option<(f64, usize, usize)> = None;
            for (g, (_, draws)) in props.iter().enumerate() {
                for (i, &s) in draws[j].iter().enumerate() {
                    if !taken[g][i] && best.is_none_or(|b| s > b.0) {
                        best = Some((s, g, i));
                    }
                }
            }
            if let Some((_, g, i)) = best {
                taken[g][i] = true;
                chosen.push((g, i));
            }
        }

        let points: Vec<Vec<f64>> = chosen.iter().map(|&(g, i)| props[g].0[i].clone()).collect();
        let results = eval_points(eval, &regions[0].local_obs, &points);
        let prev_best: Vec<f64> = regions.iter().map(|tr| tr.center_value).collect();
        let mut batch_best: Vec<Option<f64>> = vec![None; m];
        let mut failed = None;
        for ((&(g, _), u), (x, v)) in chosen.iter().zip(points).zip(results) {
            match v {
                Ok(v) => {
                    let it = trace.n_search() + 1;
                    trace.push(it, Phase::Search, Some(g), x, v);
                    batch_best[g] = Some(batch_best[g].map_or(v, |b: f64| b.max(v)));
                    regions[g].add(u, v)?;
                }
                Err(e) => {
                    failed.get_or_insert(e);
                }
            }
        }
        if let Some(e) = failed {
            trace.aborted = Some(e.to_string());
            break;
        }

        for g in 0..m {
            let Some(bb) = batch_best[g] else { continue };
            let event = update_region(&mut regions[g], bb > prev_best[g], config);
            if event == RegionEvent::Exhausted {
                if let Err(e) = restart_region(eval, &mut regions[g], config, step, &mut trace) {
                    trace.aborted = Some(e.to_string());
                    return Ok(TurboOutcome { trace, diagnostics });
                }
            }
        }
        for tr in &regions {
            diagnostics.push(RegionDiagnostic {
                step,
                region: tr.id,
                length: tr.length,
                best_value: tr.center_value,
                n_local: tr.local_obs.len(),
                restarts: tr.restarts,
            });
        }
    }
    Ok(TurboOutcome { trace, diagnostics })
}

fn restart_region(
    eval: &EvalFn,
    tr: &mut TrustRegionState,
    config: &TurboConfig,
    step: usize,
    trace: &mut RunTrace,
) -> Result<()> {
    let d = tr.dim();
    let mut r = rng::substream(
        config.seed,
        rng::STREAM_RESTART,
        (step * config.n_regions + tr.id) as u64,
    );
    let design = initial_design(d, config.n_init_for(d), &mut r);
    let mut obs = ObservationSet::new(tr.local_obs.bounds.clone());
    for (u, (x, v)) in design.iter().zip(eval_points(eval, &obs.clone(), &design)) {
        let v = v?;
        trace.push(0, Phase::Initial, Some(tr.id), x, v);
        obs.push(u.clone(), v)?;
    }
    let restarts = tr.restarts + 1;
    *tr = TrustRegionState::new(tr.id, obs, config.l_init, config.refit_every, r.random())?;
    tr.restarts = restarts;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region(center: Vec<f64>, length: f64) -> TrustRegionState {
        let mut obs = ObservationSet::unit(center.len());
        obs.push(center, 1.0).unwrap();
        TrustRegionState::new(0, obs, length, 1, 0).unwrap()
    }

    #[test]
    fn side_lengths_hand_values() {
        let s = tr_side_lengths(0.8, &[1.0, 4.0]);
        assert!((s[0] - 0.4).abs() < 1e-12 && (s[1] - 1.6).abs() < 1e-12);
        assert_eq!(tr_side_lengths(0.5, &[0.3; 4]), vec![0.5; 4]);
    }

    #[test]
    fn grow_shrink_restart() {
        let cfg = TurboConfig::default();
        let mut tr = region(vec![0.5; 3], 0.8);
        for _ in 0..2 {
            assert_eq!(update_region(&mut tr, true, &cfg), RegionEvent::Unchanged);
        }
        assert_eq!(update_region(&mut tr, true, &cfg), RegionEvent::Expanded);
        assert_eq!(tr.length, 1.6);
        for _ in 0..3 {
            update_region(&mut tr, true, &cfg);
        }
        assert_eq!(tr.length, 1.6);

        let mut tr = region(vec![0.5; 3], 0.8);
        for k in 0..15 {
            let e = update_region(&mut tr, false, &cfg);
            assert_eq!(e == RegionEvent::Shrunk, k == 14);
        }
        assert_eq!(tr.length, 0.4);
        let mut events = Vec::new();
        while tr.alive {
            events.push(update_region(&mut tr, false, &cfg));
        }
        assert_eq!(events.last(), Some(&RegionEvent::Exhausted));
        assert!(tr.length < cfg.l_min);
    }

    #[test]
    fn one_streak_counter_nonzero() {
        let cfg = TurboConfig::default();
        let mut tr = region(vec![0.5; 2], 0.8);
        for k in 0..40 {
            update_region(&mut tr, k % 3 == 0 || k % 7 == 0, &cfg);
            assert!(tr.succ_count == 0 || tr.fail_count == 0);
        }
    }

    #[test]
    fn candidates_stay_in_box() {
        let mut r = rng::stream(5, 0);
        for center in [vec![0.0; 30], vec![1.0; 30], vec![0.3; 30]] {
            let tr = region(center, 0.4);
            let (lo, hi) = tr.box_bounds();
            for c in gen_candidates(&tr, 200, &mut r) {
                for i in 0..30 {
                    assert!(c[i] >= lo[i] && c[i] <= hi[i] && (0.0..=1.0).contains(&c[i]));
                }
                assert!(c.iter().zip(&tr.center).any(|(a, b)| a != b));
            }
        }
    }

    #[test]
    fn one_dimension_always_perturbs() {
        assert_eq!(perturbation_prob(1), 1.0);
        assert_eq!(perturbation_prob(40), 0.5);
        let tr = region(vec![0.5], 0.2);
        let c = gen_candidates(&tr, 50, &mut rng::stream(1, 0));
        assert!(c.iter().all(|p| p[0] != 0.5 && (0.4..=0.6).contains(&p[0])));
    }

    #[test]
    fn config_validation() {
        assert!(TurboConfig::default().validate().is_ok());
        let bad = TurboConfig {
            l_min: 1.0,
            ..TurboConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
