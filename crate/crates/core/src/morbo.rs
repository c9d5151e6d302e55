//! Two-objective trust-region BO over (GUE sum-log-rate, UAV coverage):
//! Pareto bookkeeping, exact 2-d hypervolume, and the optimizer.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bo::{initial_design, ModelCache, Phase};
use crate::error::{config_err, Error, Result};
use crate::gp::{GpPosterior, ObservationSet};
use crate::rng;
use crate::turbo::{gen_candidates, update_region, RegionEvent, TrustRegionState, TurboConfig};

/// Candidates of one region with one sampled objective pair each.
type RegionSamples = (Vec<Vec<f64>>, Vec<[f64; 2]>);

/// Both objectives, larger is better.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    /// Sum of log GUE rates.
    pub gue_obj: f64,
    /// Fraction of UAVs above the outage threshold.
    pub uav_cov: f64,
}

impl ObjectiveVector {
    pub fn new(gue_obj: f64, uav_cov: f64) -> Self {
        Self { gue_obj, uav_cov }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.gue_obj, self.uav_cov]
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gue_obj.is_finite() || !(0.0..=1.0).contains(&self.uav_cov) {
            return Err(Error::Evaluation(format!("invalid objective vector {self:?}")));
        }
        Ok(())
    }
}

pub type EvalFn2<'a> = dyn Fn(&[f64]) -> Result<ObjectiveVector> + Sync + 'a;

/// `a` is at least as good everywhere and strictly better somewhere.
pub fn dominates(a: &[f64; 2], b: &[f64; 2]) -> bool {
    a[0] >= b[0] && a[1] >= b[1] && (a[0] > b[0] || a[1] > b[1])
}

/// Indices of the nondominated points, ordered by first objective
/// descending (then by index). Exact duplicates are all kept.
pub fn pareto_front(points: &[[f64; 2]]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    // first objective descending, second descending, index ascending
    order.sort_by(|&a, &b| {
        points[b][0]
            .total_cmp(&points[a][0])
            .then(points[b][1].total_cmp(&points[a][1]))
            .then(a.cmp(&b))
    });
    let mut front: Vec<usize> = Vec::new();
    let mut best_second = f64::NEG_INFINITY;
    let mut last: Option<[f64; 2]> = None;
    for i in order {
        let p = points[i];
        if last == Some(p) {
            front.push(i);
            continue;
        }
        if p[1] > best_second {
            front.push(i);
            best_second = p[1];
            last = Some(p);
        }
    }
    front
}

/// Area dominated by `front` and bounded below by `reference`. Points that
/// do not strictly exceed the reference in both objectives add nothing.
pub fn hypervolume_2d(front: &[[f64; 2]], reference: [f64; 2]) -> f64 {
    let mut pts: Vec<[f64; 2]> = front
        .iter()
        .copied()
        .filter(|p| p[0] > reference[0] && p[1] > reference[1])
        .collect();
    pts.sort_by(|a, b| b[0].total_cmp(&a[0]).then(b[1].total_cmp(&a[1])));
    let mut area = 0.0;
    let mut y_prev = reference[1];
    for p in pts {
        if p[1] > y_prev {
            area += (p[0] - reference[0]) * (p[1] - y_prev);
            y_prev = p[1];
        }
    }
    area
}

/// `hv(front) − hv(front without entry index)`.
pub fn hv_contribution(index: usize, front: &[[f64; 2]], reference: [f64; 2]) -> f64 {
    let rest: Vec<[f64; 2]> = front
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != index)
        .map(|(_, p)| *p)
        .collect();
    (hypervolume_2d(front, reference) - hypervolume_2d(&rest, reference)).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    /// Raw decision coordinates.
    pub point: Vec<f64>,
    pub objectives: ObjectiveVector,
    /// Observation index in the run.
    pub obs_index: usize,
    pub region: Option<usize>,
}

/// Mutually nondominated evaluated points and their hypervolume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    pub entries: Vec<ArchiveEntry>,
    pub reference: ObjectiveVector,
    pub hv: f64,
}

impl ParetoArchive {
    pub fn new(reference: ObjectiveVector) -> Self {
        Self {
            entries: Vec::new(),
            reference,
            hv: 0.0,
        }
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        self.entries.iter().map(|e| e.objectives.as_array()).collect()
    }

    /// Add an entry if nothing in the archive dominates or equals it; drop
    /// entries it dominates. Returns whether it was added.
    pub fn insert(&mut self, entry: ArchiveEntry) -> bool {
        let p = entry.objectives.as_array();
        if self
            .entries
            .iter()
            .any(|e| dominates(&e.objectives.as_array(), &p) || e.objectives.as_array() == p)
        {
            return false;
        }
        self.entries.retain(|e| !dominates(&p, &e.objectives.as_array()));
        self.entries.push(entry);
        self.entries.sort_by(|a, b| {
            b.objectives
                .gue_obj
                .total_cmp(&a.objectives.gue_obj)
                .then(a.obs_index.cmp(&b.obs_index))
        });
        self.hv = hypervolume_2d(&self.points(), self.reference.as_array());
        true
    }

    pub fn contributions(&self) -> Vec<f64> {
        let pts = self.points();
        (0..pts.len())
            .map(|i| hv_contribution(i, &pts, self.reference.as_array()))
            .collect()
    }

    /// Hypervolume gained by adding `extra` points to the archive.
    pub fn improvement(&self, extra: &[[f64; 2]]) -> f64 {
        let mut pts = self.points();
        pts.extend_from_slice(extra);
        hypervolume_2d(&pts, self.reference.as_array()) - self.hv
    }

    /// Best GUE objective among entries with coverage at least `coverage`.
    pub fn best_gue_at_coverage(&self, coverage: f64) -> Option<f64> {
        self.entries
            .iter()
            .filter(|e| e.objectives.uav_cov >= coverage)
            .map(|e| e.objectives.gue_obj)
            .reduce(f64::max)
    }

    /// Best coverage among entries with GUE objective at least `gue_obj`.
    pub fn best_coverage_at_gue(&self, gue_obj: f64) -> Option<f64> {
        self.entries
            .iter()
            .filter(|e| e.objectives.gue_obj >= gue_obj)
            .map(|e| e.objectives.uav_cov)
            .reduce(f64::max)
    }

    /// `gue_geo_mean_mbps,uav_coverage,gue_objective,decision_hash`, where
    /// the geo-mean is `exp(gue_obj / n_gue)`.
    pub fn write_csv<W: Write>(&self, w: W, n_gue: usize) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["gue_geo_mean_mbps", "uav_coverage", "gue_objective", "decision_hash"])?;
        for e in &self.entries {
            wtr.write_record([
                format!("{:.6}", (e.objectives.gue_obj / n_gue as f64).exp() / 1e6),
                format!("{:.6}", e.objectives.uav_cov),
                format!("{:.9}", e.objectives.gue_obj),
                decision_hash(&e.point),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Short hex digest of a decision's coordinates.
pub fn decision_hash(point: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in point {
        h.update(v.to_le_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MorboConfig {
    /// Region sizes and counters; only `n_regions`, `batch_q`, `tau_*`,
    /// `l_*`, `n_candidates`, `refit_every` and `seed` are used.
    pub trust: TurboConfig,
    /// Shared initial design size; `None` means twice the dimension.
    pub n_init: Option<usize>,
    pub max_evals: usize,
    /// Local models use the observations inside the region, topped up with
    /// the nearest ones to at least this many (`None`: twice the dimension).
    pub min_local: Option<usize>,
    /// At most this many observations per local model, nearest first.
    pub max_local: usize,
}

impl Default for MorboConfig {
    fn default() -> Self {
        Self {
            trust: TurboConfig {
                l_min: 0.01,
                ..TurboConfig::default()
            },
            n_init: None,
            max_evals: 300,
            min_local: None,
            max_local: 300,
        }
    }
}

impl MorboConfig {
    pub fn validate(&self) -> Result<()> {
        self.trust.validate()?;
        if self.max_local < 2 {
            return config_err("max_local must be at least 2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorboRecord {
    pub iteration: usize,
    pub phase: Phase,
    pub region: Option<usize>,
    pub point: Vec<f64>,
    pub objectives: ObjectiveVector,
    /// Archive hypervolume after this record.
    pub hv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorboOutcome {
    pub archive: ParetoArchive,
    pub records: Vec<MorboRecord>,
    /// Hypervolume after the initial design and after every step.
    pub hv_history: Vec<f64>,
    pub aborted: Option<String>,
}

impl MorboOutcome {
    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "eval_index",
            "iteration",
            "phase",
            "region",
            "gue_objective",
            "uav_coverage",
            "hv",
        ])?;
        for (i, r) in self.records.iter().enumerate() {
            wtr.write_record([
                i.to_string(),
                r.iteration.to_string(),
                r.phase.as_str().to_string(),
                r.region.map_or_else(String::new, |g| g.to_string()),
                format!("{:.9}", r.objectives.gue_obj),
                format!("{:.6}", r.objectives.uav_cov),
                format!("{:.9}", r.hv),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

struct Shared {
    obs: ObservationSet,
    objectives: Vec<ObjectiveVector>,
    owner: Vec<usize>,
}

impl Shared {
    /// Local training set of a region: points in its box, topped up with
    /// the nearest points, capped at `max_local` nearest.
    fn local_indices(&self, tr: &TrustRegionState, min_local: usize, max_local: usize) -> Vec<usize> {
        let (lo, hi) = tr.box_bounds();
        let dist = |i: usize| -> f64 {
            self.obs.points[i]
                .iter()
                .zip(&tr.center)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        };
        let mut idx: Vec<usize> = (0..self.obs.len()).collect();
        idx.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)));
        let inside = |i: usize| {
            self.obs.points[i]
                .iter()
                .zip(lo.iter().zip(&hi))
                .all(|(v, (l, h))| v >= l && v <= h)
        };
        let n_inside = idx.iter().filter(|&&i| inside(i)).count();
        let keep = n_inside.max(min_local).min(max_local).min(idx.len());
        idx.truncate(keep);
        idx
    }
}

/// Centre for region `g`: the archive entry of largest hypervolume
/// contribution among those it collected, else the largest contribution not
/// already used by another region, else the largest overall.
fn pick_center(archive: &ParetoArchive, g: usize, owner: &[usize], taken: &[usize]) -> usize {
    let hvc = archive.contributions();
    let argmax = |filter: &dyn Fn(&ArchiveEntry) -> bool| -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, e) in archive.entries.iter().enumerate() {
            if filter(e) && best.is_none_or(|b| hvc[i] > hvc[b]) {
                best = Some(i);
            }
        }
        best
    };
    argmax(&|e: &ArchiveEntry| owner[e.obs_index] == g)
        .or_else(|| argmax(&|e: &ArchiveEntry| !taken.contains(&e.obs_index)))
        .or_else(|| argmax(&|_: &ArchiveEntry| true))
        .unwrap_or(0)
}

/// Additive epsilon of `s` against the archive, normalized by `scale`:
/// positive iff `s` would be nondominated. Used to rank candidates when no
/// sampled point improves the hypervolume.
fn epsilon_score(s: [f64; 2], archive: &[[f64; 2]], scale: [f64; 2]) -> f64 {
    archive
        .iter()
        .map(|a| ((s[0] - a[0]) / scale[0]).max((s[1] - a[1]) / scale[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Multi-objective trust-region BO with shared observations.
pub fn run_morbo(
    eval: &EvalFn2,
    bounds: &[[f64; 2]],
    reference: ObjectiveVector,
    config: &MorboConfig,
) -> Result<MorboOutcome> {
    config.validate()?;
    let d = bounds.len();
    if d == 0 {
        return config_err("empty search box");
    }
    let tc = &config.trust;
    let m = tc.n_regions;
    let min_local = config.min_local.unwrap_or(2 * d).max(2);
    let mut out = MorboOutcome {
        archive: ParetoArchive::new(reference),
        records: Vec::new(),
        hv_history: Vec::new(),
        aborted: None,
    };
    let mut shared = Shared {
        obs: ObservationSet::new(bounds.to_vec()),
        objectives: Vec::new(),
        owner: Vec::new(),
    };

    let n_init = config.n_init.unwrap_or(2 * d).max(2);
    let design = initial_design(d, n_init, &mut rng::stream(tc.seed, rng::STREAM_INIT_DESIGN));
    let results: Vec<(Vec<f64>, Result<ObjectiveVector>)> = design
        .par_iter()
        .map(|u| {
            let x = shared.obs.from_unit(u);
            let v = eval(&x).and_then(|v| v.validate().map(|_| v));
            (x, v)
        })
        .collect();
    for (i, (u, (x, v))) in design.into_iter().zip(results).enumerate() {
        let v = match v {
            Ok(v) => v,
            Err(e) => {
                out.aborted = Some(e.to_string());
                return Ok(out);
            }
        };
        record(&mut out, &mut shared, u, x, v, 0, Phase::Initial, i % m)?;
    }
    out.hv_history.push(out.archive.hv);

    // regions: centres on archive points, local data filled per step
    let mut regions: Vec<TrustRegionState> = Vec::with_capacity(m);
    let mut taken: Vec<usize> = Vec::new();
    for g in 0..m {
        let c = pick_center(&out.archive, g, &shared.owner, &taken);
        let entry = &out.archive.entries[c];
        taken.push(entry.obs_index);
        let mut obs = ObservationSet::new(bounds.to_vec());
        obs.push(shared.obs.points[entry.obs_index].clone(), 0.0)?;
        regions.push(TrustRegionState::new(g, obs, tc.l_init, tc.refit_every, g as u64)?);
    }
    let mut caches: Vec<[ModelCache; 2]> = (0..m)
        .map(|g| {
            let s = tc.seed.wrapping_add(1000 * g as u64);
            [
                ModelCache::new(tc.refit_every, s, None),
                ModelCache::new(tc.refit_every, s + 1, None),
            ]
        })
        .collect();

    let mut step = 0;
    let mut n_search = 0;
    while n_search < config.max_evals {
        step += 1;
        let q = tc.batch_q.min(config.max_evals - n_search);

        // local models, two objectives per region
        let fits: Vec<Result<[GpPosterior; 2]>> = regions
            .par_iter()
            .zip(caches.par_iter_mut())
            .map(|(tr, cache)| {
                let idx = shared.local_indices(tr, min_local, config.max_local);
                let mut models = Vec::with_capacity(2);
                for (k, c) in cache.iter_mut().enumerate() {
                    let mut o = shared.obs.select(&idx);
                    o.values = idx.iter().map(|&i| shared.objectives[i].as_array()[k]).collect();
                    models.push(c.model(&o)?);
                }
                let b = models.pop().expect("two models");
                let a = models.pop().expect("two models");
                Ok([a, b])
            })
            .collect();
        let mut models = Vec::with_capacity(m);
        for f in fits {
            match f {
                Ok(f) => models.push(f),
                Err(e) => {
                    out.aborted = Some(e.to_string());
                    return Ok(out);
                }
            }
        }
        for (tr, mo) in regions.iter_mut().zip(&models) {
            // side lengths follow the GUE-objective model's lengthscales
            tr.model = Some(mo[0].clone());
        }

        let samples: Vec<Result<RegionSamples>> = regions
            .par_iter()
            .zip(&models)
            .map(|(tr, mo)| {
                let mut r = rng::substream(tc.seed, rng::STREAM_OPTIMIZER, (step * m + tr.id) as u64);
                let cands = gen_candidates(tr, tc.n_candidates, &mut r);
                let s0 = mo[0].sample_joint(&cands, &mut r)?;
                let s1 = mo[1].sample_joint(&cands, &mut r)?;
                Ok((cands, s0.into_iter().zip(s1).map(|(a, b)| [a, b]).collect()))
            })
            .collect();
        let mut pool: Vec<(usize, Vec<f64>, [f64; 2])> = Vec::new();
        for s in samples.into_iter().enumerate() {
            match s {
                (g, Ok((cands, vals))) => pool.extend(cands.into_iter().zip(vals).map(|(c, v)| (g, c, v))),
                (_, Err(e)) => {
                    out.aborted = Some(e.to_string());
                    return Ok(out);
                }
            }
        }

        // greedy hypervolume improvement over the sampled values
        let arch = out.archive.points();
        let scale = objective_scale(&shared.objectives);
        let mut chosen: Vec<usize> = Vec::with_capacity(q);
        let mut picked: Vec<[f64; 2]> = Vec::new();
        for _ in 0..q {
            let base = out.archive.improvement(&picked);
            let mut best: Option<(f64, f64, usize)> = None;
            let mut all_pts = arch.clone();
            all_pts.extend_from_slice(&picked);
            for (i, (_, _, s)) in pool.iter().enumerate() {
                if chosen.contains(&i) {
                    continue;
                }
                let mut with = picked.clone();
                with.push(*s);
                let hvi = out.archive.improvement(&with) - base;
                let eps = epsilon_score(*s, &all_pts, scale);
                let key = (hvi, eps);
                if best.is_none_or(|b| key.0 > b.0 || (key.0 == b.0 && key.1 > b.1)) {
                    best = Some((key.0, key.1, i));
                }
            }
            if let Some((_, _, i)) = best {
                chosen.push(i);
                picked.push(pool[i].2);
            }
        }

        let batch: Vec<(usize, Vec<f64>)> = chosen.iter().map(|&i| (pool[i].0, pool[i].1.clone())).collect();
        let results: Vec<(Vec<f64>, Result<ObjectiveVector>)> = batch
            .par_iter()
            .map(|(_, u)| {
                let x = shared.obs.from_unit(u);
                let v = eval(&x).and_then(|v| v.validate().map(|_| v));
                (x, v)
            })
            .collect();
        let hv_before = out.archive.hv;
        let mut region_gain = vec![None; m];
        for ((g, u), (x, v)) in batch.into_iter().zip(results) {
            let v = match v {
                Ok(v) => v,
                Err(e) => {
                    out.aborted = Some(e.to_string());
                    return Ok(out);
                }
            };
            n_search += 1;
            let before = out.archive.hv;
            record(&mut out, &mut shared, u, x, v, n_search, Phase::Search, g)?;
            let gained = out.archive.hv > before;
            region_gain[g] = Some(region_gain[g].unwrap_or(false) || gained);
        }
        debug_assert!(out.archive.hv >= hv_before);
        out.hv_history.push(out.archive.hv);

        let mut taken: Vec<usize> = Vec::new();
        for g in 0..m {
            if let Some(improved) = region_gain[g] {
                if update_region(&mut regions[g], improved, tc) == RegionEvent::Exhausted {
                    regions[g].length = tc.l_init;
                    regions[g].alive = true;
                    regions[g].restarts += 1;
                    regions[g].succ_count = 0;
                    regions[g].fail_count = 0;
                    caches[g][0].hyper = None;
                    caches[g][1].hyper = None;
                }
            }
            let c = pick_center(&out.archive, g, &shared.owner, &taken);
            let idx = out.archive.entries[c].obs_index;
            taken.push(idx);
            regions[g].center = shared.obs.points[idx].clone();
        }
    }
    Ok(out)
}

fn objective_scale(objs: &[ObjectiveVector]) -> [f64; 2] {
    let mut s = [0.0; 2];
    for k in 0..2 {
        let (lo, hi) = objs
            .iter()
            .map(|o| o.as_array()[k])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        s[k] = if hi > lo { hi - lo } else { 1.0 };
    }
    s
}

#[allow(clippy::too_many_arguments)]
fn record(
    out: &mut MorboOutcome,
    shared: &mut Shared,
    u: Vec<f64>,
    x: Vec<f64>,
    v: ObjectiveVector,
    iteration: usize,
    phase: Phase,
    region: usize,
) -> Result<()> {
    let obs_index = shared.obs.len();
    shared.obs.push(u, 0.0)?;
    shared.objectives.push(v);
    shared.owner.push(region);
    out.archive.insert(ArchiveEntry {
        point: x.clone(),
        objectives: v,
        obs_index,
        region: Some(region),
    });
    out.records.push(MorboRecord {
        iteration,
        phase,
        region: Some(region),
        point: x,
        objectives: v,
        hv: out.archive.hv,
    });
    Ok(())
}
