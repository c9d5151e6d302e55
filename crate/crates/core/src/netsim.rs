//! Association, SINR, rates and the scalar and vector objectives.

use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::channel::constants::uma;
use crate::channel::{small_scale, FadingDraw, GainTable, LinkBudget};
use crate::error::{config_err, Error, Result};
use crate::rng::{self, Rng};
use crate::scenario::{build_deployment, build_hex_layout, drop_ues, DecisionVector, Deployment, ScenarioSpec, UeKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub n_fading_draws: usize,
    /// Rates are clamped here before taking logs.
    pub rate_floor_bps: f64,
    pub outage_threshold_db: f64,
    /// Redraw UEs, LoS states and shadowing on every evaluation.
    pub redrop_per_eval: bool,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            n_fading_draws: 50,
            rate_floor_bps: 1.0,
            outage_threshold_db: -5.0,
            redrop_per_eval: false,
        }
    }
}

impl EvalSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_fading_draws == 0 {
            return config_err("n_fading_draws must be at least 1");
        }
        if !(self.rate_floor_bps > 0.0) {
            return config_err("rate_floor_bps must be positive");
        }
        if !self.outage_threshold_db.is_finite() {
            return config_err("outage_threshold_db must be finite");
        }
        Ok(())
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Thermal noise over `bandwidth_hz` plus the receiver noise figure, dBm.
pub fn noise_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    uma().thermal_noise_dbm_per_hz + 10.0 * bandwidth_hz.log10() + noise_figure_db
}

pub fn noise_power_w(spec: &ScenarioSpec) -> f64 {
    dbm_to_watts(noise_dbm(spec.bandwidth, spec.noise_figure_db))
}

/// Serving cell per UE: strongest large-scale received power, lowest id on ties.
pub fn associate(table: &GainTable, tx_power_dbm: &[f64]) -> Vec<usize> {
    (0..table.n_ues)
        .map(|u| {
            let row = table.ue_row(u);
            let mut best = 0;
            let mut best_rss = f64::NEG_INFINITY;
            for (c, g) in row.iter().enumerate() {
                let rss = tx_power_dbm[c] + g;
                if rss > best_rss {
                    best_rss = rss;
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Linear SINR of each UE toward its server under one fading realization.
pub fn sinr_linear(
    table: &GainTable,
    assoc: &[usize],
    fading: &FadingDraw,
    tx_power_dbm: &[f64],
    noise_w: f64,
) -> Vec<f64> {
    let tx: Vec<f64> = tx_power_dbm.iter().map(|&p| dbm_to_watts(p)).collect();
    (0..table.n_ues)
        .map(|u| {
            let mut signal = 0.0;
            let mut interference = 0.0;
            for c in 0..table.n_cells {
                let rx = tx[c] * db_to_linear(table.gain_db(c, u)) * fading.get(c, u);
                if c == assoc[u] {
                    signal = rx;
                } else {
                    interference += rx;
                }
            }
            signal / (interference + noise_w)
        })
        .collect()
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// UEs served by each cell.
pub fn cell_loads(assoc: &[usize], n_cells: usize) -> Vec<usize> {
    let mut load = vec![0; n_cells];
    for &c in assoc {
        load[c] += 1;
    }
    load
}

/// `η_k · B · mean_t log2(1 + SINR_k^t)` with `η_k = 1 / load(server)`.
pub fn rates_from_sinr_draws(sinr_draws: &[Vec<f64>], assoc: &[usize], n_cells: usize, bandwidth_hz: f64) -> Vec<f64> {
    let load = cell_loads(assoc, n_cells);
    let n = sinr_draws.len() as f64;
    (0..assoc.len())
        .map(|u| {
            let se = sinr_draws.iter().map(|s| (1.0 + s[u]).log2()).sum::<f64>() / n;
            bandwidth_hz * se / load[assoc[u]] as f64
        })
        .collect()
}

/// Monte-Carlo rates over `settings.n_fading_draws` fresh fading draws from `rng`.
pub fn rate(
    table: &GainTable,
    assoc: &[usize],
    kinds: &[UeKind],
    spec: &ScenarioSpec,
    settings: &EvalSettings,
    rng: &mut Rng,
) -> Vec<f64> {
    let tx = vec![spec.tx_power_dbm; table.n_cells];
    let noise = noise_power_w(spec);
    let draws: Vec<Vec<f64>> = (0..settings.n_fading_draws)
        .map(|_| sinr_linear(table, assoc, &small_scale(rng, kinds, table.n_cells), &tx, noise))
        .collect();
    rates_from_sinr_draws(&draws, assoc, table.n_cells, spec.bandwidth)
}

/// `λ Σ_UAV ln R + (1 − λ) Σ_GUE ln R`, rates clamped at `floor`.
pub fn objective(rates: &[f64], kinds: &[UeKind], lambda: f64, floor: f64) -> f64 {
    rates
        .iter()
        .zip(kinds)
        .map(|(&r, &k)| {
            let w = match k {
                UeKind::Uav => lambda,
                UeKind::Gue => 1.0 - lambda,
            };
            w * r.max(floor).ln()
        })
        .sum()
}

/// Total objective weight `λ|U| + (1 − λ)|G|`.
pub fn objective_weight(kinds: &[UeKind], lambda: f64) -> f64 {
    kinds
        .iter()
        .map(|k| match k {
            UeKind::Uav => lambda,
            UeKind::Gue => 1.0 - lambda,
        })
        .sum()
}

/// Objective divided by its total weight: the log of the weighted geometric
/// mean rate. For λ = 0.5 this is the log of the plain geometric mean.
pub fn normalized_objective(f: f64, kinds: &[UeKind], lambda: f64) -> f64 {
    f / objective_weight(kinds, lambda)
}

pub fn geo_mean(rates: &[f64]) -> f64 {
    (rates.iter().map(|r| r.ln()).sum::<f64>() / rates.len() as f64).exp()
}

/// `exp(f / n)`. Pass twice the λ = 0.5 objective to recover the geometric
/// mean of all `n` rates exactly.
pub fn map_objective_to_geomean(f: f64, n_ues: usize) -> f64 {
    (f / n_ues as f64).exp()
}

/// Fraction of UAVs with SINR at or above `tau_db`.
pub fn uav_coverage(uav_sinr_db: &[f64], tau_db: f64) -> Result<f64> {
    if uav_sinr_db.is_empty() {
        return Err(Error::EmptyUavSet);
    }
    Ok(uav_sinr_db.iter().filter(|&&s| s >= tau_db).count() as f64 / uav_sinr_db.len() as f64)
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kinds: Vec<UeKind>,
    pub assoc: Vec<usize>,
    /// SINR with unit small-scale gain on every link.
    pub sinr_db: Vec<f64>,
    pub rate_bps: Vec<f64>,
    pub lambda: f64,
    pub objective: f64,
    pub normalized_objective: f64,
    /// Objective with λ = 0: the GUE sum-log-rate.
    pub gue_objective: f64,
    pub geo_mean_rate_bps: f64,
    pub gue_geo_mean_rate_bps: f64,
    pub uav_coverage: Option<f64>,
    pub uav_outage: Option<f64>,
    /// UEs whose rate fell below the floor before taking logs.
    pub n_floored: usize,
}

impl EvalReport {
    pub fn sinr_of(&self, kind: UeKind) -> Vec<f64> {
        self.kinds
            .iter()
            .zip(&self.sinr_db)
            .filter(|(k, _)| **k == kind)
            .map(|(_, s)| *s)
            .collect()
    }

    pub fn rates_of(&self, kind: UeKind) -> Vec<f64> {
        self.kinds
            .iter()
            .zip(&self.rate_bps)
            .filter(|(k, _)| **k == kind)
            .map(|(_, r)| *r)
            .collect()
    }

    /// `ue_id,kind,serving_cell,sinr_db,rate_bps`.
    pub fn write_ue_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["ue_id", "kind", "serving_cell", "sinr_db", "rate_bps"])?;
        for u in 0..self.kinds.len() {
            wtr.write_record([
                u.to_string(),
                self.kinds[u].as_str().to_string(),
                self.assoc[u].to_string(),
                format!("{:.6}", self.sinr_db[u]),
                format!("{:.3}", self.rate_bps[u]),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "objective",
            "geo_mean_rate_bps",
            "gue_geo_mean_rate_bps",
            "uav_coverage",
            "uav_outage",
            "median_gue_sinr_db",
            "median_uav_sinr_db",
            "n_floored",
        ])?;
        let opt = |x: Option<f64>| x.map_or_else(String::new, |v| format!("{v:.6}"));
        let med = |k| {
            let s = self.sinr_of(k);
            if s.is_empty() {
                String::new()
            } else {
                format!("{:.4}", median(&s))
            }
        };
        wtr.write_record([
            format!("{:.9}", self.objective),
            format!("{:.3}", self.geo_mean_rate_bps),
            format!("{:.3}", self.gue_geo_mean_rate_bps),
            opt(self.uav_coverage),
            opt(self.uav_outage),
            med(UeKind::Gue),
            med(UeKind::Uav),
            self.n_floored.to_string(),
        ])?;
        wtr.flush()?;
        Ok(())
    }
}

/// Empirical CDF rows `value,cdf` of `values`.
pub fn write_cdf_csv<W: Write>(values: &[f64], column: &str, w: W) -> Result<()> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([column, "cdf"])?;
    let n = v.len() as f64;
    for (i, x) in v.iter().enumerate() {
        wtr.write_record([format!("{x:.6}"), format!("{:.6}", (i + 1) as f64 / n)])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Small-scale gains for GUE links only, `[gue][draw][cell]`.
#[derive(Debug, Clone)]
struct FadingSet {
    n_draws: usize,
    n_cells: usize,
    gue_slot: Vec<Option<usize>>,
    data: Vec<f64>,
}

impl FadingSet {
    fn draw(kinds: &[UeKind], n_cells: usize, n_draws: usize, rng: &mut Rng) -> Self {
        let mut gue_slot = Vec::with_capacity(kinds.len());
        let mut n_gue = 0;
        for k in kinds {
            gue_slot.push((*k == UeKind::Gue).then(|| {
                n_gue += 1;
                n_gue - 1
            }));
        }
        let mut data = vec![0.0; n_gue * n_draws * n_cells];
        for t in 0..n_draws {
            let fd = small_scale(rng, kinds, n_cells);
            for (u, slot) in gue_slot.iter().enumerate() {
                if let Some(g) = slot {
                    let dst = (g * n_draws + t) * n_cells;
                    data[dst..dst + n_cells].copy_from_slice(&fd.power_gain[u * n_cells..(u + 1) * n_cells]);
                }
            }
        }
        Self {
            n_draws,
            n_cells,
            gue_slot,
            data,
        }
    }

    fn gue_draw(&self, slot: usize, t: usize) -> &[f64] {
        let s = (slot * self.n_draws + t) * self.n_cells;
        &self.data[s..s + self.n_cells]
    }
}

/// Everything an evaluation needs besides the decision.
#[derive(Debug, Clone)]
struct Realization {
    deployment: Deployment,
    budget: LinkBudget,
    fading: FadingSet,
}

impl Realization {
    fn draw(spec: &ScenarioSpec, settings: &EvalSettings, deployment: Deployment, rng: &mut Rng) -> Result<Self> {
        let budget = LinkBudget::draw(&deployment, spec, rng)?;
        let fading = FadingSet::draw(&deployment.kinds(), deployment.n_cells(), settings.n_fading_draws, rng);
        Ok(Self {
            deployment,
            budget,
            fading,
        })
    }

    fn fixed(spec: &ScenarioSpec, settings: &EvalSettings) -> Result<Self> {
        let deployment = build_deployment(spec)?;
        let budget = LinkBudget::draw(&deployment, spec, &mut rng::stream(spec.seed, rng::STREAM_LOS))?;
        let fading = FadingSet::draw(
            &deployment.kinds(),
            deployment.n_cells(),
            settings.n_fading_draws,
            &mut rng::stream(spec.seed, rng::STREAM_FADING),
        );
        Ok(Self {
            deployment,
            budget,
            fading,
        })
    }

    fn redrawn(spec: &ScenarioSpec, settings: &EvalSettings, rng: &mut Rng) -> Result<Self> {
        let layout = build_hex_layout(spec);
        let deployment = drop_ues(spec, &layout, rng)?;
        Self::draw(spec, settings, deployment, rng)
    }

    fn evaluate(&self, spec: &ScenarioSpec, settings: &EvalSettings, decision: &DecisionVector) -> Result<EvalReport> {
        let n_cells = self.budget.n_cells;
        decision.validate(n_cells)?;
        let mut gains_db = Vec::with_capacity(self.budget.pl_db.len());
        self.budget.fill_gains(decision, &mut gains_db);
        let tx_w = dbm_to_watts(spec.tx_power_dbm);
        let lin: Vec<f64> = gains_db.iter().map(|&g| tx_w * db_to_linear(g)).collect();
        let noise = noise_power_w(spec);
        let kinds = &self.budget.kinds;
        let n_ues = kinds.len();

        let mut assoc = Vec::with_capacity(n_ues);
        for u in 0..n_ues {
            let row = &lin[u * n_cells..(u + 1) * n_cells];
            let mut best = 0;
            for c in 1..n_cells {
                if row[c] > row[best] {
                    best = c;
                }
            }
            assoc.push(best);
        }
        let load = cell_loads(&assoc, n_cells);

        let mut sinr_db = Vec::with_capacity(n_ues);
        let mut rate_bps = Vec::with_capacity(n_ues);
        for u in 0..n_ues {
            let row = &lin[u * n_cells..(u + 1) * n_cells];
            let b = assoc[u];
            let total: f64 = row.iter().sum();
            let mean_sinr = row[b] / (total - row[b] + noise);
            sinr_db.push(linear_to_db(mean_sinr));
            let se = match self.fading.gue_slot[u] {
                None => (1.0 + mean_sinr).log2(),
                Some(slot) => {
                    let mut acc = 0.0;
                    for t in 0..self.fading.n_draws {
                        let h = self.fading.gue_draw(slot, t);
                        let mut tot = 0.0;
                        for c in 0..n_cells {
                            tot += row[c] * h[c];
                        }
                        let s = row[b] * h[b];
                        acc += (1.0 + s / (tot - s + noise)).log2();
                    }
                    acc / self.fading.n_draws as f64
                }
            };
            rate_bps.push(spec.bandwidth * se / load[b] as f64);
        }
        Ok(summarize(
            kinds.clone(),
            assoc,
            sinr_db,
            rate_bps,
            spec.lambda_tradeoff,
            settings,
        ))
    }
}

fn summarize(
    kinds: Vec<UeKind>,
    assoc: Vec<usize>,
    sinr_db: Vec<f64>,
    rate_bps: Vec<f64>,
    lambda: f64,
    settings: &EvalSettings,
) -> EvalReport {
    let floor = settings.rate_floor_bps;
    let f = objective(&rate_bps, &kinds, lambda, floor);
    let gue_objective = objective(&rate_bps, &kinds, 0.0, floor);
    let clamped: Vec<f64> = rate_bps.iter().map(|r| r.max(floor)).collect();
    let gue_rates: Vec<f64> = clamped
        .iter()
        .zip(&kinds)
        .filter(|(_, k)| **k == UeKind::Gue)
        .map(|(r, _)| *r)
        .collect();
    let uav_sinr: Vec<f64> = sinr_db
        .iter()
        .zip(&kinds)
        .filter(|(_, k)| **k == UeKind::Uav)
        .map(|(s, _)| *s)
        .collect();
    let coverage = uav_coverage(&uav_sinr, settings.outage_threshold_db).ok();
    EvalReport {
        assoc,
        lambda,
        objective: f,
        normalized_objective: normalized_objective(f, &kinds, lambda),
        gue_objective,
        geo_mean_rate_bps: geo_mean(&clamped),
        gue_geo_mean_rate_bps: if gue_rates.is_empty() {
            f64::NAN
        } else {
            geo_mean(&gue_rates)
        },
        uav_coverage: coverage,
        uav_outage: coverage.map(|c| 1.0 - c),
        n_floored: rate_bps.iter().filter(|&&r| r < floor).count(),
        sinr_db,
        rate_bps,
        kinds,
    }
}

/// One-shot evaluation.
///
/// Without redrop the UE drop, channel and fading come from the scenario's own
/// seed and `rng` is untouched; with redrop all of them are drawn from `rng`.
pub fn evaluate(
    spec: &ScenarioSpec,
    decision: &DecisionVector,
    settings: &EvalSettings,
    rng: &mut Rng,
) -> Result<EvalReport> {
    settings.validate()?;
    let real = if settings.redrop_per_eval {
        Realization::redrawn(spec, settings, rng)?
    } else {
        Realization::fixed(spec, settings)?
    };
    real.evaluate(spec, settings, decision)
}

/// Reusable evaluator for one scenario.
///
/// In fixed mode the drop, channel and fading draws are built once; every
/// call is then a pure function of the decision. In redrop mode the k-th call
/// draws a new realization from substream k of the scenario seed.
#[derive(Debug)]
pub struct Simulator {
    spec: ScenarioSpec,
    settings: EvalSettings,
    fixed: Option<Realization>,
    calls: AtomicU64,
}

impl Simulator {
    pub fn new(spec: ScenarioSpec, settings: EvalSettings) -> Result<Self> {
        spec.validate()?;
        settings.validate()?;
        let fixed = if settings.redrop_per_eval {
            None
        } else {
            Some(Realization::fixed(&spec, &settings)?)
        };
        Ok(Self {
            spec,
            settings,
            fixed,
            calls: AtomicU64::new(0),
        })
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn settings(&self) -> &EvalSettings {
        &self.settings
    }

    pub fn n_cells(&self) -> usize {
        self.spec.n_cells()
    }

    /// Drop used in fixed mode, or a fresh drop from the spec seed otherwise.
    pub fn deployment(&self) -> Result<Deployment> {
        match &self.fixed {
            Some(r) => Ok(r.deployment.clone()),
            None => build_deployment(&self.spec),
        }
    }

    pub fn kinds(&self) -> Result<Vec<UeKind>> {
        Ok(match &self.fixed {
            Some(r) => r.budget.kinds.clone(),
            None => self.deployment()?.kinds(),
        })
    }

    pub fn gain_table(&self, decision: &DecisionVector) -> Result<GainTable> {
        match &self.fixed {
            Some(r) => r.budget.gain_table(decision),
            None => config_err("gain tables are only cached in fixed mode"),
        }
    }

    pub fn evaluate(&self, decision: &DecisionVector) -> Result<EvalReport> {
        match &self.fixed {
            Some(r) => r.evaluate(&self.spec, &self.settings, decision),
            None => {
                let k = self.calls.fetch_add(1, Ordering::Relaxed);
                self.evaluate_realization(decision, k)
            }
        }
    }

    /// Evaluate against redrop realization `index` (fixed mode ignores it).
    pub fn evaluate_realization(&self, decision: &DecisionVector, index: u64) -> Result<EvalReport> {
        match &self.fixed {
            Some(r) => r.evaluate(&self.spec, &self.settings, decision),
            None => {
                let mut rng = rng::substream(self.spec.seed, rng::STREAM_REDROP, index);
                Realization::redrawn(&self.spec, &self.settings, &mut rng)?.evaluate(
                    &self.spec,
                    &self.settings,
                    decision,
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Ue;

    fn table(n_cells: usize, n_ues: usize, gains: Vec<f64>) -> GainTable {
        GainTable {
            n_cells,
            n_ues,
            los: vec![true; gains.len()],
            sf_db: vec![0.0; gains.len()],
            gains_db: gains,
        }
    }

    #[test]
    fn noise_for_10_mhz() {
        assert!((noise_dbm(1e7, 9.0) + 95.0).abs() < 1e-12);
    }

    #[test]
    fn single_cell_sinr_is_snr() {
        let t = table(1, 2, vec![-100.0, -110.0]);
        let assoc = associate(&t, &[46.0]);
        assert_eq!(assoc, vec![0, 0]);
        let noise = dbm_to_watts(-95.0);
        let s = sinr_linear(&t, &assoc, &FadingDraw::ones(1, 2), &[46.0], noise);
        assert!((s[0] - dbm_to_watts(46.0 - 100.0) / noise).abs() < 1e-9 * s[0]);
    }

    #[test]
    fn ties_go_to_lowest_cell() {
        let t = table(3, 1, vec![-90.0, -80.0, -80.0]);
        assert_eq!(associate(&t, &[46.0; 3]), vec![1]);
    }

    #[test]
    fn rate_splits_by_load() {
        let one = rates_from_sinr_draws(&[vec![3.0]], &[0], 1, 1e7);
        assert!((one[0] - 2e7).abs() < 1e-6);
        let two = rates_from_sinr_draws(&[vec![3.0, 3.0]], &[0, 0], 1, 1e7);
        assert_eq!(two, vec![1e7, 1e7]);
    }

    #[test]
    fn objective_special_cases() {
        let kinds = [UeKind::Uav, UeKind::Gue, UeKind::Gue];
        let rates = [4.0, 2.0, 8.0];
        assert!((objective(&rates, &kinds, 0.0, 1.0) - (2f64.ln() + 8f64.ln())).abs() < 1e-12);
        assert!((objective(&rates, &kinds, 1.0, 1.0) - 4f64.ln()).abs() < 1e-12);
        let eq = [5.0; 3];
        assert!((objective(&eq, &kinds, 0.5, 1.0) - 0.5 * 3.0 * 5f64.ln()).abs() < 1e-12);
        assert_eq!(objective(&[0.0], &[UeKind::Gue], 0.5, 1.0), 0.0);
    }

    #[test]
    fn geo_mean_cases() {
        assert!((geo_mean(&[1.0, 4.0]) - 2.0).abs() < 1e-12);
        assert!((geo_mean(&[7.0; 5]) - 7.0).abs() < 1e-12);
        let kinds = [UeKind::Uav, UeKind::Gue, UeKind::Gue, UeKind::Uav];
        let rates = [3e5, 1.2e6, 8e6, 2e4];
        let f = objective(&rates, &kinds, 0.5, 1.0);
        let g = map_objective_to_geomean(2.0 * f, 4);
        assert!((g / geo_mean(&rates) - 1.0).abs() < 1e-12);
        assert!((normalized_objective(f, &kinds, 0.5).exp() / geo_mean(&rates) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coverage_counts() {
        assert_eq!(uav_coverage(&[0.0, 3.0], -5.0).unwrap(), 1.0);
        assert_eq!(uav_coverage(&[-6.0, -5.0, 2.0, -9.0], -5.0).unwrap(), 0.5);
        assert!(matches!(uav_coverage(&[], -5.0), Err(Error::EmptyUavSet)));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    fn small_spec() -> ScenarioSpec {
        ScenarioSpec {
            n_rings: 1,
            corridors: vec![],
            uavs_per_corridor: 0,
            uav_mode: crate::scenario::UavMode::Uniform,
            ..ScenarioSpec::standard()
        }
    }

    #[test]
    fn fast_path_matches_reference_pipeline() {
        let spec = ScenarioSpec {
            gue_per_cell: 3,
            uavs_per_corridor: 5,
            ..ScenarioSpec::standard()
        };
        let settings = EvalSettings {
            n_fading_draws: 4,
            ..EvalSettings::default()
        };
        let decision = DecisionVector::tilt_only((0..57).map(|c| (c % 7) as f64 * 5.0 - 15.0).collect());
        let sim = Simulator::new(spec.clone(), settings.clone()).unwrap();
        let fast = sim.evaluate(&decision).unwrap();

        let dep = build_deployment(&spec).unwrap();
        let table = LinkBudget::draw(&dep, &spec, &mut rng::stream(spec.seed, rng::STREAM_LOS))
            .unwrap()
            .gain_table(&decision)
            .unwrap();
        let kinds = dep.kinds();
        let tx = vec![spec.tx_power_dbm; 57];
        let assoc = associate(&table, &tx);
        assert_eq!(assoc, fast.assoc);
        let mut frng = rng::stream(spec.seed, rng::STREAM_FADING);
        let draws: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                sinr_linear(
                    &table,
                    &assoc,
                    &small_scale(&mut frng, &kinds, 57),
                    &tx,
                    noise_power_w(&spec),
                )
            })
            .collect();
        let rates = rates_from_sinr_draws(&draws, &assoc, 57, spec.bandwidth);
        for (a, b) in rates.iter().zip(&fast.rate_bps) {
            assert!((a / b - 1.0).abs() < 1e-9, "{a} {b}");
        }
        let mean = sinr_linear(
            &table,
            &assoc,
            &FadingDraw::ones(57, kinds.len()),
            &tx,
            noise_power_w(&spec),
        );
        for (a, b) in mean.iter().zip(&fast.sinr_db) {
            assert!((linear_to_db(*a) - b).abs() < 1e-9);
        }
    }

    #[test]
    fn fixed_mode_is_deterministic() {
        let spec = small_spec();
        let settings = EvalSettings {
            n_fading_draws: 5,
            ..Default::default()
        };
        let d = DecisionVector::baseline_3gpp(21, false);
        let a = Simulator::new(spec.clone(), settings.clone())
            .unwrap()
            .evaluate(&d)
            .unwrap();
        let b = evaluate(&spec, &d, &settings, &mut rng::stream(0, 0)).unwrap();
        assert_eq!(a, b);
        assert!(a.uav_coverage.is_none());
        assert!(a.rate_bps.iter().all(|&r| r >= 0.0));
    }

    #[test]
    fn redrop_mode_varies_between_calls() {
        let spec = small_spec();
        let settings = EvalSettings {
            n_fading_draws: 2,
            redrop_per_eval: true,
            ..Default::default()
        };
        let sim = Simulator::new(spec, settings).unwrap();
        let d = DecisionVector::baseline_3gpp(21, false);
        let a = sim.evaluate(&d).unwrap();
        let b = sim.evaluate(&d).unwrap();
        assert_ne!(a.objective, b.objective);
        assert_eq!(sim.evaluate_realization(&d, 0).unwrap(), a);
    }

    #[test]
    fn uav_rates_ignore_draw_count() {
        let mut spec = small_spec();
        spec.gue_per_cell = 2;
        let mut dep = build_deployment(&spec).unwrap();
        dep.ues.push(Ue {
            id: dep.ues.len(),
            pos: [100.0, 50.0, 150.0],
            kind: UeKind::Uav,
        });
        let d = DecisionVector::baseline_3gpp(21, false);
        let rates = |n| {
            let settings = EvalSettings {
                n_fading_draws: n,
                ..Default::default()
            };
            let real = Realization::draw(&spec, &settings, dep.clone(), &mut rng::stream(1, 1)).unwrap();
            real.evaluate(&spec, &settings, &d)
                .unwrap()
                .rate_bps
                .last()
                .copied()
                .unwrap()
        };
        assert_eq!(rates(10).to_bits(), rates(20).to_bits());
    }
}
