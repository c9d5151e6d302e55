//! The four experiment modes.

use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use uavtilt::bo::{run_iterative_bo, run_vanilla_bo, RunTrace};
use uavtilt::experiment::{kpi_mbps, Problem};
use uavtilt::morbo::{run_morbo, ObjectiveVector};
use uavtilt::netsim::{median, write_cdf_csv, EvalReport};
use uavtilt::scenario::{DecisionVector, ScenarioSpec, UavMode, UeKind};
use uavtilt::transfer::{run_transfer_experiment, sample_source};
use uavtilt::turbo::{run_turbo, TurboOutcome};

use crate::checkpoint::EvalLog;
use crate::config::{layered_spec, DecisionInput, ExperimentConfig, Mode, OptimizerKind, ScenarioPreset};
use crate::output::{read_json, OutputDir};
use crate::CliError;

/// Headline numbers of one evaluated decision.
#[derive(Debug, Serialize)]
pub struct ReportSummary {
    pub objective: f64,
    pub normalized_objective: f64,
    pub geo_mean_rate_mbps: f64,
    pub gue_geo_mean_rate_mbps: f64,
    pub uav_coverage: Option<f64>,
    pub uav_outage: Option<f64>,
    pub outage_threshold_db: f64,
    pub median_gue_sinr_db: Option<f64>,
    pub median_uav_sinr_db: Option<f64>,
    pub n_gue: usize,
    pub n_uav: usize,
    pub n_floored: usize,
    pub uptilted_cells: Vec<usize>,
}

impl ReportSummary {
    fn new(r: &EvalReport, d: &DecisionVector, threshold: f64) -> Self {
        let med = |k| {
            let s = r.sinr_of(k);
            (!s.is_empty()).then(|| median(&s))
        };
        Self {
            objective: r.objective,
            normalized_objective: r.normalized_objective,
            geo_mean_rate_mbps: r.geo_mean_rate_bps / 1e6,
            gue_geo_mean_rate_mbps: r.gue_geo_mean_rate_bps / 1e6,
            uav_coverage: r.uav_coverage,
            uav_outage: r.uav_outage,
            outage_threshold_db: threshold,
            median_gue_sinr_db: med(UeKind::Gue),
            median_uav_sinr_db: med(UeKind::Uav),
            n_gue: r.kinds.iter().filter(|k| **k == UeKind::Gue).count(),
            n_uav: r.kinds.iter().filter(|k| **k == UeKind::Uav).count(),
            n_floored: r.n_floored,
            uptilted_cells: d.uptilted_cells(),
        }
    }
}

fn problem(cfg: &ExperimentConfig, spec: ScenarioSpec, joint: bool) -> Result<Problem, CliError> {
    Ok(Problem::new(spec, cfg.eval.clone(), joint)?)
}

/// Per-UE table and SINR/rate CDFs of `r` under `prefix`.
fn write_report_tables(out: &OutputDir, prefix: &str, r: &EvalReport) -> Result<(), CliError> {
    out.csv(&format!("{prefix}ues.csv"), |w| r.write_ue_csv(w))?;
    for kind in [UeKind::Gue, UeKind::Uav] {
        let sinr = r.sinr_of(kind);
        if sinr.is_empty() {
            continue;
        }
        let k = kind.as_str();
        out.csv(&format!("{prefix}sinr_cdf_{k}.csv"), |w| {
            write_cdf_csv(&sinr, "sinr_db", w)
        })?;
        let rates: Vec<f64> = r.rates_of(kind).iter().map(|v| v / 1e6).collect();
        out.csv(&format!("{prefix}rate_cdf_{k}.csv"), |w| {
            write_cdf_csv(&rates, "rate_mbps", w)
        })?;
    }
    Ok(())
}

pub fn run(cfg: &ExperimentConfig, out: &OutputDir) -> Result<Value, CliError> {
    match cfg.mode {
        Mode::Evaluate => evaluate(cfg, out),
        Mode::Optimize => optimize(cfg, out),
        Mode::Pareto => pareto(cfg, out),
        Mode::Transfer => transfer(cfg, out),
    }
}

fn evaluate(cfg: &ExperimentConfig, out: &OutputDir) -> Result<Value, CliError> {
    let explicit_joint = matches!(&cfg.decision, Some(DecisionInput::Explicit(d)) if d.is_joint());
    let p = problem(cfg, cfg.spec()?, cfg.joint_hpbw || explicit_joint)?;
    let (name, decision) = match &cfg.decision {
        None => ("baseline".to_string(), p.baseline()),
        Some(DecisionInput::Named(n)) if n == "baseline" => (n.clone(), p.baseline()),
        Some(DecisionInput::Named(n)) if n == "horizon" => (n.clone(), p.decision(&p.horizon_start())?),
        Some(DecisionInput::Named(n)) => return Err(CliError::Config(format!("unknown decision `{n}`"))),
        Some(DecisionInput::Explicit(d)) => ("explicit".to_string(), d.clone()),
    };
    decision
        .validate(p.n_cells())
        .map_err(|e| CliError::Config(format!("decision: {e}")))?;
    let r = p.simulator().evaluate(&decision)?;
    write_report_tables(out, "", &r)?;
    out.csv("summary.csv", |w| r.write_summary_csv(w))?;
    let summary = json!({
        "mode": "evaluate",
        "decision_name": name,
        "decision": decision,
        "scenario": p.spec(),
        "report": ReportSummary::new(&r, &decision, cfg.eval.outage_threshold_db),
    });
    out.json("summary.json", &summary)?;
    Ok(summary)
}

fn scalar_eval<'a>(p: &'a Problem, log: &'a EvalLog) -> impl Fn(&[f64]) -> uavtilt::Result<f64> + Sync + 'a {
    move |x: &[f64]| Ok(log.get_or_eval(x, || Ok(vec![p.value(x)?]))?[0])
}

fn aborted(trace: &RunTrace) -> Result<(), CliError> {
    match &trace.aborted {
        Some(msg) => Err(CliError::Runtime(format!("run aborted, partial trace written: {msg}"))),
        None => Ok(()),
    }
}

fn optimize(cfg: &ExperimentConfig, out: &OutputDir) -> Result<Value, CliError> {
    let p = problem(cfg, cfg.spec()?, cfg.joint_hpbw)?;
    let log = EvalLog::open(&out.path("checkpoint.jsonl"), &out.provenance.config_hash, "target")?;
    let eval = scalar_eval(&p, &log);
    let bounds = p.bounds();
    let mut regions: Option<TurboOutcome> = None;
    let trace = match cfg.optimizer {
        OptimizerKind::Vanilla => run_vanilla_bo(&eval, &bounds, &cfg.bo)?,
        OptimizerKind::Iterative => run_iterative_bo(&eval, &bounds, &p.horizon_start(), &cfg.bo)?,
        OptimizerKind::Turbo => {
            let o = run_turbo(&eval, &bounds, &cfg.turbo)?;
            let t = o.trace.clone();
            regions = Some(o);
            t
        }
    };
    out.csv("convergence.csv", |w| trace.write_csv(w, kpi_mbps))?;
    out.json("trace.json", &trace)?;
    if let Some(o) = &regions {
        out.csv("regions.csv", |w| o.write_diagnostics_csv(w))?;
    }
    aborted(&trace)?;
    let best = trace.best().ok_or_else(|| CliError::Runtime("no evaluations".into()))?;
    let decision = p.decision(&best.point)?;
    let r = p.report(&best.point)?;
    let base_x = p.baseline().to_vec();
    let base = p.value(&base_x)?;
    write_report_tables(out, "best_", &r)?;
    out.json("best_decision.json", &decision)?;
    let summary = json!({
        "mode": "optimize",
        "optimizer": cfg.optimizer,
        "joint_hpbw": cfg.joint_hpbw,
        "n_evaluations": trace.len(),
        "n_search": trace.n_search(),
        "best_value": best.value,
        "best_geo_mean_mbps": kpi_mbps(best.value),
        "baseline_geo_mean_mbps": kpi_mbps(base),
        "gain_vs_baseline": (best.value - base).exp(),
        "best_report": ReportSummary::new(&r, &decision, cfg.eval.outage_threshold_db),
        "replayed_evaluations": log.n_replayed(),
        "logged_evaluations": log.n_recorded(),
    });
    out.json("summary.json", &summary)?;
    Ok(summary)
}

fn mode_name(m: UavMode) -> &'static str {
    match m {
        UavMode::Corridors => "corridors",
        UavMode::Uniform => "uniform",
    }
}

fn pareto(cfg: &ExperimentConfig, out: &OutputDir) -> Result<Value, CliError> {
    let spec = cfg.spec()?;
    let modes = cfg
        .pareto
        .as_ref()
        .map_or_else(|| vec![spec.uav_mode], |p| p.uav_modes.clone());
    let mut runs = serde_json::Map::new();
    for mode in modes {
        let name = mode_name(mode);
        let p = problem(
            cfg,
            ScenarioSpec {
                uav_mode: mode,
                ..spec.clone()
            },
            cfg.joint_hpbw,
        )?;
        if p.spec().n_uavs() == 0 {
            return Err(CliError::Config(
                "pareto mode needs UAVs for the coverage objective".into(),
            ));
        }
        let log = EvalLog::open(
            &out.path(&format!("checkpoint_{name}.jsonl")),
            &out.provenance.config_hash,
            name,
        )?;
        let eval = |x: &[f64]| -> uavtilt::Result<ObjectiveVector> {
            let y = log.get_or_eval(x, || {
                let o = p.objectives(x)?;
                Ok(vec![o.gue_obj, o.uav_cov])
            })?;
            Ok(ObjectiveVector::new(y[0], y[1]))
        };
        let reference = p.morbo_reference()?;
        let o = run_morbo(&eval, &p.bounds(), reference, &cfg.morbo)?;
        let n_gue = p.simulator().kinds()?.iter().filter(|k| **k == UeKind::Gue).count();
        out.csv(&format!("archive_{name}.csv"), |w| o.archive.write_csv(w, n_gue))?;
        out.csv(&format!("morbo_trace_{name}.csv"), |w| o.write_trace_csv(w))?;
        if let Some(msg) = &o.aborted {
            return Err(CliError::Runtime(format!(
                "{name} run aborted, partial trace written: {msg}"
            )));
        }
        let mbps = |g: f64| (g / n_gue as f64).exp() / 1e6;
        let anchors: Vec<Value> = [0.9, 0.99, 0.999]
            .iter()
            .map(|&c| json!({"coverage": c, "best_gue_geo_mean_mbps": o.archive.best_gue_at_coverage(c).map(mbps)}))
            .collect();
        runs.insert(
            name.into(),
            json!({
                    "hypervolume": o.archive.hv,
                    "front_size": o.archive.entries.len(),
                    "n_evaluations": o.records.len(),
                    "reference": reference,
                    "anchors": anchors,
                    "replayed_evaluations": log.n_replayed(),
            "logged_evaluations": log.n_recorded(),
                }),
        );
    }
    let summary = json!({ "mode": "pareto", "runs": runs });
    out.json("summary.json", &summary)?;
    Ok(summary)
}

fn load_trace(path: &Path) -> Result<RunTrace, CliError> {
    let v = read_json(path)?;
    serde_json::from_value(v).map_err(|e| CliError::Config(format!("{}: not a run trace: {e}", path.display())))
}

fn transfer(cfg: &ExperimentConfig, out: &OutputDir) -> Result<Value, CliError> {
    let t = cfg.transfer.as_ref().expect("validated");
    let tgt = problem(cfg, cfg.spec()?, cfg.joint_hpbw)?;
    let bounds = tgt.bounds();
    let n_init = t.n_init.unwrap_or(2 * tgt.dim());
    let hash = &out.provenance.config_hash;
    let source = match &t.source_trace {
        Some(path) => load_trace(path)?,
        None => {
            let spec = layered_spec(
                t.source_preset.unwrap_or(ScenarioPreset::Standard).spec(),
                t.source_scenario.as_ref(),
            )?;
            let src = problem(cfg, spec, cfg.joint_hpbw)?;
            let log = EvalLog::open(&out.path("checkpoint_source.jsonl"), hash, "source")?;
            let eval = scalar_eval(&src, &log);
            let s = sample_source(&eval, &src.bounds(), n_init, t.source_seed.unwrap_or(cfg.seed + 1000))?;
            aborted(&s)?;
            s
        }
    };
    let log = EvalLog::open(&out.path("checkpoint_target.jsonl"), hash, "target")?;
    let eval = scalar_eval(&tgt, &log);
    let o = run_transfer_experiment(&source, &eval, &bounds, &t.mixes, n_init, &cfg.turbo)?;
    out.csv("comparison.csv", |w| o.write_comparison_csv(w, kpi_mbps))?;
    let mut arms = Vec::new();
    for a in &o.arms {
        let pct = (a.mix * 100.0).round() as i64;
        out.csv(&format!("arm_mix{pct}.csv"), |w| a.outcome.trace.write_csv(w, kpi_mbps))?;
        aborted(&a.outcome.trace)?;
        arms.push(json!({
            "mix": a.mix,
            "n_copied": a.outcome.trace.records.iter().filter(|r| r.phase == uavtilt::bo::Phase::Copied).count(),
            "initial_best_mbps": kpi_mbps(a.initial_best()),
            "best_observed_mbps": kpi_mbps(a.best_observed()),
            "best_evaluated_mbps": a.best_evaluated().map(kpi_mbps),
        }));
    }
    let summary = json!({
        "mode": "transfer",
        "n_init": n_init,
        "source_records": source.len(),
        "arms": arms,
        "replayed_evaluations": log.n_replayed(),
        "logged_evaluations": log.n_recorded(),
    });
    out.json("summary.json", &summary)?;
    Ok(summary)
}
