//! Seeding a target optimization with observations from a source scenario.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bo::{initial_design, EvalFn, Phase, RunTrace};
use crate::error::{config_err, Error, Result};
use crate::gp::ObservationSet;
use crate::rng;
use crate::turbo::{run_turbo_from, TurboConfig, TurboOutcome};

/// How the initial dataset of a target run is assembled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferPlan {
    /// Fraction of initial points evaluated fresh on the target.
    pub mix: f64,
    pub n_init: usize,
    pub seed: u64,
}

impl TransferPlan {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mix) {
            return config_err("mix must lie in [0, 1]");
        }
        if self.n_init < 2 {
            return config_err("n_init must be at least 2");
        }
        Ok(())
    }

    pub fn n_fresh(&self) -> usize {
        // tolerate float noise such as 0.5 * 228 = 114.00000000000001
        ((self.mix * self.n_init as f64) - 1e-9).ceil().max(0.0) as usize
    }

    pub fn n_copied(&self) -> usize {
        self.n_init - self.n_fresh()
    }
}

/// Fresh target evaluations at a Latin-hypercube design (the same points a
/// cold start with this seed would use) followed by the first source
/// records, copied with their source values. Copied records carry
/// [`Phase::Copied`].
pub fn build_seeded_dataset(
    plan: &TransferPlan,
    source: &RunTrace,
    eval: &EvalFn,
    bounds: &[[f64; 2]],
) -> Result<RunTrace> {
    plan.validate()?;
    let d = bounds.len();
    if source.bounds.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: source.bounds.len(),
        });
    }
    if source.bounds != bounds {
        return config_err("source and target search boxes differ");
    }
    let n_copy = plan.n_copied();
    if source.len() < n_copy {
        return config_err(format!("source has {} records, {n_copy} needed", source.len()));
    }
    let scratch = ObservationSet::new(bounds.to_vec());
    let design = initial_design(d, plan.n_fresh(), &mut rng::stream(plan.seed, rng::STREAM_INIT_DESIGN));
    let values: Vec<Result<f64>> = design.par_iter().map(|u| eval(&scratch.from_unit(u))).collect();
    let mut trace = RunTrace::new(bounds.to_vec());
    for (u, v) in design.iter().zip(values) {
        match v {
            Ok(v) => trace.push(0, Phase::Initial, None, scratch.from_unit(u), v),
            Err(e) => {
                trace.aborted = Some(e.to_string());
                return Ok(trace);
            }
        }
    }
    for r in source.records.iter().take(n_copy) {
        trace.push(0, Phase::Copied, None, r.point.clone(), r.value);
    }
    Ok(trace)
}

/// Initial design evaluated on a source scenario, for use as a transfer
/// source.
pub fn sample_source(eval: &EvalFn, bounds: &[[f64; 2]], n: usize, seed: u64) -> Result<RunTrace> {
    let plan = TransferPlan {
        mix: 1.0,
        n_init: n.max(2),
        seed,
    };
    build_seeded_dataset(&plan, &RunTrace::new(bounds.to_vec()), eval, bounds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferArm {
    pub mix: f64,
    pub outcome: TurboOutcome,
}

impl TransferArm {
    /// Best value over the whole trace, copied records included.
    pub fn best_observed(&self) -> f64 {
        self.outcome.trace.best_value()
    }

    /// Best value among points actually evaluated on the target.
    pub fn best_evaluated(&self) -> Option<f64> {
        self.outcome.trace.best_evaluated().map(|r| r.value)
    }

    /// Best value of the seeded initial dataset.
    pub fn initial_best(&self) -> f64 {
        self.outcome
            .trace
            .records
            .iter()
            .filter(|r| r.phase != Phase::Search)
            .map(|r| r.value)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Best observed value after each search evaluation (index 0 = seeded set).
    pub fn curve(&self) -> Vec<f64> {
        let mut out = vec![self.initial_best()];
        let mut best = out[0];
        for r in self.outcome.trace.records.iter().filter(|r| r.phase == Phase::Search) {
            best = best.max(r.value);
            out.push(best);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferOutcome {
    pub arms: Vec<TransferArm>,
}

impl TransferOutcome {
    pub fn arm(&self, mix: f64) -> Option<&TransferArm> {
        self.arms.iter().find(|a| (a.mix - mix).abs() < 1e-12)
    }

    /// `iteration,best_mix100,best_mix50,best_mix0` (one column per arm,
    /// named after its mix in percent), values mapped through `kpi`.
    pub fn write_comparison_csv<W: Write>(&self, w: W, kpi: impl Fn(f64) -> f64) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["iteration".to_string()];
        header.extend(
            self.arms
                .iter()
                .map(|a| format!("best_mix{}", (a.mix * 100.0).round() as i64)),
        );
        wtr.write_record(&header)?;
        let curves: Vec<Vec<f64>> = self.arms.iter().map(|a| a.curve()).collect();
        let len = curves.iter().map(|c| c.len()).max().unwrap_or(0);
        for i in 0..len {
            let mut row = vec![i.to_string()];
            for c in &curves {
                row.push(c.get(i).map_or_else(String::new, |v| format!("{:.6}", kpi(*v))));
            }
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// One TuRBO run per mix, each from its own seeded dataset. Arms run
/// concurrently and come back in the order of `mixes`.
pub fn run_transfer_experiment(
    source: &RunTrace,
    eval: &EvalFn,
    bounds: &[[f64; 2]],
    mixes: &[f64],
    n_init: usize,
    config: &TurboConfig,
) -> Result<TransferOutcome> {
    let arms = mixes
        .par_iter()
        .map(|&mix| {
            let plan = TransferPlan {
                mix,
                n_init,
                seed: config.seed,
            };
            let seeded = build_seeded_dataset(&plan, source, eval, bounds)?;
            let outcome = run_turbo_from(eval, config, seeded)?;
            Ok(TransferArm { mix, outcome })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TransferOutcome { arms })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(x: &[f64]) -> Result<f64> {
        Ok(-x.iter().map(|v| (v - 0.3) * (v - 0.3)).sum::<f64>())
    }

    #[test]
    fn split_counts() {
        let p = TransferPlan {
            mix: 0.5,
            n_init: 228,
            seed: 0,
        };
        assert_eq!((p.n_fresh(), p.n_copied()), (114, 114));
        let p = TransferPlan {
            mix: 0.0,
            n_init: 10,
            seed: 0,
        };
        assert_eq!((p.n_fresh(), p.n_copied()), (0, 10));
        let p = TransferPlan {
            mix: 0.35,
            n_init: 10,
            seed: 0,
        };
        assert_eq!(p.n_fresh(), 4);
    }

    #[test]
    fn full_mix_equals_cold_design() {
        let b = vec![[0.0, 1.0]; 3];
        let src = sample_source(&quad, &b, 8, 99).unwrap();
        let p = TransferPlan {
            mix: 1.0,
            n_init: 8,
            seed: 5,
        };
        let seeded = build_seeded_dataset(&p, &src, &quad, &b).unwrap();
        let cold = sample_source(&quad, &b, 8, 5).unwrap();
        assert_eq!(seeded, cold);
    }

    #[test]
    fn zero_mix_copies_everything() {
        let b = vec![[0.0, 1.0]; 3];
        let src = sample_source(&quad, &b, 8, 99).unwrap();
        let calls = std::sync::atomic::AtomicUsize::new(0);
        let counting = |x: &[f64]| {
            calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            quad(x)
        };
        let p = TransferPlan {
            mix: 0.0,
            n_init: 6,
            seed: 5,
        };
        let seeded = build_seeded_dataset(&p, &src, &counting, &b).unwrap();
        assert_eq!(calls.into_inner(), 0);
        assert_eq!(seeded.len(), 6);
        assert!(seeded.records.iter().all(|r| r.phase == Phase::Copied));
        assert_eq!(seeded.records[2].point, src.records[2].point);
    }

    #[test]
    fn mismatched_source_is_rejected() {
        let src = sample_source(&quad, &[[0.0, 1.0]; 2], 4, 1).unwrap();
        let p = TransferPlan {
            mix: 0.5,
            n_init: 4,
            seed: 1,
        };
        assert!(matches!(
            build_seeded_dataset(&p, &src, &quad, &[[0.0, 1.0]; 3]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
