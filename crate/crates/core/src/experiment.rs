//! Glue between the simulator and the optimizers.

use crate::bo::EvalFn;
use crate::error::Result;
use crate::morbo::ObjectiveVector;
use crate::netsim::{EvalReport, EvalSettings, Simulator};
use crate::scenario::{DecisionVector, ScenarioSpec};

/// A simulator plus the decision layout the optimizers search over.
///
/// Optimizers see the normalized objective, the log of the weighted
/// geometric-mean rate, so values sit around 13-14 for Mbps-level rates
/// regardless of how many users there are.
#[derive(Debug)]
pub struct Problem {
    sim: Simulator,
    joint: bool,
}

impl Problem {
    pub fn new(spec: ScenarioSpec, settings: EvalSettings, joint: bool) -> Result<Self> {
        Ok(Self {
            sim: Simulator::new(spec, settings)?,
            joint,
        })
    }

    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }

    pub fn spec(&self) -> &ScenarioSpec {
        self.sim.spec()
    }

    pub fn is_joint(&self) -> bool {
        self.joint
    }

    pub fn n_cells(&self) -> usize {
        self.sim.n_cells()
    }

    pub fn dim(&self) -> usize {
        if self.joint {
            2 * self.n_cells()
        } else {
            self.n_cells()
        }
    }

    pub fn bounds(&self) -> Vec<[f64; 2]> {
        DecisionVector::bounds(self.n_cells(), self.joint)
    }

    pub fn decision(&self, x: &[f64]) -> Result<DecisionVector> {
        DecisionVector::from_vec(x, self.n_cells(), self.joint)
    }

    pub fn baseline(&self) -> DecisionVector {
        DecisionVector::baseline_3gpp(self.n_cells(), self.joint)
    }

    /// All tilts at 0° (boresight on the horizon), beamwidths at baseline.
    pub fn horizon_start(&self) -> Vec<f64> {
        let mut x = self.baseline().to_vec();
        x[..self.n_cells()].iter_mut().for_each(|t| *t = 0.0);
        x
    }

    pub fn report(&self, x: &[f64]) -> Result<EvalReport> {
        self.sim.evaluate(&self.decision(x)?)
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.report(x)?.normalized_objective)
    }

    pub fn eval_fn(&self) -> impl Fn(&[f64]) -> Result<f64> + Sync + '_ {
        move |x: &[f64]| self.value(x)
    }

    /// GUE sum-log-rate and UAV coverage; coverage is 0 without UAVs.
    pub fn objectives(&self, x: &[f64]) -> Result<ObjectiveVector> {
        let r = self.report(x)?;
        Ok(ObjectiveVector::new(r.gue_objective, r.uav_coverage.unwrap_or(0.0)))
    }

    /// MORBO reference point: the baseline GUE objective lowered by 10% of
    /// its magnitude, and zero coverage.
    pub fn morbo_reference(&self) -> Result<ObjectiveVector> {
        let g = self.objectives(&self.baseline().to_vec())?.gue_obj;
        Ok(ObjectiveVector::new(g - 0.1 * g.abs(), 0.0))
    }

    /// Same as [`Problem::eval_fn`] but as a trait object.
    pub fn as_eval(&self) -> Box<EvalFn<'_>> {
        Box::new(self.eval_fn())
    }
}

/// Reporting scale for normalized objective values: the weighted
/// geometric-mean rate in Mbps.
pub fn kpi_mbps(value: f64) -> f64 {
    value.exp() / 1e6
}
