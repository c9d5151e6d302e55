//! Python bindings: evaluate tilt settings and run TuRBO from Python.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use uavtilt::experiment::{kpi_mbps, Problem};
use uavtilt::netsim::{EvalReport, EvalSettings};
use uavtilt::scenario::{DecisionVector, ScenarioSpec};
use uavtilt::turbo::{run_turbo, TurboConfig};

fn py_err(e: uavtilt::Error) -> PyErr {
    match e {
        uavtilt::Error::Config(_) | uavtilt::Error::DimensionMismatch { .. } | uavtilt::Error::EmptyUavSet => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn preset(name: &str) -> PyResult<ScenarioSpec> {
    match name {
        "standard" => Ok(ScenarioSpec::standard()),
        "uniform_uavs" => Ok(ScenarioSpec::uniform_uavs()),
        "ground_only" => Ok(ScenarioSpec::ground_only()),
        _ => Err(PyValueError::new_err(format!("unknown preset `{name}`"))),
    }
}

/// Preset fields overridden by the keys of a JSON object.
fn layered(name: &str, overrides: Option<&str>) -> PyResult<ScenarioSpec> {
    let base = preset(name)?;
    let Some(text) = overrides else { return Ok(base) };
    let mut v = serde_json::to_value(&base).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let patch: serde_json::Value = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let (Some(obj), Some(patch)) = (v.as_object_mut(), patch.as_object()) else {
        return Err(PyValueError::new_err("scenario overrides must be a JSON object"));
    };
    for (k, val) in patch {
        if !obj.contains_key(k) {
            return Err(PyValueError::new_err(format!("unknown scenario field `{k}`")));
        }
        obj.insert(k.clone(), val.clone());
    }
    ScenarioSpec::from_json(&v.to_string()).map_err(py_err)
}

fn report_dict<'py>(py: Python<'py>, r: &EvalReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("objective", r.objective)?;
    d.set_item("normalized_objective", r.normalized_objective)?;
    d.set_item("geo_mean_rate_mbps", r.geo_mean_rate_bps / 1e6)?;
    d.set_item("gue_geo_mean_rate_mbps", r.gue_geo_mean_rate_bps / 1e6)?;
    d.set_item("uav_coverage", r.uav_coverage)?;
    d.set_item("uav_outage", r.uav_outage)?;
    d.set_item("sinr_db", r.sinr_db.clone())?;
    d.set_item("rate_bps", r.rate_bps.clone())?;
    d.set_item("serving_cell", r.assoc.clone())?;
    d.set_item("kind", r.kinds.iter().map(|k| k.as_str()).collect::<Vec<_>>())?;
    Ok(d)
}

/// A fixed deployment with its simulator.
#[pyclass(name = "Scenario", module = "uavtilt_py")]
struct PyScenario {
    problem: Problem,
}

#[pymethods]
impl PyScenario {
    /// `preset` is one of standard, uniform_uavs, ground_only; `overrides`
    /// is a JSON object of scenario fields.
    #[new]
    #[pyo3(signature = (preset="standard", overrides=None, joint_hpbw=false, n_fading_draws=None))]
    fn new(preset: &str, overrides: Option<&str>, joint_hpbw: bool, n_fading_draws: Option<usize>) -> PyResult<Self> {
        let spec = layered(preset, overrides)?;
        let mut settings = EvalSettings::default();
        if let Some(n) = n_fading_draws {
            settings.n_fading_draws = n;
        }
        let problem = Problem::new(spec, settings, joint_hpbw).map_err(py_err)?;
        Ok(Self { problem })
    }

    #[getter]
    fn n_cells(&self) -> usize {
        self.problem.n_cells()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    /// Per-coordinate `(low, high)` search bounds.
    fn bounds(&self) -> Vec<(f64, f64)> {
        self.problem.bounds().iter().map(|b| (b[0], b[1])).collect()
    }

    fn spec_json(&self) -> PyResult<String> {
        self.problem.spec().to_json().map_err(py_err)
    }

    /// Evaluate per-cell tilts (degrees) and, for joint scenarios, vertical
    /// beamwidths.
    #[pyo3(signature = (tilts_deg, vhpbw_deg=None))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        tilts_deg: Vec<f64>,
        vhpbw_deg: Option<Vec<f64>>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let d = match vhpbw_deg {
            Some(v) => DecisionVector::joint(tilts_deg, v),
            None => DecisionVector::tilt_only(tilts_deg),
        };
        d.validate(self.problem.n_cells()).map_err(py_err)?;
        let r = py.detach(|| self.problem.simulator().evaluate(&d)).map_err(py_err)?;
        report_dict(py, &r)
    }

    /// All cells at -12° with the default beamwidth.
    fn baseline<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = self.problem.baseline();
        let r = py.detach(|| self.problem.simulator().evaluate(&d)).map_err(py_err)?;
        report_dict(py, &r)
    }

    /// TuRBO on the normalized objective. Returns the best point, its
    /// geometric-mean rate and the best-so-far curve in Mbps.
    #[pyo3(signature = (max_evals=100, n_regions=1, n_init=None, seed=0))]
    fn optimize<'py>(
        &self,
        py: Python<'py>,
        max_evals: usize,
        n_regions: usize,
        n_init: Option<usize>,
        seed: u64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let cfg = TurboConfig {
            max_evals,
            n_regions,
            n_init,
            seed,
            ..TurboConfig::default()
        };
        let eval = self.problem.eval_fn();
        let bounds = self.problem.bounds();
        let o = py.detach(|| run_turbo(&eval, &bounds, &cfg)).map_err(py_err)?;
        let best = o
            .trace
            .best()
            .ok_or_else(|| PyRuntimeError::new_err("no evaluations"))?;
        let d = PyDict::new(py);
        d.set_item("best_x", best.point.clone())?;
        d.set_item("best_geo_mean_mbps", kpi_mbps(best.value))?;
        d.set_item(
            "curve_mbps",
            o.trace
                .records
                .iter()
                .map(|r| kpi_mbps(r.best_value))
                .collect::<Vec<_>>(),
        )?;
        d.set_item("n_evaluations", o.trace.len())?;
        d.set_item("aborted", o.trace.aborted.clone())?;
        Ok(d)
    }
}

#[pymodule]
fn uavtilt_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyScenario>()?;
    Ok(())
}
