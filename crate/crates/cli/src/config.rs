//! Experiment configuration files.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use uavtilt::bo::BoConfig;
use uavtilt::morbo::MorboConfig;
use uavtilt::netsim::EvalSettings;
use uavtilt::scenario::{DecisionVector, ScenarioSpec, UavMode};
use uavtilt::turbo::TurboConfig;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Evaluate,
    Optimize,
    Pareto,
    Transfer,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Vanilla,
    #[default]
    Iterative,
    Turbo,
}

/// Named starting scenario that `scenario` fields are layered over.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioPreset {
    #[default]
    Standard,
    UniformUavs,
    GroundOnly,
}

impl ScenarioPreset {
    pub fn spec(self) -> ScenarioSpec {
        match self {
            Self::Standard => ScenarioSpec::standard(),
            Self::UniformUavs => ScenarioSpec::uniform_uavs(),
            Self::GroundOnly => ScenarioSpec::ground_only(),
        }
    }
}

/// Which decision `evaluate` reports on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DecisionInput {
    /// `"baseline"` (all tilts −12°, beamwidths 10°) or `"horizon"` (all 0°).
    Named(String),
    Explicit(DecisionVector),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParetoSettings {
    /// One MORBO run per UAV placement mode; each writes its own archive.
    pub uav_modes: Vec<UavMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferSettings {
    /// Source scenario preset; `source_scenario` fields are layered over it.
    #[serde(default)]
    pub source_preset: Option<ScenarioPreset>,
    #[serde(default)]
    pub source_scenario: Option<Value>,
    /// A `trace.json` written by an earlier optimize run, used instead of
    /// sampling a source scenario.
    #[serde(default)]
    pub source_trace: Option<PathBuf>,
    #[serde(default = "default_mixes")]
    pub mixes: Vec<f64>,
    /// Initial dataset size; twice the dimension when absent.
    #[serde(default)]
    pub n_init: Option<usize>,
    /// Seed of the sampled source design; the run seed plus 1000 when absent.
    #[serde(default)]
    pub source_seed: Option<u64>,
}

fn default_mixes() -> Vec<f64> {
    vec![1.0, 0.5, 0.0]
}

/// The file format read by `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub scenario_preset: ScenarioPreset,
    /// Partial scenario; present keys replace the preset's values.
    #[serde(default)]
    pub scenario: Option<Value>,
    #[serde(default)]
    pub eval: EvalSettings,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    #[serde(default)]
    pub joint_hpbw: bool,
    /// Optimizer seed. The deployment has its own `scenario.seed`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub decision: Option<DecisionInput>,
    #[serde(default)]
    pub bo: BoConfig,
    #[serde(default)]
    pub turbo: TurboConfig,
    #[serde(default)]
    pub morbo: MorboConfig,
    #[serde(default)]
    pub pareto: Option<ParetoSettings>,
    #[serde(default)]
    pub transfer: Option<TransferSettings>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// Layer `overrides` (a JSON object) over `base`.
pub fn layered_spec(base: ScenarioSpec, overrides: Option<&Value>) -> Result<ScenarioSpec, CliError> {
    let Some(over) = overrides else {
        base.validate()?;
        return Ok(base);
    };
    let Value::Object(over) = over else {
        return Err(CliError::Config("scenario must be a JSON object".into()));
    };
    let mut merged = serde_json::to_value(&base).map_err(|e| CliError::Runtime(e.to_string()))?;
    let obj = merged.as_object_mut().expect("spec serializes to an object");
    for (k, v) in over {
        if !obj.contains_key(k) {
            return Err(CliError::Config(format!("unknown scenario field `{k}`")));
        }
        obj.insert(k.clone(), v.clone());
    }
    let spec: ScenarioSpec = serde_json::from_value(merged).map_err(|e| CliError::Config(format!("scenario: {e}")))?;
    spec.validate()?;
    Ok(spec)
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn spec(&self) -> Result<ScenarioSpec, CliError> {
        layered_spec(self.scenario_preset.spec(), self.scenario.as_ref())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.spec()?;
        self.eval.validate()?;
        match self.mode {
            Mode::Evaluate => {
                if let Some(DecisionInput::Named(n)) = &self.decision {
                    if n != "baseline" && n != "horizon" {
                        return Err(CliError::Config(format!("unknown decision `{n}` (baseline, horizon)")));
                    }
                }
            }
            Mode::Optimize => match self.optimizer {
                OptimizerKind::Vanilla | OptimizerKind::Iterative => self.bo.validate()?,
                OptimizerKind::Turbo => self.turbo.validate()?,
            },
            Mode::Pareto => {
                self.morbo.validate()?;
                if self.pareto.as_ref().is_some_and(|p| p.uav_modes.is_empty()) {
                    return Err(CliError::Config("pareto.uav_modes is empty".into()));
                }
            }
            Mode::Transfer => {
                let Some(t) = &self.transfer else {
                    return Err(CliError::Config("transfer mode needs a `transfer` section".into()));
                };
                let sampled = t.source_preset.is_some() || t.source_scenario.is_some();
                if sampled == t.source_trace.is_some() {
                    return Err(CliError::Config(
                        "transfer needs exactly one source: source_preset/source_scenario or source_trace".into(),
                    ));
                }
                if t.mixes.is_empty() || t.mixes.iter().any(|m| !(0.0..=1.0).contains(m)) {
                    return Err(CliError::Config(
                        "transfer.mixes must be nonempty values in [0, 1]".into(),
                    ));
                }
                self.turbo.validate()?;
            }
        }
        Ok(())
    }

    /// Digest of the effective configuration; the output location is not
    /// part of it.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(&Sha256::digest(text.as_bytes())[..8])
    }
}
