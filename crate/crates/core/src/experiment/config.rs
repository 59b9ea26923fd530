use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::TargetKind;
use crate::error::{invalid, Error, Result};
use crate::integrators::{StepScheme, DEFAULT_SUBSTEPS};
use crate::network::Architecture;
use crate::training::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ArchSweep,
    TargetStudy,
    DensityStudy,
    Trajectory,
    OrderStudy,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::ArchSweep,
        ExperimentKind::TargetStudy,
        ExperimentKind::DensityStudy,
        ExperimentKind::Trajectory,
        ExperimentKind::OrderStudy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::ArchSweep => "arch_sweep",
            ExperimentKind::TargetStudy => "target_study",
            ExperimentKind::DensityStudy => "density_study",
            ExperimentKind::Trajectory => "trajectory",
            ExperimentKind::OrderStudy => "order_study",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown experiment `{s}`")))
    }
}

/// One grid cell: hidden layers × neurons per layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub layers: usize,
    pub neurons: usize,
}

impl ArchSpec {
    pub fn architecture(&self, dim: usize) -> Result<Architecture> {
        Architecture::new(dim, self.layers, self.neurons)
    }
}

/// A declarative experiment manifest, read from JSON or TOML.
///
/// Every field except `experiment` and `system` has a default, so a minimal
/// file names just those two.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub system: String,
    /// Time lag; the system's default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "defaults::pairs")]
    pub pairs: usize,
    #[serde(default = "defaults::iterations")]
    pub iterations: usize,
    #[serde(default = "defaults::learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "defaults::lr_decay")]
    pub lr_decay: f64,
    #[serde(default = "defaults::yes")]
    pub shuffle: bool,
    #[serde(default = "defaults::trace_every")]
    pub trace_every: usize,
    #[serde(default)]
    pub seed: u64,
    /// Independent initializations averaged per sweep cell.
    #[serde(default = "defaults::runs")]
    pub runs: usize,
    /// Worker threads; all cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(default = "defaults::output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "defaults::archs")]
    pub archs: Vec<ArchSpec>,
    #[serde(default = "defaults::schemes")]
    pub schemes: Vec<TargetKind>,
    #[serde(default = "defaults::densities")]
    pub densities: Vec<usize>,
    #[serde(default = "defaults::update_budget")]
    pub update_budget: usize,
    #[serde(default = "defaults::order_dts")]
    pub order_dts: Vec<f64>,
    #[serde(default = "defaults::substeps")]
    pub substeps: usize,
    /// Trajectory overrides; the system's own setup when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    /// Keep every `thin`-th trajectory row in the CSV output.
    #[serde(default = "defaults::thin")]
    pub thin: usize,
    /// Directory with `params_<scheme>.json` files to reuse instead of training.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params_dir: Option<PathBuf>,
    /// Exponent on the inducer term of the toggle switch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toggle_eta: Option<f64>,
}

mod defaults {
    use super::*;

    pub fn pairs() -> usize {
        500
    }
    pub fn iterations() -> usize {
        500
    }
    pub fn learning_rate() -> f64 {
        TrainConfig::default().learning_rate
    }
    pub fn lr_decay() -> f64 {
        TrainConfig::default().lr_decay
    }
    pub fn yes() -> bool {
        true
    }
    pub fn trace_every() -> usize {
        1
    }
    pub fn runs() -> usize {
        10
    }
    pub fn output_dir() -> PathBuf {
        PathBuf::from("out")
    }
    pub fn archs() -> Vec<ArchSpec> {
        vec![ArchSpec { layers: 1, neurons: 6 }]
    }
    pub fn schemes() -> Vec<TargetKind> {
        StepScheme::ALL.into_iter().map(TargetKind::Scheme).collect()
    }
    pub fn densities() -> Vec<usize> {
        vec![100, 500, 2000, 10000]
    }
    pub fn update_budget() -> usize {
        1_000_000
    }
    pub fn order_dts() -> Vec<f64> {
        vec![0.2, 0.1, 0.05, 0.025]
    }
    pub fn substeps() -> usize {
        DEFAULT_SUBSTEPS
    }
    pub fn thin() -> usize {
        1
    }
}

impl ExperimentConfig {
    /// A config with every default filled in.
    pub fn new(experiment: ExperimentKind, system: impl Into<String>) -> Self {
        ExperimentConfig {
            experiment,
            system: system.into(),
            dt: None,
            pairs: defaults::pairs(),
            iterations: defaults::iterations(),
            learning_rate: defaults::learning_rate(),
            lr_decay: defaults::lr_decay(),
            shuffle: true,
            trace_every: defaults::trace_every(),
            seed: 0,
            runs: defaults::runs(),
            jobs: None,
            output_dir: defaults::output_dir(),
            archs: defaults::archs(),
            schemes: defaults::schemes(),
            densities: defaults::densities(),
            update_budget: defaults::update_budget(),
            order_dts: defaults::order_dts(),
            substeps: defaults::substeps(),
            x0: None,
            t0: None,
            t_final: None,
            thin: defaults::thin(),
            params_dir: None,
            toggle_eta: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a `.toml` file as TOML and anything else as JSON.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Self::from_toml(&text),
            _ => Self::from_json(&text),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            iterations: self.iterations,
            learning_rate: self.learning_rate,
            lr_decay: self.lr_decay,
            shuffle_each_iteration: self.shuffle,
            seed: self.seed,
            trace_every: self.trace_every,
        }
    }

    /// The single architecture used by every experiment except the sweep.
    pub fn single_arch(&self) -> Result<ArchSpec> {
        match self.archs.as_slice() {
            [a] => Ok(*a),
            _ => Err(invalid(format!("{} expects exactly one architecture, got {}", self.experiment, self.archs.len()))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.system.is_empty() {
            return Err(invalid("system id is empty"));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(invalid(format!("dt must be positive, got {dt}")));
            }
        }
        if self.pairs == 0 {
            return Err(invalid("pairs must be at least 1"));
        }
        if self.runs == 0 {
            return Err(invalid("runs must be at least 1"));
        }
        if self.jobs == Some(0) {
            return Err(invalid("jobs must be at least 1"));
        }
        if self.substeps == 0 {
            return Err(invalid("substeps must be at least 1"));
        }
        if self.thin == 0 {
            return Err(invalid("thin must be at least 1"));
        }
        self.train_config().validate()?;
        if self.archs.is_empty() {
            return Err(invalid("architecture grid is empty"));
        }
        for a in &self.archs {
            a.architecture(1)?;
        }
        match self.experiment {
            ExperimentKind::ArchSweep => {}
            ExperimentKind::TargetStudy | ExperimentKind::Trajectory => {
                self.single_arch()?;
                if self.schemes.is_empty() && self.experiment == ExperimentKind::TargetStudy {
                    return Err(invalid("target study needs at least one scheme"));
                }
            }
            ExperimentKind::DensityStudy => {
                self.single_arch()?;
                if self.densities.is_empty() || self.densities.contains(&0) {
                    return Err(invalid("densities must be a non-empty list of positive counts"));
                }
                if self.update_budget == 0 {
                    return Err(invalid("update budget must be positive"));
                }
            }
            ExperimentKind::OrderStudy => {
                if self.order_dts.len() < 3 {
                    return Err(invalid("order study needs at least 3 time lags"));
                }
                if self.schemes.iter().all(|s| *s == TargetKind::Reference) {
                    return Err(invalid("order study needs at least one finite-difference scheme"));
                }
            }
        }
        if let (Some(t0), Some(tf)) = (self.t0, self.t_final) {
            if tf.is_nan() || tf <= t0 {
                return Err(invalid("t_final must exceed t0"));
            }
        }
        if let Some(eta) = self.toggle_eta {
            if !eta.is_finite() {
                return Err(invalid("toggle_eta must be finite"));
            }
        }
        Ok(())
    }
}

/// Iterations for a density cell: `round(budget / J)`, at least 1.
pub fn density_iterations(update_budget: usize, pairs: usize) -> usize {
    ((update_budget as f64 / pairs as f64).round() as usize).max(1)
}
