//! Experiment configuration: one JSON file drives a full sweep.
//!
//! A config names the system and its initial state, the (h, N) sampling
//! grids, the tableaus and seeds to train, and where artifacts go. Optional
//! training overrides tweak the optimizer or network without abandoning the
//! defaults. Unknown keys are rejected so typos fail loudly, and parsing
//! then re-serializing a config preserves its content up to key order.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::hamiltonians::{HamiltonianSystem, SystemName};
use crate::integrators::training_tableau;
use crate::training::TrainConfig;

/// Optional deviations from the default training setup.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lbfgs_iters_per_epoch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lbfgs_history: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_line_search_evals: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grad_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden_layers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden_width: Option<usize>,
}

fn default_extrap_ratio() -> usize {
    4
}

/// A full experiment: which system, which sampling grids, which methods.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemName,
    pub initial_value: Vec<f64>,
    /// Sampling grids as (step size h, transition count N) pairs.
    pub grid: Vec<(f64, usize)>,
    /// Training tableau names, e.g. "mirk4" or "rk4".
    pub tableaus: Vec<String>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub train: TrainOverrides,
    /// Test horizon as a multiple of the training horizon.
    #[serde(default = "default_extrap_ratio")]
    pub extrap_horizon_ratio: usize,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    /// Check hard invariants; returns human-readable warnings for legal but
    /// unusual settings (grids off the standard 20-unit training horizon).
    pub fn validate(&self) -> Result<Vec<String>> {
        let system = HamiltonianSystem::new(self.system);
        if self.initial_value.len() != system.dim() {
            return Err(Error::DimensionMismatch {
                expected: system.dim(),
                got: self.initial_value.len(),
            });
        }
        if self.grid.is_empty() {
            return Err(Error::InvalidArgument("grid list is empty".into()));
        }
        if self.tableaus.is_empty() {
            return Err(Error::InvalidArgument("tableau list is empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidArgument("seed list is empty".into()));
        }
        if self.extrap_horizon_ratio < 1 {
            return Err(Error::InvalidArgument(
                "extrapolation horizon ratio must be at least 1".into(),
            ));
        }
        for name in &self.tableaus {
            training_tableau(name)?;
        }
        let mut warnings = Vec::new();
        for &(h, n) in &self.grid {
            if !(h > 0.0) || n == 0 {
                return Err(Error::InvalidArgument(format!(
                    "grid entry (h={h}, N={n}) is not positive"
                )));
            }
            let horizon = h * n as f64;
            if (horizon - 20.0).abs() > 1e-9 {
                warnings.push(format!(
                    "grid (h={h}, N={n}) trains on [0, {horizon}] rather than the standard [0, 20]"
                ));
            }
        }
        Ok(warnings)
    }

    /// Materialize the training configuration for one run of the sweep.
    pub fn train_config(&self, h: f64, n: usize, tableau: &str, seed: u64) -> TrainConfig {
        let mut cfg = TrainConfig::new(self.system.to_string().as_str(), tableau, h, n, seed);
        let o = &self.train;
        if let Some(v) = o.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = o.lbfgs_iters_per_epoch {
            cfg.lbfgs_iters_per_epoch = v;
        }
        if let Some(v) = o.lbfgs_history {
            cfg.lbfgs_history = v;
        }
        if let Some(v) = o.c1 {
            cfg.c1 = v;
        }
        if let Some(v) = o.c2 {
            cfg.c2 = v;
        }
        if let Some(v) = o.max_line_search_evals {
            cfg.max_line_search_evals = v;
        }
        if let Some(v) = o.grad_tol {
            cfg.grad_tol = v;
        }
        if let Some(v) = o.hidden_layers {
            cfg.hidden_layers = v;
        }
        if let Some(v) = o.hidden_width {
            cfg.hidden_width = v;
        }
        cfg
    }
}
