//! Experiment configuration: one JSON document plus command-line overrides.

use std::path::Path;

use banditpath::{BanditSpec, Variant};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpecConfig {
    pub mu: Vec<f64>,
    pub sigma_tilde: Vec<f64>,
    pub horizon: usize,
    /// Variance scale; arm `k` has variance `gamma * sigma_tilde[k]^2`.
    pub gamma: f64,
    pub beta: f64,
    pub c: f64,
}

impl Default for SpecConfig {
    fn default() -> Self {
        Self {
            mu: vec![1.0, 2.0, 3.0],
            sigma_tilde: vec![1.0; 3],
            horizon: 20,
            gamma: 0.36,
            beta: 10.0,
            c: 0.4,
        }
    }
}

impl SpecConfig {
    pub fn build(&self) -> Result<BanditSpec, CliError> {
        BanditSpec::new(
            self.mu.clone(),
            self.sigma_tilde.clone(),
            self.horizon,
            self.gamma,
            self.beta,
            self.c,
        )
        .map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub trials: u64,
    pub master_seed: u64,
    pub bin_width: f64,
    /// Extra regret windows `[lo, hi)` whose conditioned trajectory
    /// statistics are written alongside the histogram.
    pub windows: Vec<[f64; 2]>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            trials: 1_000_000,
            master_seed: 0,
            bin_width: 0.5,
            windows: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub r_step: f64,
    pub multistarts: usize,
    pub variant: Variant,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self {
            r_min: -15.0,
            r_max: 45.0,
            r_step: 1.0,
            multistarts: 8,
            variant: Variant::Simplified,
        }
    }
}

impl RateConfig {
    /// `r_min, r_min + r_step, ...` up to `r_max` inclusive (with a little
    /// slack for rounding).
    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        if !(self.r_min.is_finite() && self.r_max.is_finite() && self.r_step > 0.0 && self.r_step.is_finite()) {
            return Err(CliError::Config("rate grid needs finite r_min, r_max and r_step > 0".into()));
        }
        if self.r_max < self.r_min {
            return Err(CliError::Config(format!("r_max {} is below r_min {}", self.r_max, self.r_min)));
        }
        let count = ((self.r_max - self.r_min) / self.r_step + 1e-9).floor() as usize + 1;
        if count > 1_000_000 {
            return Err(CliError::Config(format!("rate grid of {count} points is too large")));
        }
        Ok((0..count).map(|i| self.r_min + i as f64 * self.r_step).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoryConfig {
    pub r_window: [f64; 2],
    pub trials: u64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            r_window: [6.0, 6.5],
            trials: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyConfig {
    /// Means of the two arms; noise and temperature come from `spec`.
    pub mu: [f64; 2],
    pub r_values: Vec<f64>,
    /// Regret interval holding exactly one change of the branch count.
    pub bracket: [f64; 2],
    pub grid_points: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            mu: [1.0, 2.0],
            r_values: vec![1.0, 3.0],
            bracket: [1.0, 3.0],
            grid_points: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub c_values: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            c_values: (0..=20).map(|i| i as f64 / 20.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub spec: SpecConfig,
    pub simulate: SimulateConfig,
    pub rate: RateConfig,
    pub trajectory: TrajectoryConfig,
    pub toy: ToyConfig,
    pub sweep: SweepConfig,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub r_step: Option<f64>,
    pub c: Option<f64>,
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
}

impl ExperimentConfig {
    /// Parses a config file. A `metadata.json` written by a previous run is
    /// accepted too; its `config` entry is used.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("malformed JSON: {e}")))?;
        let inner = match value.as_object() {
            Some(obj) if obj.contains_key("command") && obj.contains_key("config") => obj["config"].clone(),
            _ => value,
        };
        serde_json::from_value(inner).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.simulate.master_seed = seed;
        }
        if let Some(trials) = o.trials {
            self.simulate.trials = trials;
            self.trajectory.trials = trials;
        }
        if let Some(v) = o.r_min {
            self.rate.r_min = v;
        }
        if let Some(v) = o.r_max {
            self.rate.r_max = v;
        }
        if let Some(v) = o.r_step {
            self.rate.r_step = v;
        }
        if let Some(v) = o.c {
            self.spec.c = v;
        }
        if let Some(v) = o.gamma {
            self.spec.gamma = v;
        }
        if let Some(v) = o.beta {
            self.spec.beta = v;
        }
    }

    pub fn seed(&self) -> u64 {
        self.simulate.master_seed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"spec": {"mu": [1, 2], "sigma": [1, 1]}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"extra": 1}"#).is_err());
        assert!(ExperimentConfig::from_json("[1, 2").is_err());
    }

    #[test]
    fn flags_win_over_file() {
        let mut cfg = ExperimentConfig::from_json(r#"{"spec": {"c": 0.1}, "simulate": {"trials": 5}}"#).unwrap();
        cfg.apply(&Overrides {
            c: Some(0.8),
            seed: Some(7),
            ..Overrides::default()
        });
        assert_eq!(cfg.spec.c, 0.8);
        assert_eq!(cfg.simulate.trials, 5);
        assert_eq!(cfg.seed(), 7);
    }

    #[test]
    fn metadata_documents_are_accepted() {
        let cfg = ExperimentConfig {
            rate: RateConfig {
                r_step: 0.25,
                ..RateConfig::default()
            },
            ..ExperimentConfig::default()
        };
        let meta = serde_json::json!({"command": "rate", "config": cfg, "wall_time_s": 1.0});
        assert_eq!(ExperimentConfig::from_json(&meta.to_string()).unwrap(), cfg);
    }

    #[test]
    fn grid_endpoints() {
        let rate = RateConfig {
            r_min: -1.0,
            r_max: 1.0,
            r_step: 0.1,
            ..RateConfig::default()
        };
        let grid = rate.grid().unwrap();
        assert_eq!(grid.len(), 21);
        assert!((grid[20] - 1.0).abs() < 1e-12);
        let bad = RateConfig {
            r_step: 0.0,
            ..RateConfig::default()
        };
        assert!(bad.grid().is_err());
    }
}
