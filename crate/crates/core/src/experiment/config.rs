//! Declarative experiment configuration: one TOML file describes the data
//! source, model, training, inference, and calibration choices; every run
//! directory receives a JSON snapshot sufficient to replay the run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{SynthConfig, DEFAULT_FRACTIONS};
use crate::model::ModelConfig;
use crate::training::TrainConfig;
use crate::{Error, Result};

/// Where the hourly series comes from: a CSV export (with optional event
/// sidecar) or the in-process synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct DataConfig {
    /// When set, ingest this CSV; otherwise generate synthetically.
    pub csv: Option<PathBuf>,
    pub synth: SynthConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceConfig {
    /// MC passes per forecast at evaluation time.
    pub t_passes: usize,
    pub seed: u64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig { t_passes: 100, seed: 2024 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMethod {
    None,
    #[default]
    Isotonic,
    Conformal,
}

/// Windowing geometry on top of the model's lookback/horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    pub stride_train: usize,
    pub fractions: [f64; 4],
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig { stride_train: 1, fractions: DEFAULT_FRACTIONS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub inference: InferenceConfig,
    pub calibration: CalibrationMethod,
    pub windows: WindowConfig,
}

impl ExperimentConfig {
    /// Laptop-scale defaults.
    pub fn desk() -> Self {
        ExperimentConfig {
            model: ModelConfig::desk(),
            train: TrainConfig::desk(),
            ..ExperimentConfig::default()
        }
    }

    /// Reference-scale architecture and training budget.
    pub fn paper() -> Self {
        ExperimentConfig {
            model: ModelConfig::paper(),
            train: TrainConfig::paper(),
            data: DataConfig {
                csv: None,
                synth: SynthConfig { hours: 26_304, ..SynthConfig::default() },
            },
            ..ExperimentConfig::default()
        }
    }

    pub fn by_profile(profile: &str) -> Result<Self> {
        match profile {
            "desk" => Ok(Self::desk()),
            "paper" => Ok(Self::paper()),
            other => Err(Error::Config(format!(
                "unknown profile '{other}' (expected 'desk' or 'paper')"
            ))),
        }
    }

    /// Parse a TOML experiment file.
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Override every seed at once (data generation, training, inference).
    pub fn set_seed(&mut self, seed: u64) {
        self.data.synth.seed = seed;
        self.train.seed = seed;
        self.inference.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if self.inference.t_passes == 0 {
            return Err(Error::Config("inference.t_passes must be at least 1".into()));
        }
        if self.windows.stride_train == 0 {
            return Err(Error::Config("windows.stride_train must be at least 1".into()));
        }
        Ok(())
    }

    /// Pretty JSON snapshot (written into every run directory).
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        std::fs::write(path, bytes)?;
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let cfg: ExperimentConfig = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Format(format!("config snapshot {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
