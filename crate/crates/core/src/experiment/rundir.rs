//! Run-directory layout. A training run writes exactly
//! `{config.json, history.csv, best.ckpt, final.ckpt}`; later subcommands
//! add calibration and evaluation artifacts next to them.

use std::path::{Path, PathBuf};

use crate::calibration::{CalibrationMap, ConformalOffsets};
use crate::data::Scaler;
use crate::model::{Checkpoint, Model};
use crate::{Error, Result};

use super::config::ExperimentConfig;

#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    /// Create (or reuse) the directory.
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(RunDir { root: root.to_path_buf() })
    }

    /// Open an existing run directory; requires the config snapshot.
    pub fn open(root: &Path) -> Result<Self> {
        let dir = RunDir { root: root.to_path_buf() };
        if !dir.config_path().is_file() {
            return Err(Error::Config(format!(
                "{} is not a run directory (missing config.json)",
                root.display()
            )));
        }
        Ok(dir)
    }

    pub fn config_path(&self) -> PathBuf {
        self.root.join("config.json")
    }
    pub fn history_path(&self) -> PathBuf {
        self.root.join("history.csv")
    }
    pub fn best_checkpoint_path(&self) -> PathBuf {
        self.root.join("best.ckpt")
    }
    pub fn final_checkpoint_path(&self) -> PathBuf {
        self.root.join("final.ckpt")
    }
    pub fn calibration_path(&self) -> PathBuf {
        self.root.join("calibration.json")
    }
    pub fn conformal_path(&self) -> PathBuf {
        self.root.join("conformal.json")
    }
    pub fn coverage_table_path(&self) -> PathBuf {
        self.root.join("coverage_table.csv")
    }
    pub fn metrics_json_path(&self) -> PathBuf {
        self.root.join("metrics.json")
    }
    pub fn metrics_csv_path(&self) -> PathBuf {
        self.root.join("metrics.csv")
    }
    pub fn reliability_csv_path(&self) -> PathBuf {
        self.root.join("reliability.csv")
    }
    pub fn reliability_plot_path(&self) -> PathBuf {
        self.root.join("reliability.svg")
    }
    pub fn interval_plot_path(&self) -> PathBuf {
        self.root.join("interval_trace.svg")
    }
    pub fn forecasts_path(&self) -> PathBuf {
        self.root.join("forecasts.csv")
    }
    pub fn ablation_path(&self) -> PathBuf {
        self.root.join("ablation.csv")
    }
    pub fn report_path(&self) -> PathBuf {
        self.root.join("report.md")
    }

    pub fn load_config(&self) -> Result<ExperimentConfig> {
        ExperimentConfig::from_json_file(&self.config_path())
    }

    /// Best-epoch model plus the scaler it was trained with.
    pub fn load_best(&self) -> Result<(Model, Scaler)> {
        let ckpt = Checkpoint::load(&self.best_checkpoint_path())?;
        let model = ckpt.to_model()?;
        Ok((model, ckpt.scaler))
    }

    /// Calibration map, if `calibrate` has produced one.
    pub fn load_calibration(&self) -> Result<Option<CalibrationMap>> {
        let path = self.calibration_path();
        if !path.is_file() {
            return Ok(None);
        }
        let bytes = std::fs::read(&path)?;
        let map: CalibrationMap = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Format(format!("calibration map {}: {e}", path.display())))?;
        Ok(Some(map))
    }

    pub fn load_conformal(&self) -> Result<Option<ConformalOffsets>> {
        let path = self.conformal_path();
        if !path.is_file() {
            return Ok(None);
        }
        let bytes = std::fs::read(&path)?;
        let offsets: ConformalOffsets = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Format(format!("conformal offsets {}: {e}", path.display())))?;
        Ok(Some(offsets))
    }

    pub fn write_json<T: serde::Serialize>(&self, path: &Path, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        std::fs::write(path, bytes)?;
        Ok(())
    }
}
