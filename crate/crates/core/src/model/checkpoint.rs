//! Self-describing JSON checkpoints.
//!
//! A checkpoint carries everything needed to reproduce inference: a format
//! tag and version, the architecture config, the seed lineage, the training
//! epoch it was written at, the feature scaler fitted on the training rows,
//! and every parameter tensor with its name, shape, role, and row-major
//! values. Loading validates the tag, version, and full tensor layout
//! before any value is accepted.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::forward::Model;
use super::params::{ParamRole, ParamSet};
use crate::data::Scaler;
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "gridcast-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// One named parameter tensor, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorBlob {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub role: ParamRole,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    /// Seed the parameters were initialized from (lineage, not state).
    pub seed: u64,
    /// Training epoch the snapshot was taken at (0 = untrained).
    pub epoch: usize,
    pub scaler: Scaler,
    pub tensors: Vec<TensorBlob>,
}

impl Checkpoint {
    pub fn from_model(model: &Model, scaler: &Scaler, seed: u64, epoch: usize) -> Self {
        let tensors = model
            .params
            .entries
            .iter()
            .map(|e| TensorBlob {
                name: e.name.clone(),
                rows: e.rows,
                cols: e.cols,
                role: e.role,
                values: model.params.matrix(e).into_vec(),
            })
            .collect();
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: model.cfg.clone(),
            seed,
            epoch,
            scaler: scaler.clone(),
            tensors,
        }
    }

    /// Rebuild a model, verifying that the stored tensors exactly match the
    /// layout implied by the stored config.
    pub fn to_model(&self) -> Result<Model> {
        self.config.validate()?;
        let mut params = ParamSet::init(&self.config, self.seed);
        if self.tensors.len() != params.entries.len() {
            return Err(Error::Format(format!(
                "checkpoint has {} tensors, config implies {}",
                self.tensors.len(),
                params.entries.len()
            )));
        }
        let entries = params.entries.clone();
        for (blob, entry) in self.tensors.iter().zip(entries.iter()) {
            if blob.name != entry.name
                || blob.rows != entry.rows
                || blob.cols != entry.cols
                || blob.role != entry.role
            {
                return Err(Error::Format(format!(
                    "tensor {} ({}×{}, {:?}) does not match expected {} ({}×{}, {:?})",
                    blob.name,
                    blob.rows,
                    blob.cols,
                    blob.role,
                    entry.name,
                    entry.rows,
                    entry.cols,
                    entry.role
                )));
            }
            if blob.values.len() != entry.len() {
                return Err(Error::Format(format!(
                    "tensor {} has {} values, expected {}",
                    blob.name,
                    blob.values.len(),
                    entry.len()
                )));
            }
            params.values[entry.offset..entry.offset + entry.len()]
                .copy_from_slice(&blob.values);
        }
        Ok(Model { cfg: self.config.clone(), params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        fs::write(path, bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bytes = fs::read(path)?;
        let ckpt: Checkpoint = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Format(format!("checkpoint parse: {e}")))?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::Format(format!(
                "unrecognized checkpoint format tag {:?}",
                ckpt.format
            )));
        }
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {} (expected {})",
                ckpt.version, CHECKPOINT_VERSION
            )));
        }
        Ok(ckpt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::N_FEATURES;
    use crate::math::Matrix;
    use crate::model::forward;
    use crate::model::noise::Mode;
    use crate::rng::{derive, stream};

    fn small_model() -> Model {
        let mut cfg = ModelConfig::desk();
        cfg.n_layers = 1;
        cfg.n_heads = 2;
        cfg.d_model = 8;
        cfg.d_ff = 16;
        cfg.patch_len = 8;
        cfg.lookback = 24;
        cfg.horizon = 4;
        Model::new(cfg, 42).unwrap()
    }

    fn dummy_scaler() -> Scaler {
        let fm = crate::data::FeatureMatrix {
            start: chrono::DateTime::from_timestamp(0, 0).unwrap(),
            data: Matrix::from_fn(30, N_FEATURES, |r, c| ((r * 13 + c * 5) % 9) as f64),
            valid: vec![true; 30],
        };
        Scaler::fit(&fm, 0..30).unwrap()
    }

    #[test]
    fn roundtrip_preserves_everything() {
        let model = small_model();
        let scaler = dummy_scaler();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("best.ckpt");
        Checkpoint::from_model(&model, &scaler, 42, 7).save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded.epoch, 7);
        assert_eq!(loaded.seed, 42);
        let rebuilt = loaded.to_model().unwrap();
        assert_eq!(rebuilt.params.values, model.params.values);

        // Bit-identical inference from the rebuilt model.
        let x = Matrix::from_fn(24, N_FEATURES, |r, c| ((r * 31 + c * 7) % 13) as f64 * 0.1);
        let mut rng = derive(0, stream::PREDICT, 0);
        let a = forward(&model, &x, Mode::Deterministic, &mut rng).unwrap();
        let b = forward(&rebuilt, &x, Mode::Deterministic, &mut rng).unwrap();
        assert_eq!(a.values.as_slice(), b.values.as_slice());
    }

    #[test]
    fn scaler_preserved() {
        let model = small_model();
        let scaler = dummy_scaler();
        let ckpt = Checkpoint::from_model(&model, &scaler, 1, 0);
        let json = serde_json::to_string(&ckpt).unwrap();
        let back: Checkpoint = serde_json::from_str(&json).unwrap();
        assert_eq!(back.scaler.mean, scaler.mean);
        assert_eq!(back.scaler.std, scaler.std);
    }

    #[test]
    fn bad_format_tag_rejected() {
        let model = small_model();
        let mut ckpt = Checkpoint::from_model(&model, &dummy_scaler(), 1, 0);
        ckpt.format = "something-else".into();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        ckpt.save(&path).unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(Error::Format(_))));
    }

    #[test]
    fn bad_version_rejected() {
        let model = small_model();
        let mut ckpt = Checkpoint::from_model(&model, &dummy_scaler(), 1, 0);
        ckpt.version = 99;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v99.ckpt");
        ckpt.save(&path).unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(Error::Format(_))));
    }

    #[test]
    fn tampered_shape_rejected() {
        let model = small_model();
        let mut ckpt = Checkpoint::from_model(&model, &dummy_scaler(), 1, 0);
        ckpt.tensors[0].rows += 1;
        assert!(matches!(ckpt.to_model(), Err(Error::Format(_))));
        let mut ckpt2 = Checkpoint::from_model(&model, &dummy_scaler(), 1, 0);
        ckpt2.tensors.pop();
        assert!(matches!(ckpt2.to_model(), Err(Error::Format(_))));
        let mut ckpt3 = Checkpoint::from_model(&model, &dummy_scaler(), 1, 0);
        ckpt3.tensors[2].values.pop();
        assert!(matches!(ckpt3.to_model(), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_file_rejected() {
        let model = small_model();
        let ckpt = Checkpoint::from_model(&model, &dummy_scaler(), 1, 0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trunc.ckpt");
        ckpt.save(&path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(Error::Format(_))));
    }
}
