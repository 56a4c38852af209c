//! Decoupled-weight-decay adaptive-moment optimizer, cosine learning-rate
//! schedule, and global gradient-norm clipping.

use crate::model::ParamSet;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// AdamW: adaptive moments on the gradient, weight decay applied directly
/// to the parameter (decoupled), and only to matrix weights — biases,
/// layer-norm affines, and log-scale parameters are never decayed.
#[derive(Debug, Clone)]
pub struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    weight_decay: f64,
    decay: Vec<bool>,
}

impl AdamW {
    pub fn new(params: &ParamSet, weight_decay: f64) -> Self {
        let n = params.values.len();
        AdamW {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            weight_decay,
            decay: params.decay_mask(),
        }
    }

    pub fn step(&mut self, values: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(values.len(), grads.len());
        assert_eq!(values.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        for i in 0..values.len() {
            let g = grads[i];
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g;
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            let mut delta = lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            if self.decay[i] {
                delta += lr * self.weight_decay * values[i];
            }
            values[i] -= delta;
        }
    }
}

/// Single-cycle cosine annealing: `lr(0) = lr_init`, decaying smoothly to 0
/// at `max_epochs`.
pub fn cosine_lr(lr_init: f64, epoch: usize, max_epochs: usize) -> f64 {
    let progress = (epoch as f64 / max_epochs as f64).min(1.0);
    lr_init * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// Scale `grads` so their global L2 norm does not exceed `max_norm`;
/// gradients under the threshold are left untouched. Returns the pre-clip
/// norm.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= scale;
        }
    }
    norm
}
