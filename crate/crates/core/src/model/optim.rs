use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::train::{Scheduler, TrainConfig};
use super::ParamSpec;
use crate::numerics::Matrix;

/// Learning rate at `step`: linear warm-up, then cosine decay to
/// `min_lr_ratio * learning_rate` at the final step.
pub fn lr_at(cfg: &TrainConfig, step: usize) -> f64 {
    let peak = cfg.learning_rate;
    if step < cfg.warmup_steps {
        return peak * (step + 1) as f64 / cfg.warmup_steps as f64;
    }
    match cfg.scheduler {
        Scheduler::Constant => peak,
        Scheduler::Cosine => {
            let span = cfg.steps.saturating_sub(cfg.warmup_steps).max(1) as f64;
            let progress = ((step - cfg.warmup_steps) as f64 / span).min(1.0);
            let floor = peak * cfg.min_lr_ratio;
            floor + (peak - floor) * 0.5 * (1.0 + (PI * progress).cos())
        }
    }
}

/// Adam with decoupled weight decay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub t: u64,
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
}

impl AdamW {
    pub fn new(specs: &[ParamSpec], weight_decay: f64) -> Self {
        let zeros = || specs.iter().map(|s| Matrix::zeros(s.rows, s.cols)).collect();
        Self {
            beta1: 0.9,
            beta2: 0.95,
            eps: 1e-8,
            weight_decay,
            t: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// One update. Gradients are rescaled so their global norm is at most
    /// `clip`; returns the norm before clipping.
    pub fn step(&mut self, params: &mut [Matrix], grads: &[Matrix], specs: &[ParamSpec], lr: f64, clip: f64) -> f64 {
        let norm = grads.iter().flat_map(|g| g.data()).map(|x| x * x).sum::<f64>().sqrt();
        let scale = if clip > 0.0 && norm > clip { clip / norm } else { 1.0 };
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let decay = if specs[i].decay { lr * self.weight_decay } else { 0.0 };
            let p = params[i].data_mut();
            let g = grads[i].data();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for j in 0..p.len() {
                let gj = g[j] * scale;
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                let update = (m[j] / bc1) / ((v[j] / bc2).sqrt() + self.eps);
                p[j] -= decay * p[j] + lr * update;
            }
        }
        norm
    }
}
