use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ToySimError;
use crate::model::{Model, ModelSnapshot};
use crate::numerics::RngSeed;
use crate::report::{Csv, Precision};
use crate::spectrum::undertrained_dims;

/// Sequences are capped at this many tokens so probing stays cheap.
const PROBE_SEQ: usize = 64;

/// Mean absolute pre-rotation query and key activation per dimension,
/// averaged over heads and probe tokens.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QkProbe {
    /// `mean_abs_q[layer][dim]`.
    pub mean_abs_q: Vec<Vec<f64>>,
    pub mean_abs_k: Vec<Vec<f64>>,
    /// Zero-based dimensions whose frequency is below the floor for the
    /// model's training length.
    pub undertrained: Vec<usize>,
    pub num_tokens: usize,
    /// Set when the snapshot has never taken an optimiser step.
    pub untrained_warning: bool,
}

impl QkProbe {
    /// `max / min` of the per-dimension means (queries and keys pooled) in one layer.
    pub fn spread(&self, layer: usize) -> f64 {
        let vals = self.mean_abs_q[layer].iter().chain(&self.mean_abs_k[layer]);
        let (lo, hi) = vals.fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        hi / lo
    }

    pub fn to_csv(&self, precision: Precision) -> Csv {
        let mut csv = Csv::new(&["layer", "dim", "mean_abs_q", "mean_abs_k", "undertrained"], precision);
        for (l, (q, k)) in self.mean_abs_q.iter().zip(&self.mean_abs_k).enumerate() {
            for d in 0..q.len() {
                let flag = if self.undertrained.contains(&d) { "true" } else { "false" };
                csv.row(vec![l.into(), d.into(), q[d].into(), k[d].into(), flag.into()]);
            }
        }
        csv
    }

    pub fn write_csv(&self, path: &Path, precision: Precision) -> std::io::Result<()> {
        self.to_csv(precision).write(path)
    }
}

/// Feeds `num_tokens` uniformly drawn tokens through the snapshot's model and
/// records per-dimension query/key magnitudes before rotation (after the
/// optional per-head normalisation).
pub fn qk_bias_probe(snapshot: &ModelSnapshot, num_tokens: usize, seed: RngSeed) -> Result<QkProbe, ToySimError> {
    if num_tokens < 100 {
        return Err(ToySimError::Config(format!("probe needs at least 100 tokens, got {num_tokens}")));
    }
    let cfg = &snapshot.config;
    let model = Model::from_params(cfg.clone(), snapshot.params.clone())?;
    let seq = PROBE_SEQ.min(cfg.max_train_length);
    let mut rng = seed.rng();
    let mut inputs = Vec::new();
    let mut left = num_tokens;
    while left > 0 {
        let len = left.min(seq);
        inputs.push((0..len).map(|_| rng.random_range(0..cfg.vocab_size)).collect::<Vec<usize>>());
        left -= len;
    }
    let (hd, layers) = (cfg.head_dim(), cfg.num_layers);
    let mut sum_q = vec![vec![0.0; hd]; layers];
    let mut sum_k = vec![vec![0.0; hd]; layers];
    let mut count = 0usize;
    // one forward per sequence since the last one may be shorter
    for seq in &inputs {
        let stats = model.qk_stats(std::slice::from_ref(seq))?;
        for l in 0..layers {
            for d in 0..hd {
                sum_q[l][d] += stats.sum_abs_q[l][d];
                sum_k[l][d] += stats.sum_abs_k[l][d];
            }
        }
        count += stats.count;
    }
    let scale = |rows: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        rows.into_iter().map(|r| r.into_iter().map(|v| v / count as f64).collect()).collect()
    };
    let undertrained = undertrained_dims(hd, cfg.base_theta, cfg.max_train_length)?.full_dims();
    Ok(QkProbe {
        mean_abs_q: scale(sum_q),
        mean_abs_k: scale(sum_k),
        undertrained,
        num_tokens,
        untrained_warning: snapshot.step == 0,
    })
}
