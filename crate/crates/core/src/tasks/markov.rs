use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{TaskError, FILLER_START};
use crate::numerics::RngSeed;

/// Transition logits are standard normal times this, divided by temperature.
const LOGIT_SCALE: f64 = 3.0;

/// A seeded order-`k` Markov language over `vocab_size` consecutive ids
/// starting at `first_token`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticCorpusConfig {
    pub vocab_size: usize,
    pub order: usize,
    pub temperature: f64,
    pub seed: RngSeed,
    pub first_token: usize,
}

impl Default for SyntheticCorpusConfig {
    fn default() -> Self {
        Self { vocab_size: 50, order: 1, temperature: 1.0, seed: RngSeed(7), first_token: FILLER_START }
    }
}

/// Lazily materialised transition table of a [`SyntheticCorpusConfig`].
#[derive(Debug)]
pub struct MarkovChain {
    config: SyntheticCorpusConfig,
    rows: RefCell<HashMap<u64, Rc<Vec<f64>>>>,
}

impl MarkovChain {
    pub fn new(config: &SyntheticCorpusConfig) -> Result<Self, TaskError> {
        if config.order == 0 || config.vocab_size < 2 {
            return Err(TaskError::Invalid("order must be >= 1 and vocab_size >= 2".into()));
        }
        if !(config.temperature > 0.0) {
            return Err(TaskError::Invalid(format!("temperature {} must be positive", config.temperature)));
        }
        if (config.vocab_size as f64).powi(config.order as i32) > 1e15 {
            return Err(TaskError::Invalid("context space too large".into()));
        }
        Ok(Self { config: config.clone(), rows: RefCell::new(HashMap::new()) })
    }

    pub fn config(&self) -> &SyntheticCorpusConfig {
        &self.config
    }

    /// Cumulative next-token distribution for a context index.
    fn cdf(&self, context: u64) -> Rc<Vec<f64>> {
        if let Some(row) = self.rows.borrow().get(&context) {
            return row.clone();
        }
        let v = self.config.vocab_size;
        let mut rng = self.config.seed.derive(context).rng();
        let logits: Vec<f64> = (0..v)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                LOGIT_SCALE * z / self.config.temperature
            })
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = logits
            .iter()
            .map(|l| {
                acc += (l - max).exp();
                acc
            })
            .collect();
        for c in &mut cdf {
            *c /= acc;
        }
        let row = Rc::new(cdf);
        self.rows.borrow_mut().insert(context, row.clone());
        row
    }

    /// Next-token probabilities after `history` (relative ids, most recent last).
    pub fn probabilities(&self, history: &[usize]) -> Vec<f64> {
        let cdf = self.cdf(self.context_index(history));
        let mut prev = 0.0;
        cdf.iter()
            .map(|&c| {
                let p = c - prev;
                prev = c;
                p
            })
            .collect()
    }

    fn context_index(&self, history: &[usize]) -> u64 {
        let k = self.config.order;
        history[history.len() - k..]
            .iter()
            .fold(0u64, |acc, &t| acc * self.config.vocab_size as u64 + t as u64)
    }

    /// `length` absolute token ids along a path chosen by `path_seed`.
    pub fn sample(&self, length: usize, path_seed: RngSeed) -> Vec<usize> {
        let (v, k) = (self.config.vocab_size, self.config.order);
        let mut rng = path_seed.rng();
        let mut rel: Vec<usize> = Vec::with_capacity(length.max(k));
        for _ in 0..k.min(length) {
            rel.push(rng.random_range(0..v));
        }
        while rel.len() < length {
            let cdf = self.cdf(self.context_index(&rel));
            let u: f64 = rng.random();
            let next = cdf.partition_point(|&c| c <= u).min(v - 1);
            rel.push(next);
        }
        rel.into_iter().map(|t| t + self.config.first_token).collect()
    }
}

/// Deterministic stream for a config: same config, same tokens.
pub fn gen_markov_stream(config: &SyntheticCorpusConfig, length: usize) -> Result<Vec<usize>, TaskError> {
    if length == 0 {
        return Err(TaskError::Invalid("length must be positive".into()));
    }
    Ok(MarkovChain::new(config)?.sample(length, config.seed.derive(u64::MAX)))
}
