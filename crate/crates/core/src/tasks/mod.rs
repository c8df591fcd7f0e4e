//! Synthetic tasks: passkey retrieval, a seeded Markov language, a copy task,
//! and the evaluation harnesses that score models by context length.

mod markov;
mod passkey;


use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Batch, LossRecord, Model, ModelConfig, ModelError, ModelSnapshot, TrainConfig, Trainer};
use crate::numerics::{RngSeed, IGNORE_TARGET};
use crate::report::{Csv, Precision};

pub use markov::{gen_markov_stream, MarkovChain, SyntheticCorpusConfig};
pub use passkey::{
    eval_passkey, gen_passkey, parse_passkey, passkey_accuracy, ParsedPasskey, PasskeyInstance, PasskeyMixture,
    KEY_BLOCK, KEY_DIGITS, MIN_CONTEXT,
};

/// Token ids 0 to 9 are the digits.
pub const NUM_DIGITS: usize = 10;
pub const KEY: usize = 10;
pub const KEY_END: usize = 11;
pub const QUERY: usize = 12;
pub const PAD: usize = 13;
/// First filler id; everything from here to the vocabulary end is filler.
pub const FILLER_START: usize = 14;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("context length {0} cannot hold the key block and answer (minimum {MIN_CONTEXT})")]
    ContextTooShort(usize),
    #[error("vocabulary of {0} leaves no filler tokens")]
    VocabTooSmall(usize),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One metric value for one (length, seed) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub length: usize,
    pub seed: u64,
    pub metric: f64,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub metric_name: String,
    pub context_lengths: Vec<usize>,
    pub rows: Vec<EvalRow>,
    pub wall_clock_secs: f64,
    /// Free-form caveat carried into every export.
    pub note: String,
}

impl EvalReport {
    pub fn metric_at(&self, length: usize) -> Option<f64> {
        let vals: Vec<f64> = self.rows.iter().filter(|r| r.length == length).map(|r| r.metric).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    /// Combines reports of the same method and metric (for example one per seed).
    pub fn merge(mut self, other: EvalReport) -> EvalReport {
        for l in other.context_lengths {
            if !self.context_lengths.contains(&l) {
                self.context_lengths.push(l);
            }
        }
        self.context_lengths.sort_unstable();
        self.rows.extend(other.rows);
        self.wall_clock_secs += other.wall_clock_secs;
        self
    }

    pub fn csv_rows(&self, csv: &mut Csv) {
        for r in &self.rows {
            csv.row(vec![self.method.as_str().into(), r.length.into(), r.seed.into(), r.metric.into(), r.trials.into()]);
        }
    }

    pub fn to_csv(&self, precision: Precision) -> Csv {
        let mut csv = report_csv(precision);
        self.csv_rows(&mut csv);
        csv
    }

    pub fn write_csv(&self, path: &Path, precision: Precision) -> std::io::Result<()> {
        self.to_csv(precision).write(path)
    }

    /// JSON summary with the caller's configuration echoed alongside.
    pub fn summary_json(&self, config: &serde_json::Value) -> String {
        let means: Vec<serde_json::Value> = self
            .context_lengths
            .iter()
            .map(|&l| serde_json::json!({ "length": l, "mean": self.metric_at(l) }))
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "report": self,
            "mean_by_length": means,
            "config": config,
        }))
        .expect("report serialises")
    }
}

/// Empty table with the report header `method,length,seed,metric,trials`.
pub fn report_csv(precision: Precision) -> Csv {
    Csv::new(&["method", "length", "seed", "metric", "trials"], precision)
}

/// Held-out perplexity by evaluation length on fresh Markov streams.
pub fn eval_ppl_by_length(
    model: &Model,
    corpus: &SyntheticCorpusConfig,
    eval_lengths: &[usize],
    num_sequences: usize,
    seed: RngSeed,
) -> Result<EvalReport, TaskError> {
    let start = std::time::Instant::now();
    let mut lengths = eval_lengths.to_vec();
    lengths.sort_unstable();
    let longest = *lengths.last().ok_or_else(|| TaskError::Invalid("no eval lengths".into()))?;
    let chain = MarkovChain::new(corpus)?;
    let sequences: Vec<Vec<usize>> = (0..num_sequences)
        .map(|i| chain.sample(longest + 1, seed.derive(i as u64)))
        .collect();
    let ppl = model.perplexity(&sequences, &lengths)?;
    Ok(EvalReport {
        method: model.config().embedding_kind.label().to_string(),
        metric_name: "perplexity".into(),
        context_lengths: lengths,
        rows: ppl
            .into_iter()
            .map(|(length, metric)| EvalRow { length, seed: seed.0, metric, trials: num_sequences })
            .collect(),
        wall_clock_secs: start.elapsed().as_secs_f64(),
        note: "synthetic Markov language stands in for natural text".into(),
    })
}

/// Copy task: `x SEP x` with loss only on the second copy. Ids `1..vocab`
/// are content, id 0 separates.
pub fn copy_batch(vocab: usize, half_len: usize, batch_size: usize, seed: RngSeed) -> Batch {
    let mut rng = seed.rng();
    let mut inputs = Vec::with_capacity(batch_size);
    let mut targets = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let x: Vec<usize> = (0..half_len).map(|_| rng.random_range(1..vocab)).collect();
        let mut seq = x.clone();
        seq.push(0);
        seq.extend(&x);
        let tgt: Vec<usize> = (1..seq.len())
            .map(|i| if i > half_len { seq[i] } else { IGNORE_TARGET })
            .collect();
        seq.pop();
        inputs.push(seq);
        targets.push(tgt);
    }
    Batch { inputs, targets }
}

/// Everything that defines one training run on the passkey/Markov mixture.
/// This is also the JSON schema accepted by the command line `--config`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub corpus: SyntheticCorpusConfig,
}

impl RunConfig {
    /// Points every seed (initialisation, coefficients, data order) at `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.model.init_seed = RngSeed(seed);
        self.model.fope.seed = RngSeed(seed);
        self.train.seed = RngSeed(seed);
        self
    }

    pub fn mixture(&self) -> Result<PasskeyMixture, TaskError> {
        PasskeyMixture::new(self.model.vocab_size, self.train.seq_length, &self.corpus)
    }
}

/// Trains a fresh model on the mixture, with batch lengths up to
/// `train.seq_length`. `on_checkpoint` runs every
/// `train.checkpoint_every` steps.
pub fn train_on_mixture(
    config: &RunConfig,
    on_checkpoint: &mut dyn FnMut(&Trainer) -> Result<(), ModelError>,
) -> Result<(ModelSnapshot, Vec<LossRecord>), TaskError> {
    let trainer = Trainer::new(Model::new(config.model.clone())?, config.train.clone())?;
    resume_on_mixture(trainer, &config.corpus, on_checkpoint)
}

/// Continues `trainer` to its final step on the mixture.
pub fn resume_on_mixture(
    mut trainer: Trainer,
    corpus: &SyntheticCorpusConfig,
    on_checkpoint: &mut dyn FnMut(&Trainer) -> Result<(), ModelError>,
) -> Result<(ModelSnapshot, Vec<LossRecord>), TaskError> {
    let vocab = trainer.model.config().vocab_size;
    let mix = PasskeyMixture::new(vocab, trainer.config.seq_length, corpus)?;
    let bs = trainer.config.batch_size;
    let records = trainer.run(&mut |_, seed| mix.batch(bs, seed), on_checkpoint)?;
    Ok((trainer.snapshot(), records))
}
