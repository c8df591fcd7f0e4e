use serde::{Deserialize, Serialize};

use super::optim::{lr_at, AdamW};
use super::{Model, ModelError, ModelSnapshot};
use crate::numerics::{Graph, Matrix, RngSeed};
use crate::report::{Csv, Precision};

/// Equal-length input/target id sequences. Targets may be [`IGNORE_TARGET`].
///
/// [`IGNORE_TARGET`]: crate::numerics::IGNORE_TARGET
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub inputs: Vec<Vec<usize>>,
    pub targets: Vec<Vec<usize>>,
}

impl Batch {
    /// Next-token batch from sequences of length `len + 1`.
    pub fn next_token(sequences: &[Vec<usize>]) -> Self {
        Self {
            inputs: sequences.iter().map(|s| s[..s.len() - 1].to_vec()).collect(),
            targets: sequences.iter().map(|s| s[1..].to_vec()).collect(),
        }
    }

    pub fn flat_targets(&self) -> Vec<usize> {
        self.targets.iter().flatten().copied().collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheduler {
    Cosine,
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub seq_length: usize,
    pub learning_rate: f64,
    pub warmup_steps: usize,
    pub scheduler: Scheduler,
    /// Cosine decay ends at this fraction of the peak rate.
    pub min_lr_ratio: f64,
    pub weight_decay: f64,
    pub grad_clip: f64,
    pub seed: RngSeed,
    /// Emit a checkpoint every this many steps (0 disables).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 32,
            seq_length: 64,
            learning_rate: 3e-3,
            warmup_steps: 100,
            scheduler: Scheduler::Cosine,
            min_lr_ratio: 0.1,
            weight_decay: 0.1,
            grad_clip: 1.0,
            seed: RngSeed(0),
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, max_train_length: usize) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.seq_length > max_train_length {
            return bad(format!("seq_length {} exceeds max_train_length {max_train_length}", self.seq_length));
        }
        if self.warmup_steps > self.steps {
            return bad(format!("warmup {} exceeds {} steps", self.warmup_steps, self.steps));
        }
        if self.batch_size == 0 || self.seq_length == 0 {
            return bad("batch_size and seq_length must be positive".into());
        }
        if !(self.learning_rate >= 0.0) {
            return bad(format!("learning rate {}", self.learning_rate));
        }
        Ok(())
    }
}

/// Seed for the data of one training step, independent of every other step.
pub fn data_seed(seed: RngSeed, step: usize) -> RngSeed {
    seed.derive(0xda7a).derive(step as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
}

pub fn loss_csv(records: &[LossRecord], precision: Precision) -> Csv {
    let mut csv = Csv::new(&["step", "loss", "lr"], precision);
    for r in records {
        csv.row(vec![r.step.into(), r.loss.into(), r.lr.into()]);
    }
    csv
}

/// A model together with its optimiser state and position in the schedule.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub model: Model,
    pub opt: AdamW,
    pub config: TrainConfig,
    pub step: usize,
}

impl Trainer {
    pub fn new(model: Model, config: TrainConfig) -> Result<Self, ModelError> {
        config.validate(model.config().max_train_length)?;
        let opt = AdamW::new(model.specs(), config.weight_decay);
        Ok(Self { model, opt, config, step: 0 })
    }

    pub fn from_snapshot(snapshot: ModelSnapshot) -> Result<Self, ModelError> {
        let model = Model::from_params(snapshot.config, snapshot.params)?;
        let config = snapshot.train;
        config.validate(model.config().max_train_length)?;
        let opt = match snapshot.optimizer {
            Some(opt) => opt,
            None => AdamW::new(model.specs(), config.weight_decay),
        };
        Ok(Self { model, opt, config, step: snapshot.step })
    }

    pub fn snapshot(&self) -> ModelSnapshot {
        ModelSnapshot {
            config: self.model.config().clone(),
            train: self.config.clone(),
            step: self.step,
            params: self.model.params().to_vec(),
            optimizer: Some(self.opt.clone()),
        }
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.config.steps
    }

    /// Loss and parameter gradients of one batch.
    pub fn gradients(model: &Model, batch: &Batch) -> Result<(f64, Vec<Matrix>), ModelError> {
        let mut g = Graph::new();
        let p = model.bind(&mut g, true);
        let logits = model.forward_graph(&mut g, &p, &batch.inputs, 0, None)?;
        let loss = g.cross_entropy(logits, &batch.flat_targets())?;
        g.backward(loss)?;
        let grads = p
            .iter()
            .zip(model.params())
            .map(|(&id, m)| g.grad(id).cloned().unwrap_or_else(|| Matrix::zeros(m.rows(), m.cols())))
            .collect();
        Ok((g.value(loss).get(0, 0), grads))
    }

    /// One optimisation step on `batch`.
    pub fn train_step(&mut self, batch: &Batch) -> Result<LossRecord, ModelError> {
        let (loss, grads) = Self::gradients(&self.model, batch)?;
        if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(ModelError::Diverged { step: self.step });
        }
        let lr = lr_at(&self.config, self.step);
        let specs = self.model.specs().to_vec();
        self.opt.step(self.model.params_mut(), &grads, &specs, lr, self.config.grad_clip);
        let record = LossRecord { step: self.step, loss, lr };
        self.step += 1;
        Ok(record)
    }

    /// Runs to `config.steps`. `data(step, seed)` supplies the batch for each
    /// step; `on_checkpoint` is called every `checkpoint_every` steps.
    pub fn run(
        &mut self,
        data: &mut dyn FnMut(usize, RngSeed) -> Batch,
        on_checkpoint: &mut dyn FnMut(&Trainer) -> Result<(), ModelError>,
    ) -> Result<Vec<LossRecord>, ModelError> {
        let mut records = Vec::with_capacity(self.config.steps.saturating_sub(self.step));
        while !self.is_done() {
            let batch = data(self.step, data_seed(self.config.seed, self.step));
            records.push(self.train_step(&batch)?);
            let every = self.config.checkpoint_every;
            if every > 0 && self.step % every == 0 {
                on_checkpoint(self)?;
            }
        }
        Ok(records)
    }
}

/// Trains a fresh optimiser on `model` and returns the final snapshot with
/// the per-step loss curve.
pub fn train(
    model: Model,
    data: &mut dyn FnMut(usize, RngSeed) -> Batch,
    config: &TrainConfig,
) -> Result<(ModelSnapshot, Vec<LossRecord>), ModelError> {
    let mut trainer = Trainer::new(model, config.clone())?;
    let records = trainer.run(data, &mut |_| Ok(()))?;
    Ok((trainer.snapshot(), records))
}
