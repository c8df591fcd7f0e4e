// Usage: cargo run --release --example train_copy_task [steps]
//
// Trains a tiny transformer to copy a random sequence. The loss falls from
// about ln(vocab) towards zero once attention learns to look back by a fixed
// offset.

use anyhow::Result;

use fope::model::{train, Model, ModelConfig, TrainConfig};
use fope::posemb::EmbeddingKind;
use fope::tasks::copy_batch;

pub fn main() -> Result<()> {
    let steps = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(300);
    run(steps)
}

pub fn run(steps: usize) -> Result<()> {
    let vocab = 16;
    let model = Model::new(ModelConfig {
        vocab_size: vocab,
        d_model: 32,
        num_heads: 2,
        num_layers: 2,
        max_train_length: 32,
        embedding_kind: EmbeddingKind::Rope,
        ..Default::default()
    })?;
    println!("{} parameters", model.parameter_count());
    let config = TrainConfig {
        steps,
        batch_size: 16,
        seq_length: 16,
        warmup_steps: steps / 10,
        learning_rate: 3e-3,
        ..Default::default()
    };
    let (snapshot, records) = train(model, &mut |_, seed| copy_batch(vocab, 8, config.batch_size, seed), &config)?;
    for r in records.iter().step_by((steps / 6).max(1)).chain(records.last()) {
        println!("step {:4}: loss {:.4}, lr {:.2e}", r.step, r.loss, r.lr);
    }
    let model = Model::from_params(snapshot.config, snapshot.params)?;
    let held_out = copy_batch(vocab, 8, 64, fope::numerics::RngSeed(999));
    println!("held-out copy loss {:.4}", model.loss(&held_out)?);
    Ok(())
}
