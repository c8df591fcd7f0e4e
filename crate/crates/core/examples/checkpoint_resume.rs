// Usage: cargo run --release --example checkpoint_resume
//
// Saving mid-run and resuming from the file continues the exact trajectory:
// the resumed loss curve matches an uninterrupted run bit for bit.

use anyhow::Result;

use fope::model::{load_snapshot, save_snapshot, Model, TrainConfig, Trainer};
use fope::posemb::EmbeddingKind;
use fope::tasks::RunConfig;

fn trainer(steps: usize) -> Result<(Trainer, fope::tasks::PasskeyMixture)> {
    let mut cfg = RunConfig::default().with_seed(4);
    cfg.model.embedding_kind = EmbeddingKind::FOPE;
    cfg.model.d_model = 32;
    cfg.model.num_layers = 1;
    cfg.train = TrainConfig { steps, batch_size: 4, seq_length: 32, warmup_steps: 5, ..cfg.train };
    cfg.model.max_train_length = 32;
    let mixture = cfg.mixture()?;
    Ok((Trainer::new(Model::new(cfg.model)?, cfg.train)?, mixture))
}

fn step(t: &mut Trainer, mix: &fope::tasks::PasskeyMixture) -> Result<f64> {
    let batch = mix.batch(t.config.batch_size, fope::model::data_seed(t.config.seed, t.step));
    Ok(t.train_step(&batch)?.loss)
}

pub fn main() -> Result<()> {
    let steps = 20;
    let (mut straight, mix) = trainer(steps)?;
    let mut reference = Vec::new();
    while !straight.is_done() {
        reference.push(step(&mut straight, &mix)?);
    }

    let (mut first, mix) = trainer(steps)?;
    let mut resumed = Vec::new();
    for _ in 0..steps / 2 {
        resumed.push(step(&mut first, &mix)?);
    }
    let dir = std::env::temp_dir().join(format!("fope-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("half.ckpt");
    save_snapshot(&first.snapshot(), &path)?;
    println!("saved step {} to {} ({} bytes)", first.step, path.display(), std::fs::metadata(&path)?.len());
    drop(first);

    let mut second = Trainer::from_snapshot(load_snapshot(&path)?)?;
    while !second.is_done() {
        resumed.push(step(&mut second, &mix)?);
    }
    std::fs::remove_dir_all(&dir)?;

    let identical = reference.iter().zip(&resumed).all(|(a, b)| a.to_bits() == b.to_bits());
    println!("final loss {:.6} uninterrupted, {:.6} resumed; identical curves: {identical}", reference[steps - 1], resumed[steps - 1]);
    Ok(())
}
