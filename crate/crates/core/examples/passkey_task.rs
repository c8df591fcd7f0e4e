// Usage: cargo run --release --example passkey_task
//
// Anatomy of a passkey instance, how the training mixture is drawn, and the
// accuracy an untrained model gets (chance is 1e-5).

use anyhow::Result;

use fope::model::{Model, ModelConfig};
use fope::numerics::{RngSeed, IGNORE_TARGET};
use fope::tasks::{gen_passkey, parse_passkey, eval_passkey, PasskeyMixture, SyntheticCorpusConfig, KEY, KEY_END, QUERY};

fn show(t: usize) -> String {
    match t {
        KEY => "<key>".into(),
        KEY_END => "</key>".into(),
        QUERY => "<query>".into(),
        d if d < 10 => d.to_string(),
        _ => ".".into(),
    }
}

pub fn main() -> Result<()> {
    let inst = gen_passkey(64, 32, 0.4, RngSeed(8))?;
    let shown: Vec<String> = inst.tokens.iter().map(|&t| show(t)).collect();
    println!("length 32, key block at {}: {}", inst.key_start, shown.join(" "));
    println!("key digits {:?}, answer span {:?}", inst.key_digits, inst.answer_span);
    let parsed = parse_passkey(&inst.tokens).expect("well-formed instance parses");
    println!("parsed back: digits {:?} at {}", parsed.key_digits, parsed.key_start);
    let (_, target) = inst.training_pair();
    println!("scored target positions: {}", target.iter().filter(|&&t| t != IGNORE_TARGET).count());

    let mixture = PasskeyMixture::new(64, 64, &SyntheticCorpusConfig::default())?;
    let batch = mixture.batch(8, RngSeed(1));
    let passkey_rows = batch.inputs.iter().filter(|row| row.contains(&QUERY)).count();
    println!(
        "one mixture batch: length {} (range {}..={}), {passkey_rows} of 8 rows are passkey instances",
        batch.inputs[0].len() + 1,
        mixture.min_length,
        mixture.max_length
    );

    let model = Model::new(ModelConfig::default())?;
    let report = eval_passkey(&model, &[32, 64], 50, RngSeed(0))?;
    for r in &report.rows {
        println!("untrained {} at length {}: accuracy {}", report.method, r.length, r.metric);
    }
    Ok(())
}
