// Usage: cargo run --release --example length_generalization -- [--steps 3000] [--seeds 3] [--kinds RoPE,FoPE,NoPE]
//
// Trains small models at context 64 and evaluates passkey accuracy and
// held-out perplexity at 64, 128 and 256. This takes minutes per model.

use std::time::Instant;

use anyhow::Result;
use clap::Parser;

use fope::numerics::RngSeed;
use fope::posemb::{build_schedule, EmbeddingKind};
use fope::tasks::{eval_passkey, eval_ppl_by_length, train_on_mixture, RunConfig};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 3000)]
    steps: usize,
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    #[arg(long, value_delimiter = ',', default_value = "RoPE,FoPE,NoPE")]
    kinds: Vec<String>,
    /// FoPE source frequencies; defaults to the retained count.
    #[arg(long)]
    num_freqs: Option<usize>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
}

pub fn main() -> Result<()> {
    let args = Args::parse();
    let lengths = [64, 128, 256];
    println!("{:>6} {:>4} {:>8} {:>8} {:>8} {:>10} {:>10}", "kind", "seed", "acc@64", "acc@128", "acc@256", "ppl@64", "ppl@256");
    for label in &args.kinds {
        let kind = EmbeddingKind::parse(label).ok_or_else(|| anyhow::anyhow!("unknown embedding {label}"))?;
        for seed in 0..args.seeds {
            let mut cfg = RunConfig::default().with_seed(seed);
            cfg.model.embedding_kind = kind;
            let m = &cfg.model;
            let retained = build_schedule(m.head_dim(), m.base_theta, m.max_train_length, true)?.retained().len();
            cfg.model.fope.num_freqs = Some(args.num_freqs.unwrap_or(retained));
            cfg.train.steps = args.steps;
            cfg.train.batch_size = 16;
            let start = Instant::now();
            let (snapshot, _) = train_on_mixture(&cfg, &mut |_| Ok(()))?;
            let model = fope::model::Model::from_params(snapshot.config, snapshot.params)?;
            let acc = eval_passkey(&model, &lengths, args.trials, RngSeed(99))?;
            let ppl = eval_ppl_by_length(&model, &cfg.corpus, &[64, 256], 16, RngSeed(5))?;
            let a = |l| acc.metric_at(l).unwrap_or(f64::NAN);
            let p = |l| ppl.metric_at(l).unwrap_or(f64::NAN);
            println!(
                "{label:>6} {seed:>4} {:>8.2} {:>8.2} {:>8.2} {:>10.4} {:>10.4}  ({:.0}s)",
                a(64),
                a(128),
                a(256),
                p(64),
                p(256),
                start.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}
