// Usage: cargo run --release --example qk_probe [steps]
//
// Mean |q| and |k| per head dimension before rotation. Dimensions whose
// frequency is undertrained are marked; after training they may carry a
// different magnitude from the rest.

use anyhow::Result;

use fope::numerics::RngSeed;
use fope::tasks::{train_on_mixture, RunConfig};
use fope::toysim::qk_bias_probe;

pub fn main() -> Result<()> {
    let steps = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(50);
    run(steps)
}

pub fn run(steps: usize) -> Result<()> {
    let mut cfg = RunConfig::default().with_seed(2);
    cfg.train.steps = steps;
    cfg.train.batch_size = 8;
    cfg.train.warmup_steps = steps / 10;
    let (snapshot, records) = train_on_mixture(&cfg, &mut |_| Ok(()))?;
    println!("trained {} steps, final loss {:.3}", steps, records.last().map_or(f64::NAN, |r| r.loss));
    let probe = qk_bias_probe(&snapshot, 512, RngSeed(0))?;
    let head_dim = snapshot.config.head_dim();
    for layer in 0..probe.mean_abs_q.len() {
        println!("layer {layer} (max/min spread {:.2}):", probe.spread(layer));
        for d in 0..head_dim {
            let mark = if probe.undertrained.contains(&d) { " undertrained" } else { "" };
            println!("  dim {d:2}: |q| {:.3} |k| {:.3}{mark}", probe.mean_abs_q[layer][d], probe.mean_abs_k[layer][d]);
        }
    }
    Ok(())
}
