// Usage: cargo run --release --example toy_attention
//
// Two input frequencies pass through a mixing layer and an activation. RoPE
// keeps one frequency per dimension; FoPE can carry the extra frequencies the
// layer creates, so it tracks the true score more closely when fitted.

use anyhow::Result;

use fope::toysim::{dimension_spectra, run_toy, ToyConfig, ToyFope};

fn report(label: &str, cfg: &ToyConfig) -> Result<()> {
    let fitted = run_toy(cfg, &ToyFope::Fit)?;
    let sampled = run_toy(cfg, &ToyFope::Sampled(cfg.sample_coefficients(0.3, 8)?))?;
    println!("{label}:");
    println!("  L2 gap to ground truth: RoPE {:.4}, FoPE fitted {:.4}, FoPE sampled {:.4}", fitted.rope_gap(), fitted.fope_gap(), sampled.fope_gap());
    Ok(())
}

pub fn main() -> Result<()> {
    let cfg = ToyConfig::default();
    let spectra = dimension_spectra(&cfg)?;
    for (d, s) in spectra.iter().enumerate() {
        println!("dimension {d}: {} frequencies in the activated spectrum", s.folded_freqs().len());
    }
    report("SiLU with mixing weights", &cfg)?;
    report("identity weights and activation", &ToyConfig::identity())?;
    Ok(())
}
