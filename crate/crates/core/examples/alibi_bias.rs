// Usage: cargo run --release --example alibi_bias
//
// ALiBi adds a per-head linear distance penalty instead of rotating q and k.
// Compare how the attention logit of one fixed query/key pair changes with
// distance under each scheme.

use anyhow::Result;

use fope::numerics::RngSeed;
use fope::posemb::{
    alibi_slope, attention_bias_alibi, attention_score_trace, build_schedule, init_fourier_coefficients,
    PositionEncoding,
};

pub fn main() -> Result<()> {
    let heads = 4;
    for h in 0..heads {
        println!("head {h}: slope {}", alibi_slope(h, heads));
    }
    let bias = attention_bias_alibi(heads, 5);
    println!("head 0 bias matrix for 5 positions:");
    for i in 0..5 {
        let row: Vec<String> = bias[0].row(i).iter().map(|v| format!("{v:>7.3}")).collect();
        println!("  {}", row.join(" "));
    }

    let head_dim = 16;
    let q = vec![1.0; head_dim];
    let k = vec![1.0; head_dim];
    let schedule = build_schedule(head_dim, 10000.0, 64, true)?;
    let encodings = [
        ("NoPE", PositionEncoding::Nope),
        ("ALiBi", PositionEncoding::Alibi { num_heads: heads }),
        ("RoPE", PositionEncoding::Rotary(schedule.unclipped())),
        ("FoPE", PositionEncoding::Fourier(init_fourier_coefficients(&schedule, 1, head_dim, 0.3, RngSeed(0))?)),
    ];
    println!("logit of q at distance n from k:");
    println!("  {:>5} {:>9} {:>9} {:>9} {:>9} {:>9}", "", "n=0", "n=16", "n=64", "n=128", "n=256");
    for (name, enc) in &encodings {
        let trace = attention_score_trace(&q, &k, enc, 0, 256)?;
        println!(
            "  {name:>5} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>9.3}",
            trace[0], trace[16], trace[64], trace[128], trace[256]
        );
    }
    Ok(())
}
