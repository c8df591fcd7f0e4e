// Usage: cargo run --release --example periodic_extension
//
// A single-frequency attention term repeats with its period forever. Mixing
// in a little of an incommensurate frequency breaks that repetition.

use std::f64::consts::TAU;

use anyhow::Result;

use fope::spectrum::{mixed_trace, periodicity_violation};

pub fn main() -> Result<()> {
    let period = 16.0;
    let omega = TAU / period;
    let len = 4 * period as usize + 1;
    let clean = mixed_trace(omega, 1.0, 0.0, len);
    println!("clean trace: violation over 4 periods {:.1e}", periodicity_violation(&clean, period)?);
    for sigma in [0.01, 0.1, 0.3] {
        let damaged = mixed_trace(omega, 2f64.sqrt(), sigma, len);
        println!("sigma {sigma:<4}: violation {:.4}", periodicity_violation(&damaged, period)?);
    }
    Ok(())
}
