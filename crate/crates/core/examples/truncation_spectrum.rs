// Usage: cargo run --release --example truncation_spectrum
//
// A single frequency observed over N samples: whole cycles give a clean
// impulse, a fraction of a cycle smears energy down to the zero bin.

use std::f64::consts::TAU;

use anyhow::Result;

use fope::spectrum::{truncation_spectrum, uniform_grid, TruncationSpectrumParams};

fn describe(label: &str, omega: f64, n: usize) -> Result<()> {
    let params = TruncationSpectrumParams::new(omega, n)?;
    let mut grid = uniform_grid(n);
    grid.push(omega);
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let spectrum = truncation_spectrum(&params, &grid)?;
    let peak = params.eval(omega).abs();
    let zero = params.eval(0.0).abs();
    let off_peak = spectrum
        .freqs()
        .iter()
        .zip(spectrum.amplitudes())
        .filter(|(w, _)| (**w - omega).abs() > 1e-9)
        .map(|(_, a)| a.norm())
        .fold(0.0, f64::max);
    println!("{label}: period {:.2}, alpha {}, remainder {:.2}", params.period(), params.alpha, params.remainder);
    println!("  peak {peak:.4}, zero bin {zero:.4} (ratio {:.4}), largest off-peak bin {off_peak:.2e}", zero / peak);
    Ok(())
}

pub fn main() -> Result<()> {
    let n = 64;
    describe("four complete cycles", TAU * 4.0 / n as f64, n)?;
    describe("a quarter of a cycle", TAU * 0.25 / n as f64, n)?;
    describe("two and a third cycles", TAU * 7.0 / 3.0 / n as f64, n)?;
    Ok(())
}
