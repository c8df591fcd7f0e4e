// Usage: cargo run --release --example nudft_roundtrip
//
// Forward and inverse NUDFT on the uniform grid recover a random complex
// signal, and an off-grid tone leaks into every bin.

use anyhow::Result;
use num_complex::Complex64;
use rand::Rng;

use fope::numerics::RngSeed;
use fope::spectrum::{inudft, nudft, uniform_grid, SampledSignal};

pub fn main() -> Result<()> {
    let mut rng = RngSeed(42).rng();
    for n in [16, 64, 256] {
        let values: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let signal = SampledSignal::new(values.clone())?;
        let spectrum = nudft(&signal, &uniform_grid(n))?;
        let back = inudft(&spectrum, n)?;
        let err = values.iter().zip(&back.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        println!("N = {n:3}: max round-trip error {err:.2e}");
    }

    // a tone between two bins has no single home on the grid
    let n = 64;
    let omega = std::f64::consts::TAU * 5.5 / n as f64;
    let tone: Vec<f64> = (0..n).map(|i| (omega * i as f64).cos()).collect();
    let spectrum = nudft(&SampledSignal::from_real(&tone), &uniform_grid(n))?;
    let mags: Vec<f64> = spectrum.amplitudes().iter().map(|a| a.norm()).collect();
    let above = mags.iter().filter(|&&m| m > 0.01 * spectrum.max_magnitude()).count();
    println!("tone at 5.5 bins: {above} of {n} bins carry more than 1% of the peak");
    println!("same tone, exact frequency: |X({omega:.4})| = {:.3}", nudft(&SampledSignal::from_real(&tone), &[omega])?.amplitudes()[0].norm());
    Ok(())
}
