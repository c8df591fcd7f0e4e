// Usage: cargo run --release --example harmonic_expansion
//
// Raising a two-tone signal to a power creates sum and difference
// frequencies. The expansion is exact, and it agrees with the spectrum of
// the sampled power.

use anyhow::Result;

use fope::spectrum::{nudft, HarmonicExpansion, SampledSignal};

pub fn main() -> Result<()> {
    let (w1, w2) = (0.3, 0.7);
    for power in 1..=4 {
        let expansion = HarmonicExpansion::new(power)?;
        println!("(cos w1 n + cos w2 n)^{power}, coefficients sum to {}:", expansion.total());
        for t in &expansion.terms {
            println!("  {:>6} cos(({}) n)", t.coef.to_string(), t.label());
        }
        // closed form against the sampled signal at a few points
        let err = (0..200)
            .map(|n| {
                let n = n as f64;
                let direct = ((w1 * n).cos() + (w2 * n).cos()).powi(power as i32);
                (expansion.eval(w1, w2, n) - direct).abs()
            })
            .fold(0.0, f64::max);
        println!("  max pointwise error {err:.1e}");
    }

    // the square as seen by a DFT of a long sampled signal
    let len = 4096;
    let sq: Vec<f64> = (0..len).map(|n| ((w1 * n as f64).cos() + (w2 * n as f64).cos()).powi(2)).collect();
    let probe = [0.0, 0.4, 0.6, 1.0, 1.4];
    let spectrum = nudft(&SampledSignal::from_real(&sq), &probe)?;
    println!("sampled square, |X(w)| / N at the predicted frequencies:");
    for (w, a) in probe.iter().zip(spectrum.amplitudes()) {
        println!("  w = {w:.1}: {:.3}", a.norm() / len as f64);
    }
    Ok(())
}
