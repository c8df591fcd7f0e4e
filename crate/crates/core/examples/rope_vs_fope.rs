// Usage: cargo run --release --example rope_vs_fope
//
// RoPE and FoPE share one rotate-half formula and differ only in their
// tables. Turning FoPE's two parts off recovers RoPE exactly.

use anyhow::Result;

use fope::numerics::{Matrix, RngSeed};
use fope::posemb::{apply_fope, apply_rope, build_schedule, init_fourier_coefficients};

pub fn main() -> Result<()> {
    let (head_dim, len) = (16, 64);
    let clipped = build_schedule(head_dim, 10000.0, len, true)?;
    println!("head_dim {head_dim}, L {len}: retained m = {:?}, {} clipped", clipped.retained(), clipped.num_zeroed());

    let mut rng = RngSeed(3).rng();
    let x = Matrix::randn(8, head_dim, 1.0, &mut rng);
    let positions: Vec<usize> = (0..8).map(|i| 10 * i).collect();

    let noisy = init_fourier_coefficients(&clipped, 1, head_dim, 0.3, RngSeed(5))?;
    let rope = apply_rope(&x, &positions, &clipped.unclipped())?;
    let plain = apply_fope(&x, &positions, &clipped, &noisy, 0, false, false)?;
    println!("FoPE with both parts off vs RoPE: identical bits = {}", rope == plain);

    let exact = init_fourier_coefficients(&clipped, 1, head_dim, 0.0, RngSeed(5))?;
    let clipped_rope = apply_rope(&x, &positions, &clipped)?;
    let sigma0 = apply_fope(&x, &positions, &clipped, &exact, 0, true, true)?;
    println!("FoPE at sigma 0 vs clipped RoPE: max diff {:.1e}", sigma0.max_abs_diff(&clipped_rope));

    let fope = apply_fope(&x, &positions, &clipped, &noisy, 0, true, true)?;
    println!("FoPE at sigma 0.3 vs clipped RoPE: max diff {:.3}", fope.max_abs_diff(&clipped_rope));

    // RoPE scores depend on distance only; FoPE's cross-frequency terms add
    // an absolute-position component
    let q = Matrix::randn(1, head_dim, 1.0, &mut rng);
    let k = Matrix::randn(1, head_dim, 1.0, &mut rng);
    let score = |p: usize, s: usize, fourier: bool| -> Result<f64> {
        let (qr, kr) = if fourier {
            (apply_fope(&q, &[p + s], &clipped, &noisy, 0, true, true)?, apply_fope(&k, &[s], &clipped, &noisy, 0, true, true)?)
        } else {
            (apply_rope(&q, &[p + s], &clipped)?, apply_rope(&k, &[s], &clipped)?)
        };
        Ok(qr.row(0).iter().zip(kr.row(0)).map(|(a, b)| a * b).sum())
    };
    for (name, fourier) in [("RoPE", false), ("FoPE", true)] {
        let base = score(7, 0, fourier)?;
        let drift = [1, 50, 500, 5000]
            .iter()
            .map(|&s| Ok((score(7, s, fourier)? - base).abs()))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        println!("{name} score at distance 7 is {base:.4}; largest change when both positions shift: {drift:.1e}");
    }
    Ok(())
}
