use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{check_increasing, Spectrum, SpectrumError};

/// Ratios this close to an integer count as whole cycles.
const WHOLE_CYCLE_TOL: f64 = 1e-9;
/// Below this offset from `omega_m` the sinc term uses its Taylor series.
const SERIES_CUTOFF: f64 = 1e-8;

/// A single frequency `omega_m` truncated to `n` samples.
///
/// `alpha` complete cycles of length `N_m = 2 pi / omega_m` fit, leaving a
/// remainder of `n - alpha N_m` samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationSpectrumParams {
    pub omega_m: f64,
    pub n: usize,
    pub alpha: u64,
    pub remainder: f64,
}

impl TruncationSpectrumParams {
    pub fn new(omega_m: f64, n: usize) -> Result<Self, SpectrumError> {
        if !(omega_m > 0.0 && omega_m < TAU) {
            return Err(SpectrumError::Invalid(format!("omega_m {omega_m} outside (0, 2pi)")));
        }
        if n == 0 {
            return Err(SpectrumError::Invalid("truncation length must be positive".into()));
        }
        let period = TAU / omega_m;
        let ratio = n as f64 / period;
        let nearest = ratio.round();
        let (alpha, remainder) = if (ratio - nearest).abs() <= WHOLE_CYCLE_TOL * nearest.max(1.0) {
            (nearest as u64, 0.0)
        } else {
            let a = ratio.floor();
            (a as u64, n as f64 - a * period)
        };
        Ok(Self { omega_m, n, alpha, remainder })
    }

    /// `N_m`, samples per cycle.
    pub fn period(&self) -> f64 {
        TAU / self.omega_m
    }

    /// Height of the `omega_m` bin contributed by the complete cycles. Each
    /// whole cycle sums to `N_m` at its own frequency, so the impulse with
    /// coefficient `alpha` stands `alpha N_m` tall.
    pub fn impulse_height(&self) -> f64 {
        self.alpha as f64 * self.period()
    }

    /// Sidelobe from the incomplete remainder, `sin(r d) / d` with `d = omega - omega_m`.
    pub fn remainder_term(&self, omega: f64) -> f64 {
        let r = self.remainder;
        let d = omega - self.omega_m;
        if d.abs() < SERIES_CUTOFF {
            let rd = r * d;
            r * (1.0 - rd * rd / 6.0)
        } else {
            (r * d).sin() / d
        }
    }

    pub fn eval(&self, omega: f64) -> f64 {
        let impulse = if (omega - self.omega_m).abs() < 1e-12 { self.impulse_height() } else { 0.0 };
        impulse + self.remainder_term(omega)
    }
}

/// Closed-form spectrum of a truncated single-frequency wave at `eval_freqs`
/// (strictly increasing).
pub fn truncation_spectrum(
    params: &TruncationSpectrumParams,
    eval_freqs: &[f64],
) -> Result<Spectrum, SpectrumError> {
    check_increasing(eval_freqs)?;
    let amps = eval_freqs.iter().map(|&w| Complex64::new(params.eval(w), 0.0)).collect();
    Spectrum::new(eval_freqs.to_vec(), amps)
}
