//! Frequency-domain analysis: the non-uniform DFT and its inverse, closed-form
//! truncation spectra, symbolic harmonic expansion, periodicity measurement
//! and the identification of undertrained RoPE dimensions.

mod harmonics;
mod truncation;

#[cfg(test)]
mod tests;

use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::posemb::{build_schedule, PosEmbError};
use crate::report::{Csv, Precision};

pub use harmonics::{harmonic_expansion, Dyadic, HarmonicExpansion, HarmonicTerm, MAX_POWER};
pub use truncation::{truncation_spectrum, TruncationSpectrumParams};

#[derive(Debug, Error, PartialEq)]
pub enum SpectrumError {
    #[error("signal is empty")]
    EmptySignal,
    #[error("spectrum is empty")]
    EmptySpectrum,
    #[error("frequencies must be strictly increasing (index {0})")]
    NotIncreasing(usize),
    #[error("frequency {0} is outside [0, 2pi)")]
    FrequencyOutOfRange(f64),
    #[error("{0} frequencies but {1} amplitudes")]
    LengthMismatch(usize, usize),
    #[error("nonlinearity needs a real signal; sample {0} has imaginary part")]
    ComplexInput(usize),
    #[error("trace of length {len} is shorter than two periods ({needed})")]
    TraceTooShort { len: usize, needed: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    PosEmb(#[from] PosEmbError),
}

/// Frequency / complex-amplitude pairs with strictly increasing frequencies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    freqs: Vec<f64>,
    amps: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(freqs: Vec<f64>, amps: Vec<Complex64>) -> Result<Self, SpectrumError> {
        if freqs.len() != amps.len() {
            return Err(SpectrumError::LengthMismatch(freqs.len(), amps.len()));
        }
        check_increasing(&freqs)?;
        Ok(Self { freqs, amps })
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Amplitude at the frequency within `tol` of `omega`, if any.
    pub fn amplitude_at(&self, omega: f64, tol: f64) -> Option<Complex64> {
        self.freqs
            .iter()
            .position(|&w| (w - omega).abs() <= tol)
            .map(|i| self.amps[i])
    }

    /// Peak magnitude over all components.
    pub fn max_magnitude(&self) -> f64 {
        self.amps.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    pub fn to_csv(&self, precision: Precision) -> Csv {
        let mut csv = Csv::new(&["omega", "re", "im"], precision);
        for (w, a) in self.freqs.iter().zip(&self.amps) {
            csv.row(vec![(*w).into(), a.re.into(), a.im.into()]);
        }
        csv
    }

    pub fn write_csv(&self, path: &Path, precision: Precision) -> std::io::Result<()> {
        self.to_csv(precision).write(path)
    }
}

fn check_increasing(freqs: &[f64]) -> Result<(), SpectrumError> {
    for (i, w) in freqs.iter().enumerate() {
        if !w.is_finite() {
            return Err(SpectrumError::Invalid(format!("non-finite frequency at {i}")));
        }
        if i > 0 && !(freqs[i - 1] < *w) {
            return Err(SpectrumError::NotIncreasing(i));
        }
    }
    Ok(())
}

/// Complex samples `x_0 .. x_{N-1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledSignal {
    pub values: Vec<Complex64>,
}

impl SampledSignal {
    pub fn new(values: Vec<Complex64>) -> Result<Self, SpectrumError> {
        if let Some(i) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(SpectrumError::Invalid(format!("non-finite sample at {i}")));
        }
        Ok(Self { values })
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self {
            values: values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }
}

/// `2 pi m / M` for `m = 0..M`.
pub fn uniform_grid(m: usize) -> Vec<f64> {
    (0..m).map(|k| TAU * k as f64 / m as f64).collect()
}

/// `X(omega) = sum_n x_n e^{-i omega n}` at each requested frequency.
pub fn nudft(signal: &SampledSignal, freqs: &[f64]) -> Result<Spectrum, SpectrumError> {
    if signal.is_empty() {
        return Err(SpectrumError::EmptySignal);
    }
    if let Some(&w) = freqs.iter().find(|&&w| !(0.0..TAU).contains(&w)) {
        return Err(SpectrumError::FrequencyOutOfRange(w));
    }
    check_increasing(freqs)?;
    let amps = freqs
        .iter()
        .map(|&w| {
            signal
                .values
                .iter()
                .enumerate()
                .map(|(n, x)| x * Complex64::from_polar(1.0, -w * n as f64))
                .sum()
        })
        .collect();
    Ok(Spectrum { freqs: freqs.to_vec(), amps })
}

/// `x_n = (1/M) sum_m X_m e^{i omega_m n}` for `n = 0..N`.
pub fn inudft(spectrum: &Spectrum, n: usize) -> Result<SampledSignal, SpectrumError> {
    if spectrum.is_empty() {
        return Err(SpectrumError::EmptySpectrum);
    }
    let m = spectrum.len() as f64;
    let values = (0..n)
        .map(|t| {
            let s: Complex64 = spectrum
                .freqs
                .iter()
                .zip(&spectrum.amps)
                .map(|(&w, a)| a * Complex64::from_polar(1.0, w * t as f64))
                .sum();
            s / m
        })
        .collect();
    Ok(SampledSignal { values })
}

/// Pointwise nonlinearities used to demonstrate harmonic generation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Square,
    Silu,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Square => x * x,
            Activation::Silu => x / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" | "none" => Some(Activation::Identity),
            "square" => Some(Activation::Square),
            "silu" => Some(Activation::Silu),
            "tanh" => Some(Activation::Tanh),
            _ => None,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Identity => "identity",
            Activation::Square => "square",
            Activation::Silu => "silu",
            Activation::Tanh => "tanh",
        })
    }
}

/// Uniform-grid spectrum of `activation(x_n)` for a real signal.
pub fn nonlinearity_spectrum(
    signal: &SampledSignal,
    activation: Activation,
) -> Result<Spectrum, SpectrumError> {
    if let Some(i) = signal.values.iter().position(|v| v.im != 0.0) {
        return Err(SpectrumError::ComplexInput(i));
    }
    let out: Vec<f64> = signal.values.iter().map(|v| activation.apply(v.re)).collect();
    nudft(&SampledSignal::from_real(&out), &uniform_grid(signal.len()))
}

/// Largest `|trace[n + p] - trace[n]|` with `p = round(period)`.
pub fn periodicity_violation(trace: &[f64], period: f64) -> Result<f64, SpectrumError> {
    if !(period >= 1.0) || !period.is_finite() {
        return Err(SpectrumError::Invalid(format!("period {period} must be >= 1")));
    }
    let p = period.round() as usize;
    if trace.len() < 2 * p {
        return Err(SpectrumError::TraceTooShort { len: trace.len(), needed: 2 * p });
    }
    Ok((0..trace.len() - p)
        .map(|n| (trace[n + p] - trace[n]).abs())
        .fold(0.0, f64::max))
}

/// Real part of `(1 - sigma) e^{i omega_m n} + sigma e^{i omega_o n}`: a
/// single-frequency score contaminated by a second frequency.
pub fn mixed_trace(omega_m: f64, omega_o: f64, sigma: f64, len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| {
            let n = n as f64;
            (1.0 - sigma) * (omega_m * n).cos() + sigma * (omega_o * n).cos()
        })
        .collect()
}

/// Per-half indices whose frequency finishes fewer than one cycle over the
/// training length.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UndertrainedDims {
    pub head_dim: usize,
    /// Zero-based `m` in `0..head_dim/2`.
    pub per_half: Vec<usize>,
}

impl UndertrainedDims {
    /// Every affected dimension of the full head, zero-based: `m` and
    /// `m + head_dim/2`.
    pub fn full_dims(&self) -> Vec<usize> {
        let half = self.head_dim / 2;
        let mut v = self.per_half.clone();
        v.extend(self.per_half.iter().map(|m| m + half));
        v
    }

    /// Contiguous one-indexed ranges over the full head dimension.
    pub fn one_indexed_ranges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for d in self.full_dims() {
            let d1 = d + 1;
            match out.last_mut() {
                Some((_, hi)) if *hi + 1 == d1 => *hi = d1,
                _ => out.push((d1, d1)),
            }
        }
        out
    }
}

impl fmt::Display for UndertrainedDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ranges = self.one_indexed_ranges();
        if ranges.is_empty() {
            return f.write_str("(none)");
        }
        let parts: Vec<String> = ranges.iter().map(|(a, b)| format!("[{a},{b}]")).collect();
        f.write_str(&parts.join("∪"))
    }
}

pub fn undertrained_dims(
    head_dim: usize,
    base_theta: f64,
    train_length: usize,
) -> Result<UndertrainedDims, SpectrumError> {
    let s = build_schedule(head_dim, base_theta, train_length, true)?;
    Ok(UndertrainedDims {
        head_dim,
        per_half: (0..s.half()).filter(|&m| s.zeroed_mask[m]).collect(),
    })
}
