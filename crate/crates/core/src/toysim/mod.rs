//! Two-frequency toy attention: a hidden state built from `cos w1 n` and
//! `cos w2 n` is mixed by a 2x2 layer and passed through an activation, and
//! the resulting score trace is compared against what a single-frequency
//! (RoPE) and a Fourier-series (FoPE) embedding can represent.

mod probe;

use std::f64::consts::{PI, TAU};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelError;
use crate::numerics::{least_squares, Matrix, NumericsError, RngSeed};
use crate::posemb::{fope_tables, init_fourier_coefficients, FourierCoefficients, FrequencySchedule, PosEmbError};
use crate::report::{Csv, Precision};
use crate::spectrum::{nudft, uniform_grid, Activation, SampledSignal, SpectrumError};

pub use crate::posemb::rope_a_schedule;
pub use probe::{qk_bias_probe, QkProbe};

/// Spectral components below this fraction of a dimension's peak are dropped
/// when rebuilding the ground truth.
pub const GROUND_TRUTH_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ToySimError {
    #[error("invalid toy configuration: {0}")]
    Config(String),
    #[error("mlp weight row {0} is all zeros")]
    DegenerateWeights(usize),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    PosEmb(#[from] PosEmbError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub omega_pair: (f64, f64),
    pub mlp_weights: Matrix,
    pub activation: Activation,
    pub max_distance: usize,
    /// Samples used for the spectral analysis; harmonics of on-grid input
    /// frequencies stay on this grid.
    pub grid_size: usize,
    pub seed: RngSeed,
}

impl Default for ToyConfig {
    fn default() -> Self {
        let grid = 1024;
        Self {
            omega_pair: (TAU * 37.0 / grid as f64, TAU * 101.0 / grid as f64),
            mlp_weights: Matrix::from_rows(&[[0.7, 0.3], [0.3, 0.7]]),
            activation: Activation::Silu,
            max_distance: 511,
            grid_size: grid,
            seed: RngSeed(0),
        }
    }
}

impl ToyConfig {
    /// Identity weights and activation: no spectrum damage at all.
    pub fn identity() -> Self {
        Self {
            mlp_weights: Matrix::identity(2),
            activation: Activation::Identity,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ToySimError> {
        let (w1, w2) = self.omega_pair;
        for w in [w1, w2] {
            if !(w > 0.0 && w <= PI) {
                return Err(ToySimError::Config(format!("frequency {w} outside (0, pi]")));
            }
        }
        if w1 == w2 {
            return Err(ToySimError::Config("the two frequencies must differ".into()));
        }
        if self.mlp_weights.shape() != (2, 2) {
            return Err(ToySimError::Config("mlp_weights must be 2x2".into()));
        }
        for r in 0..2 {
            if self.mlp_weights.row(r).iter().all(|&v| v == 0.0) {
                return Err(ToySimError::DegenerateWeights(r));
            }
        }
        if self.grid_size < 8 {
            return Err(ToySimError::Config("grid_size must be at least 8".into()));
        }
        Ok(())
    }

    /// Output of dimension `d` at position `n`.
    pub fn hidden(&self, d: usize, n: f64) -> f64 {
        let (w1, w2) = self.omega_pair;
        let pre = self.mlp_weights.get(d, 0) * (w1 * n).cos() + self.mlp_weights.get(d, 1) * (w2 * n).cos();
        self.activation.apply(pre)
    }

    /// Schedule whose two retained frequencies are the toy pair, padded with
    /// two clipped slots so the FoPE output width covers both dimensions.
    pub fn schedule(&self) -> FrequencySchedule {
        let (w1, w2) = self.omega_pair;
        FrequencySchedule {
            head_dim: 8,
            base_theta: 10000.0,
            train_length: self.grid_size,
            frequencies: vec![w1, w2, 0.0, 0.0],
            zeroed_mask: vec![false, false, true, true],
        }
    }

    /// Samples one head of FoPE coefficients for the toy pair.
    pub fn sample_coefficients(&self, sigma: f64, num_freqs: usize) -> Result<FourierCoefficients, ToySimError> {
        Ok(init_fourier_coefficients(&self.schedule(), 1, num_freqs, sigma, self.seed)?)
    }
}

/// How the FoPE trace obtains its mixing weights.
#[derive(Clone, Debug)]
pub enum ToyFope {
    /// Coefficients drawn as for a model.
    Sampled(FourierCoefficients),
    /// Least-squares weights over the input pair plus every frequency found
    /// in the activated spectrum.
    Fit,
}

/// Score traces indexed by distance `0..=max_distance`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceBundle {
    pub ground_truth: Vec<f64>,
    pub rope_scores: Vec<f64>,
    pub fope_scores: Vec<f64>,
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

impl TraceBundle {
    pub fn rope_gap(&self) -> f64 {
        l2(&self.rope_scores, &self.ground_truth)
    }

    pub fn fope_gap(&self) -> f64 {
        l2(&self.fope_scores, &self.ground_truth)
    }

    pub fn to_csv(&self, precision: Precision) -> Csv {
        let mut csv = Csv::new(&["n", "ground_truth", "rope", "fope"], precision);
        for n in 0..self.ground_truth.len() {
            csv.row(vec![
                n.into(),
                self.ground_truth[n].into(),
                self.rope_scores[n].into(),
                self.fope_scores[n].into(),
            ]);
        }
        csv
    }

    pub fn write_csv(&self, path: &Path, precision: Precision) -> std::io::Result<()> {
        self.to_csv(precision).write(path)
    }
}

/// Retained spectral content of one activated dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct DimensionSpectrum {
    /// Uniform-grid bin frequencies kept, in `[0, 2 pi)`.
    pub freqs: Vec<f64>,
    pub amps: Vec<Complex64>,
    pub grid_size: usize,
}

impl DimensionSpectrum {
    /// Inverse transform restricted to the kept bins, real part.
    pub fn synthesize(&self, n: f64) -> f64 {
        let s: f64 = self
            .freqs
            .iter()
            .zip(&self.amps)
            .map(|(&w, a)| (a * Complex64::from_polar(1.0, w * n)).re)
            .sum();
        s / self.grid_size as f64
    }

    /// Kept frequencies folded into `[0, pi]`, deduplicated.
    pub fn folded_freqs(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.freqs.iter().map(|&w| if w > PI { TAU - w } else { w }).collect();
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        v
    }
}

/// Spectrum of each activated dimension on the uniform grid, thresholded.
pub fn dimension_spectra(config: &ToyConfig) -> Result<[DimensionSpectrum; 2], ToySimError> {
    config.validate()?;
    let m = config.grid_size;
    let grid = uniform_grid(m);
    let one = |d: usize| -> Result<DimensionSpectrum, ToySimError> {
        let samples: Vec<f64> = (0..m).map(|n| config.hidden(d, n as f64)).collect();
        let spec = nudft(&SampledSignal::from_real(&samples), &grid)?;
        let cut = GROUND_TRUTH_THRESHOLD * spec.max_magnitude();
        let (freqs, amps) = spec
            .freqs()
            .iter()
            .zip(spec.amplitudes())
            .filter(|(_, a)| a.norm() > cut)
            .map(|(&w, &a)| (w, a))
            .unzip();
        Ok(DimensionSpectrum { freqs, amps, grid_size: m })
    };
    Ok([one(0)?, one(1)?])
}

pub fn run_toy(config: &ToyConfig, fope: &ToyFope) -> Result<TraceBundle, ToySimError> {
    let spectra = dimension_spectra(config)?;
    let len = config.max_distance + 1;
    let (w1, w2) = config.omega_pair;
    let own = [w1, w2];

    let per_dim: Vec<Vec<f64>> = spectra
        .iter()
        .map(|s| (0..len).map(|n| s.synthesize(n as f64)).collect())
        .collect();
    let ground_truth: Vec<f64> = (0..len).map(|n| per_dim[0][n] + per_dim[1][n]).collect();

    // RoPE puts a dimension's whole weight on its own single frequency.
    let weight = [per_dim[0][0], per_dim[1][0]];
    let rope_scores: Vec<f64> = (0..len)
        .map(|n| (0..2).map(|d| weight[d] * (own[d] * n as f64).cos()).sum())
        .collect();

    let fope_scores = match fope {
        ToyFope::Sampled(coeffs) => {
            if coeffs.d_out < 2 || coeffs.source_freqs.first() != Some(&w1) || coeffs.source_freqs.get(1) != Some(&w2) {
                return Err(PosEmbError::InconsistentCoefficients.into());
            }
            let positions: Vec<usize> = (0..len).collect();
            let tables = fope_tables(coeffs, 0, &positions);
            (0..len)
                .map(|n| (0..2).map(|d| weight[d] * tables.cos.get(n, d)).sum())
                .collect()
        }
        ToyFope::Fit => {
            let mut freqs = own.to_vec();
            for s in &spectra {
                freqs.extend(s.folded_freqs());
            }
            freqs.sort_by(f64::total_cmp);
            freqs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            let mut basis = Matrix::zeros(len, freqs.len());
            for n in 0..len {
                for (c, &w) in freqs.iter().enumerate() {
                    basis.set(n, c, (w * n as f64).cos());
                }
            }
            let coef = least_squares(&basis, &ground_truth)?;
            (0..len)
                .map(|n| basis.row(n).iter().zip(&coef).map(|(b, c)| b * c).sum())
                .collect()
        }
    };

    Ok(TraceBundle { ground_truth, rope_scores, fope_scores })
}
