use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{FrequencySchedule, PosEmbError};
use crate::numerics::{Matrix, RngSeed};

/// Columns whose sum falls under this magnitude cannot be normalised.
pub const MIN_COLUMN_SUM: f64 = 1e-6;

/// Frozen per-head mixing matrices that turn `D` source frequencies into the
/// Fourier series used by each rotated dimension.
///
/// Rows `0..retained` of every matrix belong to the retained schedule
/// frequencies (in schedule order); the remaining rows are extra frequencies.
/// Output column `c` drives dimension pair `(c, c + head_dim/2)`; pairs at or
/// beyond `d_out` carry the zero frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierCoefficients {
    pub num_heads: usize,
    pub head_dim: usize,
    pub retained: usize,
    pub d_out: usize,
    pub sigma: f64,
    pub source_freqs: Vec<f64>,
    pub sin_coef: Vec<Matrix>,
    pub cos_coef: Vec<Matrix>,
}

/// Samples FoPE coefficients for `schedule`. `num_freqs` is the total number
/// of source frequencies `D`.
pub fn init_fourier_coefficients(
    schedule: &FrequencySchedule,
    num_heads: usize,
    num_freqs: usize,
    sigma: f64,
    seed: RngSeed,
) -> Result<FourierCoefficients, PosEmbError> {
    schedule.check_invariants()?;
    let retained_idx = schedule.retained();
    let retained = retained_idx.len();
    if num_freqs < retained {
        return Err(PosEmbError::TooFewFrequencies {
            requested: num_freqs,
            retained,
        });
    }
    if !(sigma >= 0.0) || num_heads == 0 {
        return Err(PosEmbError::Invalid(format!(
            "sigma {sigma} and num_heads {num_heads} must be non-negative / positive"
        )));
    }
    let d_out = retained.min(schedule.head_dim / 4);
    let mut rng = seed.rng();

    let mut source_freqs: Vec<f64> = retained_idx.iter().map(|&m| schedule.frequencies[m]).collect();
    for _ in retained..num_freqs {
        let u: f64 = rng.random();
        source_freqs.push(PI * (1.0 - u));
    }

    let std = sigma * (2.0 / (num_freqs + d_out) as f64).sqrt();
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
        let mut m = Matrix::randn(num_freqs, d_out, 1.0, rng);
        for v in m.data_mut() {
            *v *= std;
        }
        for c in 0..d_out {
            m.set(c, c, m.get(c, c) + 1.0);
        }
        m
    };
    let mut sin_coef = Vec::with_capacity(num_heads);
    let mut cos_coef = Vec::with_capacity(num_heads);
    for _ in 0..num_heads {
        sin_coef.push(draw(&mut rng));
        cos_coef.push(draw(&mut rng));
    }

    let coeffs = FourierCoefficients {
        num_heads,
        head_dim: schedule.head_dim,
        retained,
        d_out,
        sigma,
        source_freqs,
        sin_coef,
        cos_coef,
    };
    for h in 0..num_heads {
        for m in [&coeffs.sin_coef[h], &coeffs.cos_coef[h]] {
            for (c, s) in column_sums(m).into_iter().enumerate() {
                if s.abs() < MIN_COLUMN_SUM {
                    return Err(PosEmbError::DegenerateColumn { head: h, column: c, sum: s });
                }
            }
        }
    }
    Ok(coeffs)
}

pub(crate) fn column_sums(m: &Matrix) -> Vec<f64> {
    let mut sums = vec![0.0; m.cols()];
    for r in 0..m.rows() {
        for (s, v) in sums.iter_mut().zip(m.row(r)) {
            *s += v;
        }
    }
    sums
}

/// Column-normalised copy (each column divided by its sum).
pub(crate) fn normalized(m: &Matrix) -> Matrix {
    let sums = column_sums(m);
    let mut out = m.clone();
    for r in 0..out.rows() {
        for (v, s) in out.row_mut(r).iter_mut().zip(&sums) {
            *v /= s;
        }
    }
    out
}

impl FourierCoefficients {
    /// True when these coefficients were built for `schedule`.
    pub fn matches(&self, schedule: &FrequencySchedule) -> bool {
        let retained = schedule.retained();
        self.head_dim == schedule.head_dim
            && self.retained == retained.len()
            && retained
                .iter()
                .zip(&self.source_freqs)
                .all(|(&m, &w)| schedule.frequencies[m] == w)
    }

    /// Order-sensitive checksum of every coefficient, used to confirm the
    /// matrices are never touched by training.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for m in self.sin_coef.iter().chain(&self.cos_coef) {
            for v in m.data() {
                for b in v.to_bits().to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x0100_0000_01b3);
                }
            }
        }
        h
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("coefficients serialise")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posemb::build_schedule;

    fn schedule() -> FrequencySchedule {
        build_schedule(64, 10000.0, 512, true).unwrap()
    }

    #[test]
    fn zero_sigma_gives_one_hot_columns() {
        let s = schedule();
        let c = init_fourier_coefficients(&s, 2, 40, 0.0, RngSeed(1)).unwrap();
        for m in c.sin_coef.iter().chain(&c.cos_coef) {
            for r in 0..m.rows() {
                for col in 0..m.cols() {
                    assert_eq!(m.get(r, col), if r == col { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn sixty_million_scale_shapes() {
        // 60M configuration: head_dim 64, sigma 0.3, D 64
        let s = schedule();
        let c = init_fourier_coefficients(&s, 8, 64, 0.3, RngSeed(5)).unwrap();
        assert_eq!(c.source_freqs.len(), 64);
        assert_eq!(c.d_out, c.retained.min(16));
        assert_eq!(c.sin_coef[0].shape(), (64, c.d_out));
        assert!(c.matches(&s));
        assert!(c.source_freqs.iter().all(|&w| w > 0.0 && w <= PI));
        let mut sorted = c.source_freqs.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        assert_eq!(sorted.len(), 64);
    }

    #[test]
    fn seeded_draws_repeat() {
        let s = schedule();
        let a = init_fourier_coefficients(&s, 4, 32, 0.3, RngSeed(9)).unwrap();
        let b = init_fourier_coefficients(&s, 4, 32, 0.3, RngSeed(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.checksum(), b.checksum());
        let c = init_fourier_coefficients(&s, 4, 32, 0.3, RngSeed(10)).unwrap();
        assert_ne!(a.checksum(), c.checksum());
    }

    #[test]
    fn too_few_frequencies_rejected() {
        let s = schedule();
        let r = s.retained().len();
        assert!(matches!(
            init_fourier_coefficients(&s, 1, r - 1, 0.3, RngSeed(0)),
            Err(PosEmbError::TooFewFrequencies { .. })
        ));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let s = schedule();
        let c = init_fourier_coefficients(&s, 2, 24, 0.3, RngSeed(3)).unwrap();
        let back = FourierCoefficients::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        let sj = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<FrequencySchedule>(&sj).unwrap(), s);
    }
}
