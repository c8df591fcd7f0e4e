//! Positional embeddings for attention: RoPE, Fourier position embedding
//! (FoPE), NoPE and ALiBi.
//!
//! Rotations use half-split pairing: dimension `j` pairs with `j + head_dim/2`.
//! Every rotary-style method is expressed as a pair of per-position tables
//! (`cos`, `sin`, each `positions x head_dim/2`) fed to the same rotate-half
//! formula, so RoPE and FoPE differ only in how the tables are built.

mod coefficients;
mod schedule;

use serde::{Deserialize, Serialize};

pub use coefficients::{init_fourier_coefficients, FourierCoefficients, MIN_COLUMN_SUM};
pub use schedule::{build_schedule, floor_frequency, rope_a_schedule, FrequencySchedule};

use crate::numerics::Matrix;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum PosEmbError {
    #[error("head_dim must be even, got {0}")]
    OddHeadDim(usize),
    #[error("need at least {retained} source frequencies, got {requested}")]
    TooFewFrequencies { requested: usize, retained: usize },
    #[error(
        "coefficient column {column} of head {head} sums to {sum:e}; reseed the initialisation"
    )]
    DegenerateColumn { head: usize, column: usize, sum: f64 },
    #[error("position list has {positions} entries but input has {rows} rows")]
    PositionCount { positions: usize, rows: usize },
    #[error("coefficients do not match the frequency schedule")]
    InconsistentCoefficients,
    #[error("{0}")]
    Invalid(String),
}

/// Which positional scheme an attention layer uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbeddingKind {
    Nope,
    Rope,
    /// RoPE with every frequency moved to a whole number of training cycles.
    RopeA,
    Fope { fs_enabled: bool, cf_enabled: bool },
    Alibi,
}

impl EmbeddingKind {
    pub const FOPE: EmbeddingKind = EmbeddingKind::Fope {
        fs_enabled: true,
        cf_enabled: true,
    };

    pub fn label(&self) -> &'static str {
        match self {
            EmbeddingKind::Nope => "NoPE",
            EmbeddingKind::Rope => "RoPE",
            EmbeddingKind::RopeA => "RoPE-A",
            EmbeddingKind::Fope {
                fs_enabled: true,
                cf_enabled: true,
            } => "FoPE",
            EmbeddingKind::Fope {
                fs_enabled: true,
                cf_enabled: false,
            } => "FoPE-FS",
            EmbeddingKind::Fope {
                fs_enabled: false,
                cf_enabled: true,
            } => "FoPE-CF",
            EmbeddingKind::Fope { .. } => "FoPE-none",
            EmbeddingKind::Alibi => "ALiBi",
        }
    }

    pub fn parse(label: &str) -> Option<EmbeddingKind> {
        let kind = match label.to_ascii_lowercase().as_str() {
            "nope" => EmbeddingKind::Nope,
            "rope" => EmbeddingKind::Rope,
            "rope-a" | "ropea" => EmbeddingKind::RopeA,
            "fope" => EmbeddingKind::FOPE,
            "fope-fs" => EmbeddingKind::Fope {
                fs_enabled: true,
                cf_enabled: false,
            },
            "fope-cf" => EmbeddingKind::Fope {
                fs_enabled: false,
                cf_enabled: true,
            },
            "fope-none" => EmbeddingKind::Fope {
                fs_enabled: false,
                cf_enabled: false,
            },
            "alibi" => EmbeddingKind::Alibi,
            _ => return None,
        };
        Some(kind)
    }
}

/// Per-position `cos` and `sin` tables for one head.
#[derive(Clone, Debug, PartialEq)]
pub struct RotaryTables {
    pub cos: Matrix,
    pub sin: Matrix,
}

/// Plain RoPE tables: `cos(n w_m)`, `sin(n w_m)`, with zeroed frequencies as identity.
pub fn rope_tables(schedule: &FrequencySchedule, positions: &[usize]) -> RotaryTables {
    let freqs = schedule.effective();
    let half = freqs.len();
    let mut cos = Matrix::zeros(positions.len(), half);
    let mut sin = Matrix::zeros(positions.len(), half);
    for (r, &p) in positions.iter().enumerate() {
        for (m, &w) in freqs.iter().enumerate() {
            if w == 0.0 {
                cos.set(r, m, 1.0);
            } else {
                let a = p as f64 * w;
                cos.set(r, m, a.cos());
                sin.set(r, m, a.sin());
            }
        }
    }
    RotaryTables { cos, sin }
}

/// FoPE tables for `head`: column-normalised Fourier-series mixes of the
/// source frequencies, zero frequency (cos 1, sin 0) past `d_out`.
pub fn fope_tables(coeffs: &FourierCoefficients, head: usize, positions: &[usize]) -> RotaryTables {
    let half = coeffs.head_dim / 2;
    let d = coeffs.source_freqs.len();
    let sin_w = coefficients::normalized(&coeffs.sin_coef[head]);
    let cos_w = coefficients::normalized(&coeffs.cos_coef[head]);
    let mut src_sin = Matrix::zeros(positions.len(), d);
    let mut src_cos = Matrix::zeros(positions.len(), d);
    for (r, &p) in positions.iter().enumerate() {
        for (j, &w) in coeffs.source_freqs.iter().enumerate() {
            let a = p as f64 * w;
            src_sin.set(r, j, a.sin());
            src_cos.set(r, j, a.cos());
        }
    }
    let mix_sin = src_sin.matmul(&sin_w).expect("source/coef shapes");
    let mix_cos = src_cos.matmul(&cos_w).expect("source/coef shapes");
    let mut cos = Matrix::filled(positions.len(), half, 1.0);
    let mut sin = Matrix::zeros(positions.len(), half);
    for r in 0..positions.len() {
        cos.row_mut(r)[..coeffs.d_out].copy_from_slice(mix_cos.row(r));
        sin.row_mut(r)[..coeffs.d_out].copy_from_slice(mix_sin.row(r));
    }
    RotaryTables { cos, sin }
}

/// Applies the rotate-half formula row by row:
/// `(x1, x2) -> (x1 cos - x2 sin, x2 cos + x1 sin)`.
pub fn apply_tables(x: &Matrix, tables: &RotaryTables) -> Result<Matrix, PosEmbError> {
    let half = x.cols() / 2;
    if x.cols() % 2 != 0 {
        return Err(PosEmbError::OddHeadDim(x.cols()));
    }
    if tables.cos.shape() != (x.rows(), half) {
        return Err(PosEmbError::Invalid(format!(
            "tables are {}x{}, input is {}x{}",
            tables.cos.rows(),
            tables.cos.cols(),
            x.rows(),
            x.cols()
        )));
    }
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        let (xr, c, s) = (x.row(r), tables.cos.row(r), tables.sin.row(r));
        let o = out.row_mut(r);
        for j in 0..half {
            let (x1, x2) = (xr[j], xr[j + half]);
            o[j] = x1 * c[j] - x2 * s[j];
            o[j + half] = x2 * c[j] + x1 * s[j];
        }
    }
    Ok(out)
}

fn check_positions(x: &Matrix, positions: &[usize], head_dim: usize) -> Result<(), PosEmbError> {
    if positions.len() != x.rows() {
        return Err(PosEmbError::PositionCount {
            positions: positions.len(),
            rows: x.rows(),
        });
    }
    if x.cols() != head_dim {
        return Err(PosEmbError::Invalid(format!(
            "input has {} columns, schedule expects {head_dim}",
            x.cols()
        )));
    }
    Ok(())
}

/// RoPE on one head's rows (`positions[i]` is the position of row `i`).
pub fn apply_rope(
    x: &Matrix,
    positions: &[usize],
    schedule: &FrequencySchedule,
) -> Result<Matrix, PosEmbError> {
    check_positions(x, positions, schedule.head_dim)?;
    apply_tables(x, &rope_tables(schedule, positions))
}

/// FoPE on one head's rows. With `fs_enabled = false` the coefficients are
/// ignored (one-hot mixing); with `cf_enabled = false` clipping is undone.
pub fn apply_fope(
    x: &Matrix,
    positions: &[usize],
    schedule: &FrequencySchedule,
    coeffs: &FourierCoefficients,
    head: usize,
    fs_enabled: bool,
    cf_enabled: bool,
) -> Result<Matrix, PosEmbError> {
    check_positions(x, positions, schedule.head_dim)?;
    let schedule = if cf_enabled {
        schedule.clone()
    } else {
        schedule.unclipped()
    };
    if !fs_enabled {
        return apply_tables(x, &rope_tables(&schedule, positions));
    }
    if !coeffs.matches(&schedule) || head >= coeffs.num_heads {
        return Err(PosEmbError::InconsistentCoefficients);
    }
    apply_tables(x, &fope_tables(coeffs, head, positions))
}

/// A fully specified positional scheme for a model or an analysis.
#[derive(Clone, Debug, PartialEq)]
pub enum PositionEncoding {
    Nope,
    Rotary(FrequencySchedule),
    Fourier(FourierCoefficients),
    Alibi { num_heads: usize },
}

impl PositionEncoding {
    /// Rotation tables for `head`, or `None` when the scheme does not rotate.
    pub fn tables(&self, head: usize, positions: &[usize]) -> Option<RotaryTables> {
        match self {
            PositionEncoding::Rotary(s) => Some(rope_tables(s, positions)),
            PositionEncoding::Fourier(c) => Some(fope_tables(c, head, positions)),
            PositionEncoding::Nope | PositionEncoding::Alibi { .. } => None,
        }
    }

    pub fn coefficients(&self) -> Option<&FourierCoefficients> {
        match self {
            PositionEncoding::Fourier(c) => Some(c),
            _ => None,
        }
    }
}

/// ALiBi slope of head `h` (0-indexed): `2^(-8 (h+1) / num_heads)`.
pub fn alibi_slope(h: usize, num_heads: usize) -> f64 {
    2f64.powf(-8.0 * (h + 1) as f64 / num_heads as f64)
}

/// Causal ALiBi biases: `-slope_h (i - j)` for `j <= i`, `-inf` above the diagonal.
pub fn attention_bias_alibi(num_heads: usize, seq_len: usize) -> Vec<Matrix> {
    (0..num_heads)
        .map(|h| {
            let slope = alibi_slope(h, num_heads);
            let mut m = Matrix::zeros(seq_len, seq_len);
            for i in 0..seq_len {
                for j in 0..seq_len {
                    let v = if j <= i {
                        -slope * (i - j) as f64
                    } else {
                        f64::NEG_INFINITY
                    };
                    m.set(i, j, v);
                }
            }
            m
        })
        .collect()
}

/// Attention logit between a query at position `n` and a key at position 0,
/// for `n = 0..=max_distance`, computed as the real inner product of the
/// rotated vectors. Non-rotary schemes return the constant `<q, k>`
/// (plus the ALiBi bias of `head` when applicable).
pub fn attention_score_trace(
    q: &[f64],
    k: &[f64],
    encoding: &PositionEncoding,
    head: usize,
    max_distance: usize,
) -> Result<Vec<f64>, PosEmbError> {
    if q.len() != k.len() || q.len() % 2 != 0 {
        return Err(PosEmbError::Invalid(format!(
            "q and k must share an even length, got {} and {}",
            q.len(),
            k.len()
        )));
    }
    let positions: Vec<usize> = (0..=max_distance).collect();
    let qm = Matrix::new(1, q.len(), q.to_vec()).expect("row");
    let km = Matrix::new(1, k.len(), k.to_vec()).expect("row");
    let Some(tables) = encoding.tables(head, &positions) else {
        let base: f64 = q.iter().zip(k).map(|(a, b)| a * b).sum();
        return Ok(positions
            .iter()
            .map(|&n| match encoding {
                PositionEncoding::Alibi { num_heads } => {
                    base - alibi_slope(head, *num_heads) * n as f64
                }
                _ => base,
            })
            .collect());
    };
    let half = q.len() / 2;
    if tables.cos.cols() != half {
        return Err(PosEmbError::Invalid("encoding head_dim differs from q/k".into()));
    }
    let k0 = apply_tables(
        &km,
        &RotaryTables {
            cos: Matrix::new(1, half, tables.cos.row(0).to_vec()).expect("row"),
            sin: Matrix::new(1, half, tables.sin.row(0).to_vec()).expect("row"),
        },
    )?;
    Ok((0..=max_distance)
        .map(|n| {
            let t = RotaryTables {
                cos: Matrix::new(1, half, tables.cos.row(n).to_vec()).expect("row"),
                sin: Matrix::new(1, half, tables.sin.row(n).to_vec()).expect("row"),
            };
            let qn = apply_tables(&qm, &t).expect("shapes checked");
            qn.data().iter().zip(k0.data()).map(|(a, b)| a * b).sum()
        })
        .collect())
}
