use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::Add;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Spectrum, SpectrumError};

pub const MAX_POWER: u32 = 6;

/// Exact rational `num / 2^shift`, kept in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dyadic {
    num: i64,
    shift: u32,
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { num: 0, shift: 0 };
    pub const ONE: Dyadic = Dyadic { num: 1, shift: 0 };

    pub fn new(num: i64, shift: u32) -> Self {
        let mut d = Dyadic { num, shift };
        d.reduce();
        d
    }

    fn reduce(&mut self) {
        if self.num == 0 {
            self.shift = 0;
        }
        while self.shift > 0 && self.num % 2 == 0 {
            self.num /= 2;
            self.shift -= 1;
        }
    }

    pub fn half(self) -> Self {
        Dyadic::new(self.num, self.shift + 1)
    }

    pub fn numerator(self) -> i64 {
        self.num
    }

    pub fn denominator(self) -> i64 {
        1 << self.shift
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.denominator() as f64
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        let shift = self.shift.max(rhs.shift);
        let a = self.num << (shift - self.shift);
        let b = rhs.num << (shift - rhs.shift);
        Dyadic::new(a + b, shift)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.shift == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.denominator())
        }
    }
}

/// One term `coef * cos((j w1 + k w2) n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarmonicTerm {
    pub j: i32,
    pub k: i32,
    pub coef: Dyadic,
}

impl HarmonicTerm {
    pub fn label(&self) -> String {
        fn part(c: i32, name: &str) -> String {
            match c {
                1 => name.to_string(),
                -1 => format!("-{name}"),
                _ => format!("{c}{name}"),
            }
        }
        match (self.j, self.k) {
            (0, 0) => "0".into(),
            (j, 0) => part(j, "w1"),
            (0, k) => part(k, "w2"),
            (j, k) if k < 0 => format!("{}-{}", part(j, "w1"), part(-k, "w2")),
            (j, k) => format!("{}+{}", part(j, "w1"), part(k, "w2")),
        }
    }
}

/// `(cos w1 n + cos w2 n)^p` as a sum of cosines with exact coefficients.
///
/// Terms are keyed by `(j, k)` normalised so the first non-zero entry is
/// positive (cosine is even), and sorted by that key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicExpansion {
    pub power: u32,
    pub terms: Vec<HarmonicTerm>,
}

fn canonical(j: i32, k: i32) -> (i32, i32) {
    if j < 0 || (j == 0 && k < 0) {
        (-j, -k)
    } else {
        (j, k)
    }
}

impl HarmonicExpansion {
    pub fn new(power: u32) -> Result<Self, SpectrumError> {
        if !(1..=MAX_POWER).contains(&power) {
            return Err(SpectrumError::Invalid(format!("power {power} outside 1..={MAX_POWER}")));
        }
        let mut acc: BTreeMap<(i32, i32), Dyadic> = BTreeMap::from([((0, 0), Dyadic::ONE)]);
        for _ in 0..power {
            let mut next: BTreeMap<(i32, i32), Dyadic> = BTreeMap::new();
            for (&(j, k), &c) in &acc {
                // cos a cos b = (cos(a - b) + cos(a + b)) / 2
                for (dj, dk) in [(1, 0), (0, 1)] {
                    for key in [canonical(j - dj, k - dk), canonical(j + dj, k + dk)] {
                        let e = next.entry(key).or_insert(Dyadic::ZERO);
                        *e = *e + c.half();
                    }
                }
            }
            acc = next;
        }
        let terms = acc
            .into_iter()
            .filter(|(_, c)| c.numerator() != 0)
            .map(|((j, k), coef)| HarmonicTerm { j, k, coef })
            .collect();
        Ok(Self { power, terms })
    }

    /// Sum of all coefficients, the value of the expansion at `n = 0`.
    pub fn total(&self) -> Dyadic {
        self.terms.iter().fold(Dyadic::ZERO, |a, t| a + t.coef)
    }

    /// Evaluates the series at position `n`.
    pub fn eval(&self, w1: f64, w2: f64, n: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef.to_f64() * ((t.j as f64 * w1 + t.k as f64 * w2) * n).cos())
            .sum()
    }

    /// Numeric spectrum with frequencies folded into `[0, pi]` and coincident
    /// frequencies merged.
    pub fn spectrum(&self, w1: f64, w2: f64) -> Spectrum {
        let mut pairs: Vec<(f64, f64)> = self
            .terms
            .iter()
            .map(|t| (fold(t.j as f64 * w1 + t.k as f64 * w2), t.coef.to_f64()))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut freqs: Vec<f64> = Vec::new();
        let mut amps: Vec<Complex64> = Vec::new();
        for (w, c) in pairs {
            match freqs.last() {
                Some(&last) if (w - last).abs() <= 1e-12 => {
                    *amps.last_mut().expect("paired with freqs") += c;
                }
                _ => {
                    freqs.push(w);
                    amps.push(Complex64::new(c, 0.0));
                }
            }
        }
        Spectrum::new(freqs, amps).expect("sorted and merged")
    }
}

/// Maps any angle onto `[0, pi]` using `2 pi` periodicity and evenness.
fn fold(w: f64) -> f64 {
    let r = w.rem_euclid(TAU);
    if r > PI {
        TAU - r
    } else {
        r
    }
}

/// Spectrum of `(cos w1 n + cos w2 n)^p`.
pub fn harmonic_expansion(input_freqs: (f64, f64), power: u32) -> Result<Spectrum, SpectrumError> {
    Ok(HarmonicExpansion::new(power)?.spectrum(input_freqs.0, input_freqs.1))
}
