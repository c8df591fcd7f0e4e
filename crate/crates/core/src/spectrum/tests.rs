use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::numerics::{least_squares, Matrix, RngSeed};

fn random_signal(n: usize, seed: u64) -> SampledSignal {
    let mut rng = RngSeed(seed).rng();
    let values = (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    SampledSignal::new(values).unwrap()
}

fn max_err(a: &SampledSignal, b: &SampledSignal) -> f64 {
    a.values.iter().zip(&b.values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn constant_signal_is_an_impulse_at_zero() {
    let x = SampledSignal::from_real(&[1.0; 8]);
    let s = nudft(&x, &uniform_grid(8)).unwrap();
    assert!((s.amplitudes()[0] - Complex64::new(8.0, 0.0)).norm() < 1e-12);
    assert!(s.amplitudes()[1..].iter().all(|a| a.norm() < 1e-12));
}

#[test]
fn root_of_unity_lands_in_its_bin() {
    let (n, k) = (16, 5);
    let x = SampledSignal::new(
        (0..n).map(|t| Complex64::from_polar(1.0, TAU * (k * t) as f64 / n as f64)).collect(),
    )
    .unwrap();
    let s = nudft(&x, &uniform_grid(n)).unwrap();
    for (m, a) in s.amplitudes().iter().enumerate() {
        let expect = if m == k { n as f64 } else { 0.0 };
        assert!((a - Complex64::new(expect, 0.0)).norm() < 1e-12, "bin {m}: {a}");
    }
}

#[test]
fn round_trip_on_uniform_grids() {
    for (i, n) in [16, 64, 256].into_iter().enumerate() {
        let x = random_signal(n, 100 + i as u64);
        let back = inudft(&nudft(&x, &uniform_grid(n)).unwrap(), n).unwrap();
        assert!(max_err(&x, &back) < 1e-9);
    }
}

#[test]
fn single_unit_component_inverts_to_ones() {
    let s = Spectrum::new(vec![0.0], vec![Complex64::new(1.0, 0.0)]).unwrap();
    let x = inudft(&s, 5).unwrap();
    assert!(x.values.iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-15));
}

#[test]
fn conjugate_pair_inverts_to_real_signal() {
    let w = 0.8;
    let a = Complex64::new(0.3, -1.1);
    let s = Spectrum::new(vec![w, TAU - w], vec![a, a.conj()]).unwrap();
    let x = inudft(&s, 40).unwrap();
    assert!(x.values.iter().all(|v| v.im.abs() < 1e-12));
}

#[test]
fn malformed_inputs_rejected() {
    let x = SampledSignal::from_real(&[1.0, 2.0]);
    assert_eq!(
        nudft(&SampledSignal::from_real(&[]), &[0.0]).unwrap_err(),
        SpectrumError::EmptySignal
    );
    assert!(matches!(nudft(&x, &[TAU]), Err(SpectrumError::FrequencyOutOfRange(_))));
    assert_eq!(nudft(&x, &[0.5, 0.5]).unwrap_err(), SpectrumError::NotIncreasing(1));
    assert!(Spectrum::new(vec![0.0], vec![]).is_err());
    assert!(inudft(&Spectrum::new(vec![], vec![]).unwrap(), 3).is_err());
}

#[test]
fn csv_is_sorted_with_fixed_header() {
    let s = nudft(&random_signal(8, 3), &uniform_grid(8)).unwrap();
    let text = s.to_csv(Precision::RoundTrip).finish();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("omega,re,im"));
    let omegas: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(omegas, s.freqs());
}

// truncation

#[test]
fn complete_cycle_leaves_a_pure_impulse() {
    let n = 64;
    let p = TruncationSpectrumParams::new(TAU / n as f64, n).unwrap();
    assert_eq!(p.alpha, 1);
    assert_eq!(p.remainder, 0.0);
    let grid = uniform_grid(256);
    let s = truncation_spectrum(&p, &grid).unwrap();
    for (w, a) in s.freqs().iter().zip(s.amplitudes()) {
        if (w - p.omega_m).abs() < 1e-12 {
            assert!((a.re - n as f64).abs() < 1e-9);
        } else {
            assert_eq!(a.re, 0.0, "sidelobe at {w}");
        }
    }
}

#[test]
fn quarter_cycle_is_dominated_by_the_remainder() {
    let n = 64;
    let w = PI / (2.0 * n as f64);
    let p = TruncationSpectrumParams::new(w, n).unwrap();
    assert_eq!(p.alpha, 0);
    let peak = p.eval(w).abs();
    let zero = p.eval(0.0).abs();
    assert!((peak - n as f64).abs() < 1e-9);
    // sin(pi/2) / (pi / 2N) = 2N / pi
    assert!((zero - 2.0 * n as f64 / PI).abs() < 1e-9);
    assert!(peak <= 2.0 * zero);
}

#[test]
fn alpha_matches_integer_division() {
    for period in [3usize, 7, 16, 50] {
        let w = TAU / period as f64;
        for n in 1..400 {
            let p = TruncationSpectrumParams::new(w, n).unwrap();
            assert_eq!(p.alpha, (n / period) as u64, "period {period}, n {n}");
            assert_eq!(p.alpha == 0, w < TAU / n as f64);
        }
    }
}

#[test]
fn closed_form_tracks_the_dft_of_a_truncated_wave() {
    // 4.3 cycles: alpha = 4
    let n = 64;
    let w = TAU * 4.3 / n as f64;
    let p = TruncationSpectrumParams::new(w, n).unwrap();
    assert_eq!(p.alpha, 4);
    let wave = SampledSignal::new((0..n).map(|t| Complex64::from_polar(1.0, w * t as f64)).collect())
        .unwrap();
    let dft = nudft(&wave, &[0.0, w]).unwrap();
    let peak = dft.amplitudes()[1].norm();
    assert!((p.eval(w) - peak).abs() / peak < 0.1);
    let zero = dft.amplitudes()[0].norm();
    assert!((p.eval(0.0).abs() - zero).abs() / peak < 0.1);
}

#[test]
fn sinc_term_is_continuous_through_its_limit() {
    let p = TruncationSpectrumParams::new(0.3, 50).unwrap();
    for d in [1e-9, 5e-9, 2e-8, 1e-7] {
        let series = p.eval(p.omega_m + d);
        let direct = (p.remainder * d).sin() / d;
        assert!((series - direct).abs() < 1e-6);
    }
}

proptest! {
    #[test]
    fn alpha_is_monotone_in_length(w in 0.001f64..3.0, n in 1usize..5000) {
        let a = TruncationSpectrumParams::new(w, n).unwrap().alpha;
        let b = TruncationSpectrumParams::new(w, n + 1).unwrap().alpha;
        prop_assert!(b >= a);
    }
}

// harmonics

#[test]
fn first_power_is_the_input() {
    let e = HarmonicExpansion::new(1).unwrap();
    let got: Vec<(i32, i32, Dyadic)> = e.terms.iter().map(|t| (t.j, t.k, t.coef)).collect();
    assert_eq!(got, vec![(0, 1, Dyadic::ONE), (1, 0, Dyadic::ONE)]);
}

#[test]
fn square_gives_the_five_term_table() {
    let e = HarmonicExpansion::new(2).unwrap();
    let half = Dyadic::new(1, 1);
    let mut got: Vec<(i32, i32, Dyadic)> = e.terms.iter().map(|t| (t.j, t.k, t.coef)).collect();
    got.sort_by_key(|t| (t.0, t.1));
    assert_eq!(
        got,
        vec![
            (0, 0, Dyadic::ONE),
            (0, 2, half),
            (1, -1, Dyadic::ONE),
            (1, 1, Dyadic::ONE),
            (2, 0, half),
        ]
    );
}

#[test]
fn coefficients_sum_to_two_to_the_p() {
    for p in 1..=MAX_POWER {
        assert_eq!(HarmonicExpansion::new(p).unwrap().total(), Dyadic::new(1 << p, 0));
    }
    assert!(HarmonicExpansion::new(0).is_err());
    assert!(HarmonicExpansion::new(MAX_POWER + 1).is_err());
}

#[test]
fn expansion_reproduces_the_power_pointwise() {
    let (w1, w2) = (0.7, 1.9);
    for p in 1..=MAX_POWER {
        let e = HarmonicExpansion::new(p).unwrap();
        for n in 0..200 {
            let n = n as f64;
            let direct = ((w1 * n).cos() + (w2 * n).cos()).powi(p as i32);
            assert!((e.eval(w1, w2, n) - direct).abs() < 1e-9);
        }
    }
}

/// Recovers cosine amplitudes at known frequencies by least squares over the
/// sampled signal: an inverse NUDFT that knows nothing about product-to-sum.
fn fitted_amplitudes(signal: &[f64], freqs: &[f64]) -> Vec<f64> {
    let mut a = Matrix::zeros(signal.len(), freqs.len());
    for n in 0..signal.len() {
        for (c, &w) in freqs.iter().enumerate() {
            a.set(n, c, (w * n as f64).cos());
        }
    }
    least_squares(&a, signal).unwrap()
}

#[test]
fn powers_match_a_numerical_fit() {
    let (w1, w2) = (0.7, 1.9);
    for p in 3..=5 {
        let s = harmonic_expansion((w1, w2), p).unwrap();
        let signal: Vec<f64> = (0..1024)
            .map(|n| ((w1 * n as f64).cos() + (w2 * n as f64).cos()).powi(p as i32))
            .collect();
        let fit = fitted_amplitudes(&signal, s.freqs());
        for (a, f) in s.amplitudes().iter().zip(&fit) {
            assert!((a.re - f).abs() < 1e-8, "p={p}: {} vs {f}", a.re);
        }
    }
}

#[test]
fn folded_frequencies_lie_in_zero_pi() {
    let s = harmonic_expansion((2.9, 3.1), 6).unwrap();
    assert!(s.freqs().iter().all(|&w| (0.0..=PI).contains(&w)));
    let total: f64 = s.amplitudes().iter().map(|a| a.re).sum();
    assert_eq!(total, 64.0);
}

// nonlinearity

#[test]
fn squared_cosine_has_dc_and_double_frequency_only() {
    let (n, k) = (64, 5);
    let x: Vec<f64> = (0..n).map(|t| (TAU * (k * t) as f64 / n as f64).cos()).collect();
    let s = nonlinearity_spectrum(&SampledSignal::from_real(&x), Activation::Square).unwrap();
    for (m, a) in s.amplitudes().iter().enumerate() {
        // 2k and its mirror N - 2k carry the double-angle term
        if m == 0 || m == 2 * k || m == n - 2 * k {
            assert!(a.norm() > 1.0);
        } else {
            assert!(a.norm() < 1e-9, "bin {m}: {a}");
        }
    }
}

#[test]
fn silu_generates_harmonics() {
    let n = 64;
    let x: Vec<f64> = (0..n).map(|t| (TAU * 3.0 * t as f64 / n as f64).cos()).collect();
    let s = nonlinearity_spectrum(&SampledSignal::from_real(&x), Activation::Silu).unwrap();
    let active = s.amplitudes()[..=n / 2].iter().filter(|a| a.norm() > 1e-3).count();
    assert!(active >= 3, "{active}");
}

#[test]
fn zero_signal_and_complex_input() {
    let s = nonlinearity_spectrum(&SampledSignal::from_real(&[0.0; 16]), Activation::Tanh).unwrap();
    assert!(s.amplitudes().iter().all(|a| a.norm() == 0.0));
    let z = SampledSignal::new(vec![Complex64::new(1.0, 0.5)]).unwrap();
    assert_eq!(
        nonlinearity_spectrum(&z, Activation::Square).unwrap_err(),
        SpectrumError::ComplexInput(0)
    );
}

// periodicity

#[test]
fn pure_cosine_is_periodic() {
    let trace = mixed_trace(TAU / 16.0, 1.0, 0.0, 80);
    assert!(periodicity_violation(&trace, 16.0).unwrap() < 1e-9);
    let pure: Vec<f64> = (0..80).map(|n| (TAU * n as f64 / 16.0).cos()).collect();
    assert_eq!(trace, pure);
}

#[test]
fn contaminated_trace_breaks_the_period() {
    let trace = mixed_trace(TAU / 16.0, 1.0, 0.3, 80);
    assert!(periodicity_violation(&trace, 16.0).unwrap() > 0.01);
}

#[test]
fn short_trace_rejected() {
    assert_eq!(
        periodicity_violation(&[0.0; 10], 6.0).unwrap_err(),
        SpectrumError::TraceTooShort { len: 10, needed: 12 }
    );
    assert!(periodicity_violation(&[0.0; 10], 0.5).is_err());
}

// undertrained dimensions

#[test]
fn llama_undertrained_ranges() {
    let u = undertrained_dims(128, 10000.0, 4096).unwrap();
    assert_eq!(u.per_half, (46..64).collect::<Vec<_>>());
    assert_eq!(u.one_indexed_ranges(), vec![(47, 64), (111, 128)]);
    assert_eq!(u.to_string(), "[47,64]∪[111,128]");
}

#[test]
fn long_or_fast_schedules_have_none() {
    assert!(undertrained_dims(128, 10000.0, 1 << 40).unwrap().per_half.is_empty());
    let u = undertrained_dims(4, 2.0, 1024).unwrap();
    assert!(u.per_half.is_empty());
    assert_eq!(u.to_string(), "(none)");
}

proptest! {
    #[test]
    fn nudft_is_linear(
        seed in any::<u64>(),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let x = random_signal(32, seed);
        let y = random_signal(32, seed.wrapping_add(1));
        let combo = SampledSignal::new(
            x.values.iter().zip(&y.values).map(|(p, q)| p * a + q * b).collect(),
        ).unwrap();
        let grid = uniform_grid(32);
        let lhs = nudft(&combo, &grid).unwrap();
        let sx = nudft(&x, &grid).unwrap();
        let sy = nudft(&y, &grid).unwrap();
        for i in 0..32 {
            let rhs = sx.amplitudes()[i] * a + sy.amplitudes()[i] * b;
            prop_assert!((lhs.amplitudes()[i] - rhs).norm() < 1e-10);
        }
    }

    #[test]
    fn rope_schedules_are_low_pass(
        half in 2usize..128,
        theta in 1.5f64..1e6,
        n in 2usize..100_000,
    ) {
        let s = build_schedule(2 * half, theta, n, true).unwrap();
        prop_assert!(s.frequencies.iter().all(|&w| w <= 1.0 && w < PI));
    }
}
