// Acceptance suite. Each criterion prints one PASS/FAIL line and then asserts.
//
// Quick criteria run with `cargo test`. The training criteria (9-11) and the
// known failure (6) are ignored by default; run everything with
//   cargo test --release -p fope --test acceptance -- --include-ignored --nocapture

use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::process::Command;
use std::rc::Rc;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::Rng;

use fope::model::{Batch, Model, ModelConfig};
use fope::numerics::{grad_check, Graph, Matrix, NodeId, RngSeed, GRAD_CHECK_STEP};
use fope::posemb::{
    apply_fope, apply_rope, attention_score_trace, build_schedule, init_fourier_coefficients, EmbeddingKind,
    FrequencySchedule, PositionEncoding,
};
use fope::spectrum::{
    inudft, mixed_trace, nudft, periodicity_violation, truncation_spectrum, undertrained_dims, uniform_grid,
    Dyadic, HarmonicExpansion, SampledSignal, TruncationSpectrumParams,
};
use fope::tasks::{eval_passkey, eval_ppl_by_length, train_on_mixture, RunConfig};

fn verdict(n: u32, ok: bool, detail: impl AsRef<str>) {
    println!("criterion {n}: {} {}", if ok { "PASS" } else { "FAIL" }, detail.as_ref());
    assert!(ok, "criterion {n} failed: {}", detail.as_ref());
}

#[test]
fn criterion_01_nudft_round_trip() {
    let start = Instant::now();
    let mut rng = RngSeed(2024).rng();
    let mut worst: f64 = 0.0;
    for n in [16, 64, 256] {
        for _ in 0..3 {
            let values: Vec<Complex64> =
                (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let spectrum = nudft(&SampledSignal::new(values.clone()).unwrap(), &uniform_grid(n)).unwrap();
            let back = inudft(&spectrum, n).unwrap();
            let err = values.iter().zip(&back.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            worst = worst.max(err);
        }
    }
    let elapsed = start.elapsed();
    verdict(1, worst < 1e-9 && elapsed < Duration::from_secs(1), format!("max error {worst:.2e}, {elapsed:.2?}"));
}

/// Plain DFT of a real signal at bin `k`, written out independently of the library.
fn dft_bin(x: &[f64], k: usize) -> Complex64 {
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| v * Complex64::from_polar(1.0, -TAU * (k * i) as f64 / n))
        .sum()
}

#[test]
fn criterion_02_harmonic_expansion() {
    let half = Dyadic::new(1, 1);
    let mut square: Vec<(i32, i32, Dyadic)> =
        HarmonicExpansion::new(2).unwrap().terms.iter().map(|t| (t.j, t.k, t.coef)).collect();
    square.sort_by_key(|t| (t.0, t.1));
    let table = vec![(0, 0, Dyadic::ONE), (0, 2, half), (1, -1, Dyadic::ONE), (1, 1, Dyadic::ONE), (2, 0, half)];
    let exact = square == table;

    // on-grid inputs: every harmonic lands on a DFT bin
    let (n, a, b) = (256usize, 11usize, 29usize);
    let (w1, w2) = (TAU * a as f64 / n as f64, TAU * b as f64 / n as f64);
    let mut worst: f64 = 0.0;
    for p in 3..=5 {
        let spectrum = HarmonicExpansion::new(p).unwrap().spectrum(w1, w2);
        let x: Vec<f64> = (0..n).map(|i| ((w1 * i as f64).cos() + (w2 * i as f64).cos()).powi(p as i32)).collect();
        let mut predicted = vec![0.0; n / 2 + 1];
        for (w, amp) in spectrum.freqs().iter().zip(spectrum.amplitudes()) {
            predicted[(w * n as f64 / TAU).round() as usize] += amp.re;
        }
        for (k, &c) in predicted.iter().enumerate() {
            // a cosine of amplitude c splits evenly between bins k and n - k
            let scale = if k == 0 || k == n / 2 { n as f64 } else { n as f64 / 2.0 };
            let measured = dft_bin(&x, k) / scale;
            worst = worst.max((measured.re - c).abs()).max(measured.im.abs());
        }
    }
    verdict(2, exact && worst < 1e-8, format!("p=2 table exact: {exact}; p=3..5 max deviation {worst:.2e}"));
}

#[test]
fn criterion_03_periodic_extension() {
    let period = 16usize;
    let omega = TAU / period as f64;
    let schedule = FrequencySchedule {
        head_dim: 2,
        base_theta: 10000.0,
        train_length: period,
        frequencies: vec![omega],
        zeroed_mask: vec![false],
    };
    let trace = attention_score_trace(&[0.8, -0.3], &[0.4, 1.1], &PositionEncoding::Rotary(schedule), 0, 5 * period)
        .unwrap();
    let clean = periodicity_violation(&trace, period as f64).unwrap();
    let damaged = mixed_trace(omega, omega * 2f64.sqrt(), 0.3, 5 * period + 1);
    let broken = periodicity_violation(&damaged, period as f64).unwrap();
    verdict(3, clean < 1e-9 && broken > 0.01, format!("single frequency {clean:.2e}, damaged {broken:.4}"));
}

#[test]
fn criterion_04_rotary_equivalence() {
    let mut rng = RngSeed(4).rng();
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let q = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let k = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let (m, n) = (rng.random_range(0..4096usize), rng.random_range(0..4096usize));
        let w = rng.random_range(0.0..PI);
        let schedule = FrequencySchedule {
            head_dim: 2,
            base_theta: 10000.0,
            train_length: 4096,
            frequencies: vec![w],
            zeroed_mask: vec![false],
        };
        let qr = apply_rope(&Matrix::from_rows(&[q]), &[m], &schedule).unwrap();
        let kr = apply_rope(&Matrix::from_rows(&[k]), &[n], &schedule).unwrap();
        let matrix_form = qr.get(0, 0) * kr.get(0, 0) + qr.get(0, 1) * kr.get(0, 1);
        // each vector as a complex number times its own phase
        let qc = Complex64::new(q[0], q[1]) * Complex64::from_polar(1.0, m as f64 * w);
        let kc = Complex64::new(k[0], k[1]) * Complex64::from_polar(1.0, n as f64 * w);
        let complex_form = (qc * kc.conj()).re;
        worst = worst.max((matrix_form - complex_form).abs());
    }
    verdict(4, worst < 1e-12, format!("max error {worst:.2e} over 10^4 triples"));
}

#[test]
fn criterion_05_fope_reductions() {
    let head_dim = 16;
    let clipped = build_schedule(head_dim, 10000.0, 64, true).unwrap();
    let mut rng = RngSeed(5).rng();
    let x = Matrix::randn(12, head_dim, 1.0, &mut rng);
    let positions: Vec<usize> = (0..12).map(|i| i * i * 97).collect();

    let noisy = init_fourier_coefficients(&clipped, 2, head_dim, 0.3, RngSeed(9)).unwrap();
    let rope = apply_rope(&x, &positions, &clipped.unclipped()).unwrap();
    let bitwise = (0..2).all(|h| apply_fope(&x, &positions, &clipped, &noisy, h, false, false).unwrap() == rope);

    // the same holds through a whole model
    let cfg = |kind| ModelConfig { embedding_kind: kind, init_seed: RngSeed(3), ..ModelConfig::default() };
    let tokens = vec![(0..40).map(|i| (i * 7) % 64).collect::<Vec<usize>>()];
    let plain = Model::new(cfg(EmbeddingKind::Rope)).unwrap().logits(&tokens, 0).unwrap();
    let off = Model::new(cfg(EmbeddingKind::Fope { fs_enabled: false, cf_enabled: false }))
        .unwrap()
        .logits(&tokens, 0)
        .unwrap();
    let model_bitwise = plain == off;

    let exact = init_fourier_coefficients(&clipped, 1, head_dim, 0.0, RngSeed(9)).unwrap();
    let sigma0 = apply_fope(&x, &positions, &clipped, &exact, 0, true, true)
        .unwrap()
        .max_abs_diff(&apply_rope(&x, &positions, &clipped).unwrap());

    // clipped slots pass their inputs through untouched at any position
    let far: Vec<usize> = (0..12).map(|i| i * 1_000_003).collect();
    let out = apply_fope(&x, &far, &clipped, &noisy, 1, true, true).unwrap();
    let half = head_dim / 2;
    let d_out = noisy.retained.min(head_dim / 4);
    let identity = (0..12).all(|r| {
        (d_out..half).all(|m| out.get(r, m) == x.get(r, m) && out.get(r, m + half) == x.get(r, m + half))
    });

    verdict(
        5,
        bitwise && model_bitwise && sigma0 < 1e-12 && identity,
        format!(
            "fs/cf off bitwise RoPE: {bitwise} (model logits: {model_bitwise}); sigma 0 vs clipped RoPE {sigma0:.2e}; zero slots identity: {identity}"
        ),
    );
}

#[test]
#[ignore = "known failure: the frequency formula gives [47,64] per half, not [45,64]; see README"]
fn criterion_06_undertrained_dimensions() {
    let dims = undertrained_dims(128, 10000.0, 4096).unwrap();
    let ranges = dims.one_indexed_ranges();
    verdict(6, ranges == vec![(45, 64), (109, 128)], format!("computed {dims}, expected [45,64]∪[109,128]"));
}

#[test]
fn criterion_07_truncation_spectrum() {
    let start = Instant::now();
    // alpha against integer division for integer periods
    let alpha_exact = (2..=64u64).all(|period| {
        (1..=300usize).step_by(7).all(|n| {
            let p = TruncationSpectrumParams::new(TAU / period as f64, n).unwrap();
            p.alpha == n as u64 / period && (p.remainder - (n as u64 % period) as f64).abs() < 1e-9
        })
    });

    let n = 64;
    let complete = TruncationSpectrumParams::new(TAU * 4.0 / n as f64, n).unwrap();
    let spectrum = truncation_spectrum(&complete, &uniform_grid(n)).unwrap();
    let impulse = spectrum.freqs().iter().zip(spectrum.amplitudes()).all(|(w, a)| {
        if (w - complete.omega_m).abs() < 1e-12 {
            (a.re - n as f64).abs() < 1e-9
        } else {
            a.norm() == 0.0
        }
    });

    let quarter = TruncationSpectrumParams::new(TAU * 0.25 / n as f64, n).unwrap();
    let (peak, zero) = (quarter.eval(quarter.omega_m).abs(), quarter.eval(0.0).abs());
    let ratio = zero / peak;
    let elapsed = start.elapsed();
    verdict(
        7,
        alpha_exact && impulse && (0.5..=2.0).contains(&ratio) && elapsed < Duration::from_secs(1),
        format!("alpha exact: {alpha_exact}; pure impulse: {impulse}; quarter-cycle zero/peak {ratio:.4}; {elapsed:.2?}"),
    )
}

/// One graph per operation kind, each ending in a scalar, with its parameters.
fn op_graphs() -> Vec<(&'static str, Graph, NodeId, Vec<NodeId>)> {
    let mut rng = RngSeed(8).rng();
    let mut rand = |r, c| Matrix::randn(r, c, 1.0, &mut rng);
    let mut out = Vec::new();
    macro_rules! case {
        ($name:expr, |$g:ident, $p:ident| $body:expr, $($shape:expr),+) => {{
            let mut $g = Graph::new();
            let $p: Vec<NodeId> = [$($shape),+].iter().map(|&(r, c)| $g.param(rand(r, c))).collect();
            let y: NodeId = $body;
            // a fixed random readout keeps every output entry in play
            let (r, c) = $g.shape(y);
            let w = $g.input(Matrix::randn(r, c, 1.0, &mut RngSeed(99).rng()));
            let prod = $g.mul(y, w).unwrap();
            let root = $g.sum(prod).unwrap();
            out.push(($name, $g, root, $p));
        }};
    }
    case!("matmul", |g, p| g.matmul(p[0], p[1]).unwrap(), (3, 4), (4, 2));
    case!("matmul_nt", |g, p| g.matmul_nt(p[0], p[1]).unwrap(), (3, 4), (5, 4));
    case!("add", |g, p| g.add(p[0], p[1]).unwrap(), (3, 4), (3, 4));
    case!("mul", |g, p| g.mul(p[0], p[1]).unwrap(), (3, 4), (3, 4));
    case!("add_row", |g, p| g.add_row(p[0], p[1]).unwrap(), (3, 4), (1, 4));
    case!(
        "add_const",
        |g, p| g.add_const(p[0], Rc::new(Matrix::filled(3, 4, 0.5))).unwrap(),
        (3, 4)
    );
    case!("transpose", |g, p| g.transpose(p[0]).unwrap(), (3, 4));
    case!("softmax_rows", |g, p| g.softmax_rows(p[0]).unwrap(), (3, 5));
    case!("layer_norm", |g, p| g.layer_norm(p[0], Some(p[1]), Some(p[2]), 1e-5).unwrap(), (3, 6), (1, 6), (1, 6));
    case!("silu", |g, p| g.silu(p[0]).unwrap(), (3, 4));
    case!("scale", |g, p| g.scale(p[0], -1.7).unwrap(), (3, 4));
    case!("concat_cols", |g, p| g.concat_cols(&[p[0], p[1]]).unwrap(), (3, 2), (3, 3));
    case!("concat_rows", |g, p| g.concat_rows(&[p[0], p[1]]).unwrap(), (2, 3), (4, 3));
    case!("block", |g, p| g.block(p[0], 1, 2, 2, 3).unwrap(), (4, 6));
    case!("gather_rows", |g, p| g.gather_rows(p[0], &[2, 0, 2, 4]).unwrap(), (5, 3));
    case!(
        "rotary",
        |g, p| {
            let angles: Vec<f64> = (0..6).map(|i| 0.37 * i as f64).collect();
            let cos = Rc::new(Matrix::new(3, 2, angles.iter().map(|a| a.cos()).collect()).unwrap());
            let sin = Rc::new(Matrix::new(3, 2, angles.iter().map(|a| a.sin()).collect()).unwrap());
            g.rotary(p[0], cos, sin).unwrap()
        },
        (3, 4)
    );
    case!("cross_entropy", |g, p| g.cross_entropy(p[0], &[1, 4, fope::numerics::IGNORE_TARGET, 0]).unwrap(), (4, 5));
    case!(
        "sum",
        |g, p| {
            let s = g.sum(p[0]).unwrap();
            g.mul(s, s).unwrap()
        },
        (3, 4)
    );
    out
}

#[test]
fn criterion_08_autodiff() {
    let mut worst_op = (String::new(), 0.0f64);
    let mut kinds = 0;
    for (name, mut g, root, params) in op_graphs() {
        kinds += 1;
        for p in params {
            let err = grad_check(&mut g, root, p, GRAD_CHECK_STEP).unwrap();
            if err > worst_op.1 {
                worst_op = (name.to_string(), err);
            }
        }
    }

    let mut worst_model = (String::new(), 0.0f64);
    for kind in [EmbeddingKind::Rope, EmbeddingKind::FOPE] {
        let model = Model::new(ModelConfig { embedding_kind: kind, ..ModelConfig::default() }).unwrap();
        let batch = Batch::next_token(&[vec![5, 17, 42]]);
        let mut g = Graph::new();
        let p = model.bind(&mut g, true);
        let logits = model.forward_graph(&mut g, &p, &batch.inputs, 0, None).unwrap();
        let loss = g.cross_entropy(logits, &batch.flat_targets()).unwrap();
        for (i, &id) in p.iter().enumerate() {
            let err = grad_check(&mut g, loss, id, GRAD_CHECK_STEP).unwrap();
            if err > worst_model.1 {
                worst_model = (format!("{} {}", kind.label(), model.specs()[i].name), err);
            }
        }
    }
    verdict(
        8,
        worst_op.1 < 1e-4 && worst_model.1 < 1e-4,
        format!(
            "{kinds} op kinds, worst {} {:.2e}; 2-layer model, worst {} {:.2e}",
            worst_op.0, worst_op.1, worst_model.0, worst_model.1
        ),
    );
}

// Training criteria.

/// Steps per model in the length-generalisation run.
const LENGTH_GEN_STEPS: usize = 5000;

/// CPU time consumed by this process (user + system), from `/proc/self/stat`;
/// `None` off Linux.
fn process_cpu_time() -> Option<Duration> {
    let stat = std::fs::read_to_string("/proc/self/stat").ok()?;
    // fields after the parenthesised command name; utime and stime are 14 and 15
    let rest = &stat[stat.rfind(')')? + 2..];
    let fields: Vec<&str> = rest.split_whitespace().collect();
    let ticks: u64 = fields.get(11)?.parse::<u64>().ok()? + fields.get(12)?.parse::<u64>().ok()?;
    // USER_HZ is 100 on mainstream Linux builds
    Some(Duration::from_millis(ticks * 10))
}

struct LengthGenResult {
    acc: [f64; 3],
    ppl_increase: f64,
}

fn length_gen_run(kind: EmbeddingKind, seed: u64) -> LengthGenResult {
    let mut cfg = RunConfig::default().with_seed(seed);
    cfg.model.embedding_kind = kind;
    let m = &cfg.model;
    let retained = build_schedule(m.head_dim(), m.base_theta, m.max_train_length, true).unwrap().retained().len();
    cfg.model.fope.num_freqs = Some(retained);
    cfg.train.steps = LENGTH_GEN_STEPS;
    cfg.train.batch_size = 16;
    let (snapshot, _) = train_on_mixture(&cfg, &mut |_| Ok(())).unwrap();
    let model = Model::from_params(snapshot.config, snapshot.params).unwrap();
    let acc = eval_passkey(&model, &[64, 128, 256], 100, RngSeed(99)).unwrap();
    let ppl = eval_ppl_by_length(&model, &cfg.corpus, &[64, 256], 16, RngSeed(5)).unwrap();
    let a = |l| acc.metric_at(l).unwrap();
    LengthGenResult {
        acc: [a(64), a(128), a(256)],
        ppl_increase: ppl.metric_at(256).unwrap() - ppl.metric_at(64).unwrap(),
    }
}

#[test]
#[ignore = "trains nine models; run with --include-ignored in release mode"]
fn criterion_09_length_generalization() {
    let start = Instant::now();
    let cpu_start = process_cpu_time();
    let kinds = [EmbeddingKind::Rope, EmbeddingKind::FOPE, EmbeddingKind::Nope];
    let results: Vec<Vec<LengthGenResult>> =
        kinds.iter().map(|&k| (0..3).map(|s| length_gen_run(k, s)).collect()).collect();
    // CPU time when available, so a busy machine does not count against the budget
    let elapsed = match (cpu_start, process_cpu_time()) {
        (Some(a), Some(b)) => b - a,
        _ => start.elapsed(),
    };
    for (k, rs) in kinds.iter().zip(&results) {
        for (s, r) in rs.iter().enumerate() {
            println!(
                "  {} seed {s}: passkey {:.2}/{:.2}/{:.2} at 64/128/256, perplexity increase 64->256 {:+.4}",
                k.label(),
                r.acc[0],
                r.acc[1],
                r.acc[2],
                r.ppl_increase
            );
        }
    }
    let mean256 = |i: usize| results[i].iter().map(|r| r.acc[2]).sum::<f64>() / 3.0;
    let (rope, fope) = (mean256(0), mean256(1));
    let a = results.iter().flatten().all(|r| r.acc[0] >= 0.9);
    let b = rope <= 0.2;
    let c = fope >= rope + 0.2;
    let d = results[1].iter().zip(&results[0]).all(|(f, r)| f.ppl_increase < r.ppl_increase);
    let budget = elapsed < Duration::from_secs(45 * 60);
    verdict(
        9,
        a && b && c && d && budget,
        format!(
            "(a) all >= 0.9 at 64: {a}; (b) RoPE@256 {rope:.2} <= 0.2: {b}; (c) FoPE@256 {fope:.2} >= RoPE + 0.2: {c}; (d) FoPE ppl increase below RoPE every seed: {d}; {:.1} CPU min",
            elapsed.as_secs_f64() / 60.0
        ),
    );
}

/// Runs `fope ablate` and returns the CSV rows as string fields.
fn ablate(out: &Path, args: &[&str]) -> Vec<Vec<String>> {
    let status = Command::new(env!("CARGO_BIN_EXE_fope"))
        .args(["--out", out.to_str().unwrap(), "--no-svg", "--seed", "0", "ablate"])
        .args(args)
        .status()
        .unwrap();
    assert!(status.success(), "ablate exited with {status}");
    let mut reader = csv::Reader::from_path(out.join("ablate.csv")).unwrap();
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        ["variant", "qk_norm", "sigma", "num_freqs", "seed", "length", "metric", "value"]
    );
    reader.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect()
}

/// Length-256 perplexity per seed for rows matching `pick`.
fn ppl256(rows: &[Vec<String>], pick: impl Fn(&[String]) -> bool) -> Vec<f64> {
    let mut v: Vec<(u64, f64)> = rows
        .iter()
        .filter(|r| r[5] == "256" && r[6] == "perplexity" && pick(r))
        .map(|r| (r[4].parse().unwrap(), r[7].parse().unwrap()))
        .collect();
    v.sort_by_key(|x| x.0);
    v.into_iter().map(|x| x.1).collect()
}

fn wins(better: &[f64], baseline: &[f64]) -> usize {
    better.iter().zip(baseline).filter(|(a, b)| a < b).count()
}

#[test]
#[ignore = "trains thirty models; run with --include-ignored in release mode"]
fn criterion_10_ablation() {
    let dir = tempfile::tempdir().unwrap();
    let rows = ablate(
        dir.path(),
        &["--variants", "RoPE,FoPE-FS,FoPE-CF,FoPE", "--sigmas", "0,0.3", "--dims", "retained,head-dim", "--qk", "off"],
    );
    let manifest = dir.path().join("manifest.json").exists();
    // 1 RoPE + 4 FS + 1 CF + 4 FoPE configurations, 3 seeds, 3 lengths
    let complete = rows.len() == 10 * 3 * 3;
    let rope = ppl256(&rows, |r| r[0] == "RoPE");
    // each Fourier variant at the default gain with D = M - M0, the smaller D
    let retained = |variant: &str| {
        rows.iter()
            .filter(|r| r[0] == variant && r[2] == "0.3")
            .map(|r| r[3].parse::<usize>().unwrap())
            .min()
            .unwrap_or(0)
            .to_string()
    };
    let (fs_d, both_d) = (retained("FoPE-FS"), retained("FoPE"));
    let fs = ppl256(&rows, |r| r[0] == "FoPE-FS" && r[2] == "0.3" && r[3] == fs_d);
    let cf = ppl256(&rows, |r| r[0] == "FoPE-CF");
    let both = ppl256(&rows, |r| r[0] == "FoPE" && r[2] == "0.3" && r[3] == both_d);
    let (fs_wins, cf_wins, both_wins) = (wins(&fs, &rope), wins(&cf, &rope), wins(&both, &rope));
    println!("  ppl@256 RoPE {rope:.4?}");
    println!("  ppl@256 FS (sigma 0.3, D {fs_d}) {fs:.4?}");
    println!("  ppl@256 CF {cf:.4?}");
    println!("  ppl@256 FS+CF (sigma 0.3, D {both_d}) {both:.4?} (recorded)");
    verdict(
        10,
        manifest && complete && fs_wins >= 2 && cf_wins >= 2,
        format!(
            "{} rows; FS beats RoPE on {fs_wins}/3 seeds, CF on {cf_wins}/3, both on {both_wins}/3 (recorded)",
            rows.len()
        ),
    );
}

#[test]
#[ignore = "trains twelve models; run with --include-ignored in release mode"]
fn criterion_11_qk_norm() {
    let dir = tempfile::tempdir().unwrap();
    let rows = ablate(dir.path(), &["--variants", "RoPE,RoPE-A", "--qk", "off,on"]);
    let get = |v: &str, qk: &str| ppl256(&rows, |r| r[0] == v && r[1] == qk);
    let rope_wins = wins(&get("RoPE", "on"), &get("RoPE", "off"));
    let ropea_wins = wins(&get("RoPE-A", "on"), &get("RoPE-A", "off"));
    println!("  ppl@256 RoPE off {:.4?} on {:.4?}", get("RoPE", "off"), get("RoPE", "on"));
    println!("  ppl@256 RoPE-A off {:.4?} on {:.4?}", get("RoPE-A", "off"), get("RoPE-A", "on"));
    verdict(
        11,
        rope_wins >= 2,
        format!("QK norm helps RoPE on {rope_wins}/3 seeds; RoPE-A on {ropea_wins}/3 (recorded)"),
    );
}
