use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use serde_json::json;

use fope::model::load_snapshot;
use fope::numerics::{Matrix, RngSeed};
use fope::report::Series;
use fope::spectrum::Activation;
use fope::toysim::{qk_bias_probe, run_toy, ToyConfig, ToyFope};

use super::{GlobalOpts, Run};

#[derive(Args, Debug)]
pub struct ToysimArgs {
    #[arg(long)]
    pub w1: Option<f64>,
    #[arg(long)]
    pub w2: Option<f64>,
    /// Row-major 2x2 mixing weights `a,b,c,d`.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// identity, square, silu or tanh.
    #[arg(long)]
    pub activation: Option<String>,
    #[arg(long)]
    pub max_distance: Option<usize>,
    /// Samples used to measure each dimension's spectrum.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Standard-deviation gain of the sampled FoPE coefficients.
    #[arg(long, default_value_t = 0.3)]
    pub sigma: f64,
    /// Source frequencies D for sampled coefficients.
    #[arg(long, default_value_t = 8)]
    pub num_freqs: usize,
    /// Fit the FoPE weights to the measured spectrum instead of sampling them.
    #[arg(long)]
    pub fit: bool,
    /// Identity weights and activation with sigma 0: no spectrum damage anywhere.
    #[arg(long, conflicts_with_all = ["weights", "activation"])]
    pub identity: bool,
    /// Probe per-dimension query/key magnitudes of a checkpoint instead.
    #[arg(long)]
    pub probe: Option<PathBuf>,
    #[arg(long, default_value_t = 1024)]
    pub probe_tokens: usize,
}

pub fn run(a: ToysimArgs, g: &GlobalOpts) -> Result<()> {
    if let Some(path) = &a.probe {
        return run_probe(path, a.probe_tokens, g);
    }
    let mut cfg = if a.identity { ToyConfig::identity() } else { ToyConfig::default() };
    let (d1, d2) = cfg.omega_pair;
    cfg.omega_pair = (a.w1.unwrap_or(d1), a.w2.unwrap_or(d2));
    if let Some(w) = &a.weights {
        if w.len() != 4 {
            bail!("--weights needs four values, got {}", w.len());
        }
        cfg.mlp_weights = Matrix::from_rows(&[[w[0], w[1]], [w[2], w[3]]]);
    }
    if let Some(name) = &a.activation {
        let Some(act) = Activation::parse(name) else {
            bail!("unknown activation {name:?}");
        };
        cfg.activation = act;
    }
    if let Some(d) = a.max_distance {
        cfg.max_distance = d;
    }
    if let Some(n) = a.grid {
        cfg.grid_size = n;
    }
    cfg.seed = RngSeed(g.seed_or(0));
    let sigma = if a.identity { 0.0 } else { a.sigma };
    let fope = if a.fit { ToyFope::Fit } else { ToyFope::Sampled(cfg.sample_coefficients(sigma, a.num_freqs)?) };

    let config = json!({ "toy": cfg, "sigma": sigma, "num_freqs": a.num_freqs, "fit": a.fit });
    let mut run = Run::start("toysim", g, config, vec![cfg.seed.0])?;
    let bundle = run_toy(&cfg, &fope)?;
    run.csv("toysim.csv", &bundle.to_csv(run.precision()))?;
    let n: Vec<f64> = (0..bundle.ground_truth.len()).map(|i| i as f64).collect();
    run.plot(
        "toysim.svg",
        "Toy attention score by distance",
        "distance n",
        "score",
        &[
            Series { label: "ground truth", x: &n, y: &bundle.ground_truth },
            Series { label: "RoPE", x: &n, y: &bundle.rope_scores },
            Series { label: "FoPE", x: &n, y: &bundle.fope_scores },
        ],
    )?;
    let (rope, fope_gap) = (bundle.rope_gap(), bundle.fope_gap());
    println!("L2 gap to ground truth: RoPE {rope}, FoPE {fope_gap}");
    let spread = bundle
        .rope_scores
        .iter()
        .zip(&bundle.fope_scores)
        .zip(&bundle.ground_truth)
        .map(|((r, f), t)| (r - t).abs().max((f - t).abs()))
        .fold(0.0, f64::max);
    println!("largest deviation from ground truth across both traces: {spread}");
    run.finish()?;
    Ok(())
}

fn run_probe(path: &PathBuf, tokens: usize, g: &GlobalOpts) -> Result<()> {
    let snapshot = load_snapshot(path)?;
    let seed = g.seed_or(0);
    let config = json!({ "checkpoint": path, "probe_tokens": tokens });
    let mut run = Run::start("toysim probe", g, config, vec![seed])?;
    let probe = qk_bias_probe(&snapshot, tokens, RngSeed(seed))?;
    if probe.untrained_warning {
        eprintln!("warning: checkpoint has taken no training steps; the probe shows initialisation only");
    }
    run.csv("probe.csv", &probe.to_csv(run.precision()))?;
    let dims: Vec<f64> = (0..probe.mean_abs_q[0].len()).map(|d| d as f64).collect();
    let labels: Vec<(String, String)> =
        (0..probe.mean_abs_q.len()).map(|l| (format!("q layer {l}"), format!("k layer {l}"))).collect();
    let mut series = Vec::new();
    for (l, (lq, lk)) in labels.iter().enumerate() {
        series.push(Series { label: lq, x: &dims, y: &probe.mean_abs_q[l] });
        series.push(Series { label: lk, x: &dims, y: &probe.mean_abs_k[l] });
    }
    run.plot("probe.svg", "Mean |activation| before rotation", "dimension", "mean |value|", &series)?;
    for l in 0..probe.mean_abs_q.len() {
        println!("layer {l}: max/min dimension mean {:.3}", probe.spread(l));
    }
    run.finish()?;
    Ok(())
}
