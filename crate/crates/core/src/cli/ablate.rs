use std::collections::BTreeMap;
use std::fmt;

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use serde_json::json;

use fope::model::Model;
use fope::numerics::RngSeed;
use fope::posemb::{build_schedule, EmbeddingKind};
use fope::report::{Cell, Csv, Series};
use fope::tasks::{eval_passkey, eval_ppl_by_length, train_on_mixture, RunConfig};

use super::train::{parse_kind, Overrides};
use super::{GlobalOpts, Run};

const ALL_VARIANTS: &str = "RoPE,FoPE,FoPE-FS,FoPE-CF,NoPE,ALiBi,RoPE-A";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Sigma,
    NumFreqs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Ppl,
    Passkey,
}

/// `D` for one run: a count, the retained frequency count `M - M0`, or the head dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Dim {
    Retained,
    HeadDim,
    Count(usize),
}

impl std::str::FromStr for Dim {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "retained" => Ok(Dim::Retained),
            "head-dim" | "head_dim" => Ok(Dim::HeadDim),
            n => n.parse().map(Dim::Count).map_err(|_| format!("{s:?} is not retained, head-dim or a count")),
        }
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dim::Retained => write!(f, "retained"),
            Dim::HeadDim => write!(f, "head-dim"),
            Dim::Count(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[command(flatten)]
    pub base: Overrides,
    /// Embedding variants to train.
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<String>>,
    /// QK-norm settings: any of off,on.
    #[arg(long, value_delimiter = ',')]
    pub qk: Option<Vec<String>>,
    /// FoPE coefficient gains to sweep.
    #[arg(long, value_delimiter = ',')]
    pub sigmas: Option<Vec<f64>>,
    /// FoPE source-frequency counts: integers, `retained` or `head-dim`.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<Dim>>,
    /// Single-axis sweep over FoPE; with it, variants default to FoPE and QK norm to off.
    #[arg(long, requires = "values")]
    pub axis: Option<Axis>,
    #[arg(long, value_delimiter = ',', requires = "axis")]
    pub values: Option<Vec<String>>,
    /// Seeds per configuration, counting up from the global seed.
    #[arg(long, default_value_t = 3)]
    pub seeds: u64,
    #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
    pub lengths: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "ppl")]
    pub metrics: Vec<Metric>,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 16)]
    pub num_sequences: usize,
}

/// One point of the grid before seeds are applied.
#[derive(Clone, Debug)]
struct Point {
    kind: EmbeddingKind,
    qk_norm: bool,
    /// `None` for variants without Fourier series.
    fourier: Option<(f64, Dim)>,
}

impl Point {
    fn key(&self) -> String {
        let qk = if self.qk_norm { "+qk" } else { "" };
        match self.fourier {
            Some((s, d)) => format!("{}{qk} sigma={s} D={d}", self.kind.label()),
            None => format!("{}{qk}", self.kind.label()),
        }
    }
}

fn has_fourier(kind: EmbeddingKind) -> bool {
    matches!(kind, EmbeddingKind::Fope { fs_enabled: true, .. })
}

fn resolve_dim(dim: Dim, cfg: &RunConfig) -> Result<usize> {
    let m = &cfg.model;
    let hd = m.head_dim();
    Ok(match dim {
        Dim::HeadDim => hd,
        Dim::Count(n) => n,
        Dim::Retained => {
            let clip = matches!(m.embedding_kind, EmbeddingKind::Fope { cf_enabled: true, .. });
            build_schedule(hd, m.base_theta, m.max_train_length, clip)?.retained().len()
        }
    })
}

fn grid(a: &AblateArgs, base: &RunConfig) -> Result<Vec<Point>> {
    let single_axis = a.axis.is_some();
    let variants = match &a.variants {
        Some(v) => v.clone(),
        None if single_axis => vec!["FoPE".into()],
        None => ALL_VARIANTS.split(',').map(String::from).collect(),
    };
    let qk = match &a.qk {
        Some(v) => v.clone(),
        None if single_axis => vec!["off".into()],
        None => vec!["off".into(), "on".into()],
    };
    let qk: Vec<bool> = qk
        .iter()
        .map(|s| match s.as_str() {
            "off" | "false" => Ok(false),
            "on" | "true" => Ok(true),
            other => bail!("qk setting {other:?} is not off or on"),
        })
        .collect::<Result<_>>()?;
    let mut sigmas = a.sigmas.clone().unwrap_or_else(|| vec![base.model.fope.sigma]);
    let base_dim = base.model.fope.num_freqs.map_or(Dim::HeadDim, Dim::Count);
    let mut dims = a.dims.clone().unwrap_or_else(|| vec![base_dim]);
    match (a.axis, &a.values) {
        (Some(Axis::Sigma), Some(v)) => {
            sigmas = v.iter().map(|s| s.parse::<f64>().map_err(|e| anyhow::anyhow!("{s:?}: {e}"))).collect::<Result<_>>()?
        }
        (Some(Axis::NumFreqs), Some(v)) => {
            dims = v.iter().map(|s| s.parse::<Dim>().map_err(anyhow::Error::msg)).collect::<Result<_>>()?
        }
        _ => {}
    }
    let mut points = Vec::new();
    for label in &variants {
        let kind = parse_kind(label)?;
        for &qk_norm in &qk {
            if has_fourier(kind) {
                for &s in &sigmas {
                    for &d in &dims {
                        points.push(Point { kind, qk_norm, fourier: Some((s, d)) });
                    }
                }
            } else {
                points.push(Point { kind, qk_norm, fourier: None });
            }
        }
    }
    Ok(points)
}

pub fn run(a: AblateArgs, g: &GlobalOpts) -> Result<()> {
    let mut base = a.base.resolve(g)?;
    if a.base.steps.is_none() {
        base.train.steps = 500;
        base.train.warmup_steps = base.train.warmup_steps.min(500);
    }
    let points = grid(&a, &base)?;
    let first_seed = g.seed_or(0);
    let seeds: Vec<u64> = (first_seed..first_seed + a.seeds).collect();
    let config = json!({
        "base": base,
        "grid": points.iter().map(Point::key).collect::<Vec<_>>(),
        "lengths": a.lengths,
        "metrics": a.metrics.iter().map(|m| format!("{m:?}").to_lowercase()).collect::<Vec<_>>(),
        "trials": a.trials,
        "num_sequences": a.num_sequences,
    });
    let mut run = Run::start("ablate", g, config, seeds.clone())?;
    let mut csv = Csv::new(&["variant", "qk_norm", "sigma", "num_freqs", "seed", "length", "metric", "value"], run.precision());
    // (point, metric, length) -> values over seeds, for the summary plot
    let mut means: BTreeMap<(String, String), BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    println!("{} configurations x {} seeds, {} steps each", points.len(), seeds.len(), base.train.steps);

    for p in &points {
        for &seed in &seeds {
            let mut cfg = base.clone().with_seed(seed);
            cfg.model.embedding_kind = p.kind;
            cfg.model.qk_norm = p.qk_norm;
            let mut d_used = None;
            if let Some((s, d)) = p.fourier {
                cfg.model.fope.sigma = s;
                let n = resolve_dim(d, &cfg)?;
                cfg.model.fope.num_freqs = Some(n);
                d_used = Some(n);
            }
            let start = std::time::Instant::now();
            let (snapshot, _) = train_on_mixture(&cfg, &mut |_| Ok(()))?;
            let model = Model::from_params(snapshot.config, snapshot.params)?;
            let mut summary = Vec::new();
            for &metric in &a.metrics {
                let report = match metric {
                    Metric::Ppl => eval_ppl_by_length(&model, &cfg.corpus, &a.lengths, a.num_sequences, RngSeed(seed))?,
                    Metric::Passkey => eval_passkey(&model, &a.lengths, a.trials, RngSeed(seed))?,
                };
                for r in &report.rows {
                    let sigma = p.fourier.map(|(s, _)| s.to_string()).unwrap_or_else(|| "-".into());
                    let dims = d_used.map(|d| d.to_string()).unwrap_or_else(|| "-".into());
                    csv.row(vec![
                        p.kind.label().into(),
                        (if p.qk_norm { "on" } else { "off" }).into(),
                        sigma.as_str().into(),
                        dims.as_str().into(),
                        seed.into(),
                        r.length.into(),
                        report.metric_name.as_str().into(),
                        Cell::Float(r.metric),
                    ]);
                    means
                        .entry((p.key(), report.metric_name.clone()))
                        .or_default()
                        .entry(r.length)
                        .or_default()
                        .push(r.metric);
                    summary.push(format!("{}@{}={:.4}", report.metric_name, r.length, r.metric));
                }
            }
            println!("{} seed {seed} ({:.0}s): {}", p.key(), start.elapsed().as_secs_f64(), summary.join(" "));
        }
    }
    run.csv("ablate.csv", &csv)?;

    for metric in &a.metrics {
        let name = match metric {
            Metric::Ppl => "perplexity",
            Metric::Passkey => "passkey_accuracy",
        };
        let lines: Vec<(String, Vec<f64>, Vec<f64>)> = means
            .iter()
            .filter(|((_, m), _)| m == name)
            .map(|((key, _), by_len)| {
                let x = by_len.keys().map(|&l| l as f64).collect();
                let y = by_len.values().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
                (key.clone(), x, y)
            })
            .collect();
        let series: Vec<Series<'_>> = lines.iter().map(|(k, x, y)| Series { label: k, x, y }).collect();
        run.plot(&format!("ablate_{name}.svg"), &format!("Mean {name} by length"), "context length", name, &series)?;
    }
    run.finish()?;
    Ok(())
}
