use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use serde_json::json;

use fope::model::{load_snapshot, loss_csv, save_snapshot, ModelError, Trainer};
use fope::numerics::RngSeed;
use fope::posemb::EmbeddingKind;
use fope::report::Series;
use fope::tasks::{eval_passkey, eval_ppl_by_length, resume_on_mixture, EvalReport, RunConfig};

use super::{GlobalOpts, Run};

/// Flags that override fields of a [`RunConfig`]; flags win over the file.
#[derive(Args, Debug, Clone, Default)]
pub struct Overrides {
    /// JSON run configuration: `{"model": {...}, "train": {...}, "corpus": {...}}`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// RoPE, FoPE, FoPE-FS, FoPE-CF, NoPE, ALiBi or RoPE-A.
    #[arg(long)]
    pub embedding: Option<String>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Training length; also the model's clipping length.
    #[arg(long)]
    pub seq_length: Option<usize>,
    #[arg(long)]
    pub d_model: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// FoPE source frequencies D.
    #[arg(long)]
    pub num_freqs: Option<usize>,
    #[arg(long)]
    pub qk_norm: bool,
}

pub fn parse_kind(label: &str) -> Result<EmbeddingKind> {
    EmbeddingKind::parse(label).with_context(|| format!("unknown embedding {label:?}"))
}

impl Overrides {
    pub fn resolve(&self, g: &GlobalOpts) -> Result<RunConfig> {
        let mut cfg: RunConfig = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        let (m, t) = (&mut cfg.model, &mut cfg.train);
        if let Some(e) = &self.embedding {
            m.embedding_kind = parse_kind(e)?;
        }
        if let Some(v) = self.steps {
            t.steps = v;
            t.warmup_steps = t.warmup_steps.min(v);
        }
        if let Some(v) = self.batch_size {
            t.batch_size = v;
        }
        if let Some(v) = self.lr {
            t.learning_rate = v;
        }
        if let Some(v) = self.warmup {
            t.warmup_steps = v;
        }
        if let Some(v) = self.seq_length {
            t.seq_length = v;
            m.max_train_length = v;
        }
        if let Some(v) = self.d_model {
            m.d_model = v;
        }
        if let Some(v) = self.heads {
            m.num_heads = v;
        }
        if let Some(v) = self.layers {
            m.num_layers = v;
        }
        if let Some(v) = self.theta {
            m.base_theta = v;
        }
        if let Some(v) = self.sigma {
            m.fope.sigma = v;
        }
        if let Some(v) = self.num_freqs {
            m.fope.num_freqs = Some(v);
        }
        if self.qk_norm {
            m.qk_norm = true;
        }
        if let Some(s) = g.seed {
            cfg = cfg.with_seed(s);
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    /// Write `model.ckpt` every this many steps (0: only at the end).
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Continue from a checkpoint; its stored configuration is used.
    #[arg(long, conflicts_with = "config")]
    pub resume: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum EvalCmd {
    /// Passkey retrieval accuracy by context length.
    Passkey(EvalArgs),
    /// Held-out Markov perplexity by context length.
    Ppl(EvalArgs),
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
    pub lengths: Vec<usize>,
    /// Passkey instances per length.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Held-out sequences for perplexity.
    #[arg(long, default_value_t = 16)]
    pub num_sequences: usize,
    /// Run configuration whose `corpus` section defines the held-out language.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run_train(a: TrainArgs, g: &GlobalOpts) -> Result<()> {
    let (trainer, cfg) = match &a.resume {
        Some(path) => {
            let snap = load_snapshot(path).with_context(|| format!("loading {}", path.display()))?;
            let mut cfg = a.overrides.resolve(g)?;
            cfg.model = snap.config.clone();
            cfg.train = snap.train.clone();
            (Trainer::from_snapshot(snap)?, cfg)
        }
        None => {
            let mut cfg = a.overrides.resolve(g)?;
            if let Some(k) = a.checkpoint_every {
                cfg.train.checkpoint_every = k;
            }
            (Trainer::new(fope::model::Model::new(cfg.model.clone())?, cfg.train.clone())?, cfg)
        }
    };
    let seeds = vec![cfg.model.init_seed.0, cfg.train.seed.0, cfg.model.fope.seed.0];
    let mut run = Run::start("train", g, serde_json::to_value(&cfg)?, seeds)?;
    run.text("config.json", &(serde_json::to_string_pretty(&cfg)? + "\n"))?;
    let ckpt = run.path("model.ckpt");
    println!(
        "training {} ({} parameters) for {} steps from step {}",
        cfg.model.embedding_kind.label(),
        trainer.model.parameter_count(),
        trainer.config.steps,
        trainer.step
    );
    let mut save = |t: &Trainer| -> Result<(), ModelError> {
        save_snapshot(&t.snapshot(), &ckpt)?;
        println!("step {}: checkpoint written", t.step);
        Ok(())
    };
    let (snapshot, records) = resume_on_mixture(trainer, &cfg.corpus, &mut save)?;
    save_snapshot(&snapshot, &ckpt)?;
    run.record(&ckpt);
    run.csv("loss.csv", &loss_csv(&records, run.precision()))?;
    let x: Vec<f64> = records.iter().map(|r| r.step as f64).collect();
    let y: Vec<f64> = records.iter().map(|r| r.loss).collect();
    run.plot("loss.svg", "Training loss", "step", "cross-entropy", &[Series { label: "loss", x: &x, y: &y }])?;
    if let Some(last) = records.last() {
        println!("final loss {} at step {}", last.loss, last.step);
    }
    run.finish()?;
    Ok(())
}

pub fn run_eval(cmd: EvalCmd, g: &GlobalOpts) -> Result<()> {
    let (name, a) = match &cmd {
        EvalCmd::Passkey(a) => ("passkey", a),
        EvalCmd::Ppl(a) => ("ppl", a),
    };
    let lengths = a.lengths.clone();
    if lengths.is_empty() {
        bail!("no evaluation lengths");
    }
    let snapshot = load_snapshot(&a.checkpoint).with_context(|| format!("loading {}", a.checkpoint.display()))?;
    let model = fope::model::Model::from_params(snapshot.config.clone(), snapshot.params)?;
    let corpus = match &a.config {
        Some(_) => Overrides { config: a.config.clone(), ..Overrides::default() }.resolve(g)?.corpus,
        None => Default::default(),
    };
    let seed = g.seed_or(0);
    let config = json!({
        "checkpoint": a.checkpoint,
        "lengths": lengths,
        "trials": a.trials,
        "num_sequences": a.num_sequences,
        "corpus": corpus,
        "model": snapshot.config,
    });
    let mut run = Run::start(&format!("eval {name}"), g, config.clone(), vec![seed])?;
    let report: EvalReport = match cmd {
        EvalCmd::Passkey(_) => eval_passkey(&model, &lengths, a.trials, RngSeed(seed))?,
        EvalCmd::Ppl(_) => eval_ppl_by_length(&model, &corpus, &lengths, a.num_sequences, RngSeed(seed))?,
    };
    run.csv(&format!("{name}.csv"), &report.to_csv(run.precision()))?;
    run.text(&format!("{name}.json"), &(report.summary_json(&config) + "\n"))?;
    let x: Vec<f64> = report.rows.iter().map(|r| r.length as f64).collect();
    let y: Vec<f64> = report.rows.iter().map(|r| r.metric).collect();
    run.plot(
        &format!("{name}.svg"),
        &format!("{} by context length", report.metric_name),
        "context length",
        &report.metric_name,
        &[Series { label: &report.method, x: &x, y: &y }],
    )?;
    for r in &report.rows {
        println!("{} length {}: {} = {}", report.method, r.length, report.metric_name, r.metric);
    }
    run.finish()?;
    Ok(())
}
