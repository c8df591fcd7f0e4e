use std::f64::consts::{PI, TAU};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use num_complex::Complex64;
use serde_json::json;

use fope::report::{Cell, Csv, Series};
use fope::spectrum::{
    nudft, truncation_spectrum, undertrained_dims, uniform_grid, HarmonicExpansion, SampledSignal, Spectrum,
    TruncationSpectrumParams,
};

use super::{GlobalOpts, Run};

#[derive(Subcommand, Debug)]
pub enum SpectrumCmd {
    /// NUDFT of a signal read from CSV or synthesised from cosines.
    Nudft(NudftArgs),
    /// Closed-form spectrum of a single frequency truncated to N samples.
    Truncation(TruncationArgs),
    /// Exact product-to-sum expansion of (cos w1 n + cos w2 n)^p.
    Harmonics(HarmonicsArgs),
    /// Dimensions whose RoPE frequency completes less than one cycle.
    Undertrained(UndertrainedArgs),
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["input", "synth"])))]
pub struct NudftArgs {
    /// CSV with a `re` (or `value`) column and an optional `im` column.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Cosine components `omega:amplitude,...`, sampled at n = 0..len.
    #[arg(long)]
    pub synth: Option<String>,
    /// Samples to synthesise.
    #[arg(long, default_value_t = 64)]
    pub len: usize,
    /// Evaluation bins on the uniform grid (default: one per sample).
    #[arg(long)]
    pub bins: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TruncationArgs {
    #[arg(long)]
    pub omega: f64,
    #[arg(long)]
    pub n: usize,
    /// Uniform evaluation bins in [0, 2 pi); omega itself is always included.
    #[arg(long, default_value_t = 512)]
    pub bins: usize,
}

#[derive(Args, Debug)]
pub struct HarmonicsArgs {
    #[arg(long, default_value_t = 0.3)]
    pub w1: f64,
    #[arg(long, default_value_t = 0.7)]
    pub w2: f64,
    #[arg(long)]
    pub power: u32,
}

#[derive(Args, Debug)]
pub struct UndertrainedArgs {
    #[arg(long)]
    pub head_dim: usize,
    #[arg(long)]
    pub theta: f64,
    #[arg(long)]
    pub train_length: usize,
}

pub fn run(cmd: SpectrumCmd, g: &GlobalOpts) -> Result<()> {
    match cmd {
        SpectrumCmd::Nudft(a) => cmd_nudft(a, g),
        SpectrumCmd::Truncation(a) => cmd_truncation(a, g),
        SpectrumCmd::Harmonics(a) => cmd_harmonics(a, g),
        SpectrumCmd::Undertrained(a) => cmd_undertrained(a, g),
    }
}

fn plot_magnitude(run: &mut Run, name: &str, title: &str, spectrum: &Spectrum) -> Result<()> {
    let mags: Vec<f64> = spectrum.amplitudes().iter().map(|a| a.norm()).collect();
    run.plot(name, title, "omega", "|X(omega)|", &[Series { label: "magnitude", x: spectrum.freqs(), y: &mags }])
}

fn read_signal(path: &PathBuf) -> Result<SampledSignal> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let col = |names: &[&str]| headers.iter().position(|h| names.contains(&h.trim()));
    let Some(re) = col(&["re", "value"]) else {
        bail!("{} needs a `re` or `value` column", path.display());
    };
    let im = col(&["im"]);
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |c: usize| -> Result<f64> {
            let cell = record.get(c).unwrap_or("").trim();
            cell.parse().with_context(|| format!("row {}: {cell:?} is not a number", i + 1))
        };
        let imag = match im {
            Some(c) => parse(c)?,
            None => 0.0,
        };
        values.push(Complex64::new(parse(re)?, imag));
    }
    Ok(SampledSignal::new(values)?)
}

fn synth_signal(spec: &str, len: usize) -> Result<SampledSignal> {
    let mut parts = Vec::new();
    for item in spec.split(',') {
        let Some((w, a)) = item.split_once(':') else {
            bail!("component {item:?} is not omega:amplitude");
        };
        parts.push((w.trim().parse::<f64>()?, a.trim().parse::<f64>()?));
    }
    let values: Vec<f64> = (0..len)
        .map(|n| parts.iter().map(|&(w, a)| a * (w * n as f64).cos()).sum())
        .collect();
    Ok(SampledSignal::from_real(&values))
}

fn cmd_nudft(a: NudftArgs, g: &GlobalOpts) -> Result<()> {
    let signal = match (&a.input, &a.synth) {
        (Some(path), _) => read_signal(path)?,
        (None, Some(spec)) => synth_signal(spec, a.len)?,
        (None, None) => unreachable!("clap enforces one source"),
    };
    let bins = a.bins.unwrap_or(signal.len());
    let config = json!({ "input": a.input, "synth": a.synth, "len": signal.len(), "bins": bins });
    let mut run = Run::start("spectrum nudft", g, config, vec![])?;
    let spectrum = nudft(&signal, &uniform_grid(bins))?;
    run.csv("nudft.csv", &spectrum.to_csv(run.precision()))?;
    plot_magnitude(&mut run, "nudft.svg", "NUDFT magnitude", &spectrum)?;
    let peak = spectrum.amplitudes().iter().zip(spectrum.freqs()).max_by(|x, y| x.0.norm().total_cmp(&y.0.norm()));
    if let Some((amp, w)) = peak {
        println!("{} samples, {bins} bins, peak |X| = {} at omega = {w}", signal.len(), amp.norm());
    }
    run.finish()?;
    Ok(())
}

fn cmd_truncation(a: TruncationArgs, g: &GlobalOpts) -> Result<()> {
    let params = TruncationSpectrumParams::new(a.omega, a.n)?;
    let mut freqs = uniform_grid(a.bins);
    freqs.push(a.omega);
    freqs.sort_by(f64::total_cmp);
    freqs.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    let spectrum = truncation_spectrum(&params, &freqs)?;
    let config = json!({ "omega": a.omega, "n": a.n, "bins": a.bins });
    let mut run = Run::start("spectrum truncation", g, config, vec![])?;
    run.csv("truncation.csv", &spectrum.to_csv(run.precision()))?;
    plot_magnitude(&mut run, "truncation.svg", "Truncated single-frequency spectrum", &spectrum)?;
    let peak = params.eval(a.omega).abs();
    let zero = params.eval(0.0).abs();
    println!("period N_m = {}", params.period());
    println!("alpha = {} complete cycles, remainder = {} samples", params.alpha, params.remainder);
    println!("peak |X(omega_m)| = {peak}, zero bin |X(0)| = {zero}, ratio = {}", zero / peak);
    run.finish()?;
    Ok(())
}

fn cmd_harmonics(a: HarmonicsArgs, g: &GlobalOpts) -> Result<()> {
    let expansion = HarmonicExpansion::new(a.power)?;
    let config = json!({ "w1": a.w1, "w2": a.w2, "power": a.power });
    let mut run = Run::start("spectrum harmonics", g, config, vec![])?;
    let mut terms = Csv::new(&["j", "k", "label", "coefficient", "coefficient_f64", "omega"], run.precision());
    println!("(cos w1 n + cos w2 n)^{} =", a.power);
    for t in &expansion.terms {
        let label = t.label();
        let coef = t.coef.to_string();
        // folded into [0, pi] like the spectrum
        let raw = (t.j as f64 * a.w1 + t.k as f64 * a.w2).rem_euclid(TAU);
        let omega = if raw > PI { TAU - raw } else { raw };
        println!("  {coef:>8} cos(({label}) n)");
        terms.row(vec![
            Cell::Int(t.j.into()),
            Cell::Int(t.k.into()),
            label.as_str().into(),
            coef.as_str().into(),
            t.coef.to_f64().into(),
            omega.into(),
        ]);
    }
    run.csv("harmonics_terms.csv", &terms)?;
    let spectrum = expansion.spectrum(a.w1, a.w2);
    run.csv("harmonics.csv", &spectrum.to_csv(run.precision()))?;
    plot_magnitude(&mut run, "harmonics.svg", "Harmonic spectrum", &spectrum)?;
    run.finish()?;
    Ok(())
}

fn cmd_undertrained(a: UndertrainedArgs, g: &GlobalOpts) -> Result<()> {
    let dims = undertrained_dims(a.head_dim, a.theta, a.train_length)?;
    let schedule = fope::posemb::build_schedule(a.head_dim, a.theta, a.train_length, true)?;
    let config = json!({ "head_dim": a.head_dim, "theta": a.theta, "train_length": a.train_length });
    let mut run = Run::start("spectrum undertrained", g, config, vec![])?;
    let mut csv = Csv::new(&["m", "omega", "cycles", "undertrained"], run.precision());
    let cycles = schedule.cycle_counts();
    for (m, (&w, &c)) in schedule.frequencies.iter().zip(&cycles).enumerate() {
        let flag = if schedule.zeroed_mask[m] { "true" } else { "false" };
        csv.row(vec![m.into(), w.into(), c.into(), flag.into()]);
    }
    run.csv("undertrained.csv", &csv)?;
    let ms: Vec<f64> = (0..cycles.len()).map(|m| m as f64).collect();
    let log_cycles: Vec<f64> = cycles.iter().map(|c| c.log10()).collect();
    let floor = vec![0.0; cycles.len()];
    run.plot(
        "undertrained.svg",
        "Cycles completed over the training length",
        "m",
        "log10 cycles",
        &[Series { label: "cycles", x: &ms, y: &log_cycles }, Series { label: "one cycle", x: &ms, y: &floor }],
    )?;
    println!("{} of {} frequencies per half are undertrained", dims.per_half.len(), a.head_dim / 2);
    println!("undertrained dimensions (1-indexed): {dims}");
    run.finish()?;
    Ok(())
}
