//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or data error, 2 invalid configuration or
//! arguments, 3 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::checkpoint::{git_blob_sha1, Checkpoint};
use crate::config::{Method, RunConfig};
use crate::error::{Error, Result};
use crate::metrics::{self, evaluate_samples};
use crate::pipeline::{self, FlowModel};
use crate::points::Points;
use crate::rng::Streams;

pub const CHECKPOINT_FILE: &str = "checkpoint.ttfl";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const HIST1D_FILE: &str = "hist1d.csv";
pub const HIST2D_FILE: &str = "hist2d.csv";

/// Environment variable overriding the `threads` key.
pub const THREADS_ENV: &str = "TTFLOW_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ttflow", version, about = "Tensor-train flows for sampling Boltzmann densities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a flow; writes checkpoint, manifest, training log and metrics.
    Train(TrainArgs),
    /// Draw samples from a trained flow (or the stochastic baseline).
    Sample(SampleArgs),
    /// Energy distance of a samples file against exact target samples.
    Eval(EvalArgs),
    /// Bin samples into 1-d and per-pair 2-d histograms.
    ExportHist(HistArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Not needed for the `stochastic` variant.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// flow, flow+, flow+stochastic or stochastic; defaults to the config's method.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub count: usize,
    /// Defaults to the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Config naming the target.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub draws: usize,
    /// Reference draw size; defaults to the number of samples.
    #[arg(long)]
    pub reference_count: Option<usize>,
    #[arg(long, default_value_t = metrics::DEFAULT_CAP)]
    pub cap: usize,
    /// Defaults to the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON report path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HistArgs {
    #[arg(long)]
    pub samples: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    /// Lower histogram edge for every coordinate; defaults to the data minimum.
    #[arg(long, allow_hyphen_values = true)]
    pub lo: Option<f64>,
    /// Upper histogram edge for every coordinate; defaults to the data maximum.
    #[arg(long, allow_hyphen_values = true)]
    pub hi: Option<f64>,
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => {
            let cfg = RunConfig::from_file(&a.config)?;
            with_threads(&cfg, || cmd_train(&cfg, &a.out))
        }
        Command::Sample(a) => {
            let cfg = RunConfig::from_file(&a.config)?;
            with_threads(&cfg, || cmd_sample(&cfg, &a))
        }
        Command::Eval(a) => {
            let cfg = RunConfig::from_file(&a.config)?;
            with_threads(&cfg, || cmd_eval(&cfg, &a))
        }
        Command::ExportHist(a) => cmd_export_hist(&a),
    }
}

fn thread_count(cfg: &RunConfig) -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(cfg.threads),
    }
}

fn with_threads<T: Send>(cfg: &RunConfig, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(cfg)? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker threads: {e}")))?;
    pool.install(f)
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn csv_bytes<F>(header: &[String], body: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Data(e.to_string()))?;
    body(&mut w).map_err(|e| Error::Data(e.to_string()))?;
    w.into_inner().map_err(|e| Error::Data(e.to_string()))
}

/// CSV with header `x1,...,xd`; values keep 17 significant digits.
pub fn points_to_csv(points: &Points) -> Result<Vec<u8>> {
    let header: Vec<String> = (1..=points.dim()).map(|i| format!("x{i}")).collect();
    csv_bytes(&header, |w| {
        for row in points.rows() {
            w.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
        }
        Ok(())
    })
}

pub fn read_points_csv(path: &Path) -> Result<Points> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let dim = r.headers().map_err(|e| Error::Data(format!("{}: {e}", path.display())))?.len();
    if dim == 0 {
        return Err(Error::Data(format!("{}: empty header", path.display())));
    }
    let mut data = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        for field in rec.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Data(format!("{}: row {}: bad number `{field}`", path.display(), i + 1)))?;
            data.push(v);
        }
    }
    Points::new(dim, data)
}

/// Key/value manifest: resolved config plus the checkpoint hash.
pub fn manifest_text(cfg: &RunConfig, checkpoint: &[u8]) -> String {
    let mut out = String::new();
    for (k, v) in cfg.to_pairs() {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out.push_str(&format!("checkpoint.sha1 = \"{}\"\n", git_blob_sha1(checkpoint)));
    out
}

fn train_log_csv(model: &FlowModel) -> Result<Vec<u8>> {
    let header: Vec<String> = ["iteration", "step", "loss", "ess", "c_t", "max_rank", "sweeps", "outside", "frozen"]
        .map(String::from)
        .to_vec();
    csv_bytes(&header, |w| {
        for r in &model.history {
            w.write_record([
                r.iteration.to_string(),
                r.step.to_string(),
                format!("{:.16e}", r.loss),
                format!("{:.16e}", r.ess),
                format!("{:.16e}", r.c_t),
                r.max_rank.to_string(),
                r.sweeps.to_string(),
                r.outside.to_string(),
                r.frozen.to_string(),
            ])?;
        }
        Ok(())
    })
}

#[derive(Serialize)]
struct TrainMetrics<'a> {
    method: String,
    iterations_run: usize,
    final_loss: Vec<f64>,
    final_ess: Vec<f64>,
    c_t: &'a [f64],
    ranks: Vec<Vec<usize>>,
    validation: &'a [f64],
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    println!("training {} on {} (M={}, N={})", cfg.method, cfg.target.name(), cfg.steps, cfg.samples);
    let model = pipeline::train(cfg)?;
    let bytes = model.checkpoint.to_bytes();
    write_atomic(&out.join(CHECKPOINT_FILE), &bytes)?;
    write_atomic(&out.join(MANIFEST_FILE), manifest_text(cfg, &bytes).as_bytes())?;
    write_atomic(&out.join(TRAIN_LOG_FILE), &train_log_csv(&model)?)?;
    let last: Vec<_> = model.history.iter().filter(|r| r.iteration + 1 == model.iterations_run).collect();
    let metrics = TrainMetrics {
        method: model.method.to_string(),
        iterations_run: model.iterations_run,
        final_loss: last.iter().map(|r| r.loss).collect(),
        final_ess: last.iter().map(|r| r.ess).collect(),
        c_t: &model.checkpoint.c_t,
        ranks: model.checkpoint.fields.iter().map(|f| f.tt().ranks()).collect(),
        validation: &model.validation,
    };
    write_atomic(&out.join(METRICS_FILE), &json_bytes(&metrics)?)?;
    println!("wrote {}", out.display());
    Ok(())
}

/// Reads a checkpoint and, when a manifest sits next to it, checks its hash and training method.
pub fn load_checkpoint(path: &Path) -> Result<(Checkpoint, Option<Method>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let manifest = path.with_file_name(MANIFEST_FILE);
    let mut method = None;
    if manifest.exists() {
        let text = fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Checkpoint(format!("{}: {e}", manifest.display())))?;
        if let Some(toml::Value::String(h)) = table.get("checkpoint").and_then(|c| c.get("sha1")) {
            if *h != git_blob_sha1(&bytes) {
                return Err(Error::Checkpoint(format!(
                    "{} does not match the hash recorded in {}",
                    path.display(),
                    manifest.display()
                )));
            }
        }
        if let Some(toml::Value::String(m)) = table.get("method") {
            method = Some(m.parse()?);
        }
    }
    Ok((Checkpoint::from_bytes(&bytes)?, method))
}

fn cmd_sample(cfg: &RunConfig, a: &SampleArgs) -> Result<()> {
    let variant: Method = match &a.variant {
        Some(v) => v.parse().map_err(|_| Error::InvalidArgument(format!("unknown variant `{v}`")))?,
        None => cfg.method,
    };
    let model = match &a.checkpoint {
        Some(p) => {
            let (ckpt, trained) = load_checkpoint(p)?;
            if let Some(trained) = trained {
                if !variant.compatible_with(trained) {
                    return Err(Error::InvalidArgument(format!(
                        "variant `{variant}` cannot sample a model trained as `{trained}`"
                    )));
                }
            }
            Some(ckpt)
        }
        None => None,
    };
    let seed = a.seed.unwrap_or(cfg.seed);
    let (points, info) = pipeline::sample(model.as_ref(), cfg, variant, a.count, seed)?;
    write_atomic(&a.out, &points_to_csv(&points)?)?;
    if info.frozen > 0 {
        println!("warning: {} trajectories left the safety box", info.frozen);
    }
    println!("wrote {} samples to {}", points.len(), a.out.display());
    Ok(())
}

fn cmd_eval(cfg: &RunConfig, a: &EvalArgs) -> Result<()> {
    let samples = read_points_csv(&a.samples)?;
    let truth = cfg.target.sampler()?;
    if samples.dim() != truth.dim() {
        return Err(Error::Data(format!(
            "{} has {} columns but target {} is {}-dimensional",
            a.samples.display(),
            samples.dim(),
            cfg.target.name(),
            truth.dim()
        )));
    }
    let seed = a.seed.unwrap_or(cfg.seed);
    let mut rng = Streams::new(seed).derive(&[0x45_56_41_4c]).master();
    let reference = a.reference_count.unwrap_or(samples.len());
    let report = evaluate_samples(&samples, truth.as_ref(), a.draws, reference, a.cap, &mut rng)?;
    write_atomic(&a.out, &json_bytes(&report)?)?;
    println!(
        "energy distance {:.3e} +- {:.1e} over {} draws",
        report.energy_distance.mean, report.energy_distance.std, report.energy_distance.draws
    );
    Ok(())
}

fn edges(values: impl Iterator<Item = f64> + Clone, lo: Option<f64>, hi: Option<f64>) -> Result<(f64, f64)> {
    let lo = lo.unwrap_or_else(|| values.clone().fold(f64::INFINITY, f64::min));
    let hi = hi.unwrap_or_else(|| values.fold(f64::NEG_INFINITY, f64::max));
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Data("cannot infer histogram range from empty or non-finite samples".into()));
    }
    if lo < hi {
        Ok((lo, hi))
    } else if lo == hi {
        Ok((lo - 0.5, hi + 0.5))
    } else {
        Err(Error::InvalidArgument(format!("histogram range lo={lo} > hi={hi}")))
    }
}

/// Bin index of `v` in `bins` equal cells over `[lo, hi]`; `None` outside.
fn bin_of(v: f64, lo: f64, hi: f64, bins: usize) -> Option<usize> {
    if !(lo..=hi).contains(&v) {
        return None;
    }
    Some((((v - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1))
}

fn cmd_export_hist(a: &HistArgs) -> Result<()> {
    if a.bins == 0 {
        return Err(Error::InvalidArgument("--bins must be >= 1".into()));
    }
    let pts = read_points_csv(&a.samples)?;
    let d = pts.dim();
    let total = pts.len().max(1) as f64;
    let ranges = (0..d)
        .map(|j| edges(pts.rows().map(move |r| r[j]), a.lo, a.hi))
        .collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;

    let header: Vec<String> = ["dim", "bin", "lo", "hi", "count", "density"].map(String::from).to_vec();
    let h1 = csv_bytes(&header, |w| {
        for (j, &(lo, hi)) in ranges.iter().enumerate() {
            let mut counts = vec![0usize; a.bins];
            for r in pts.rows() {
                if let Some(b) = bin_of(r[j], lo, hi, a.bins) {
                    counts[b] += 1;
                }
            }
            let width = (hi - lo) / a.bins as f64;
            for (b, &c) in counts.iter().enumerate() {
                w.write_record([
                    (j + 1).to_string(),
                    b.to_string(),
                    format!("{:.16e}", lo + b as f64 * width),
                    format!("{:.16e}", lo + (b + 1) as f64 * width),
                    c.to_string(),
                    format!("{:.16e}", c as f64 / (total * width)),
                ])?;
            }
        }
        Ok(())
    })?;
    write_atomic(&a.out.join(HIST1D_FILE), &h1)?;

    let header: Vec<String> = ["pair", "dim_x", "dim_y", "bin_x", "bin_y", "x_lo", "x_hi", "y_lo", "y_hi", "count"]
        .map(String::from)
        .to_vec();
    let h2 = csv_bytes(&header, |w| {
        for p in 0..d / 2 {
            let (jx, jy) = (2 * p, 2 * p + 1);
            let ((xl, xh), (yl, yh)) = (ranges[jx], ranges[jy]);
            let mut counts = vec![0usize; a.bins * a.bins];
            for r in pts.rows() {
                if let (Some(bx), Some(by)) = (bin_of(r[jx], xl, xh, a.bins), bin_of(r[jy], yl, yh, a.bins)) {
                    counts[bx * a.bins + by] += 1;
                }
            }
            let (wx, wy) = ((xh - xl) / a.bins as f64, (yh - yl) / a.bins as f64);
            for bx in 0..a.bins {
                for by in 0..a.bins {
                    w.write_record([
                        (p + 1).to_string(),
                        (jx + 1).to_string(),
                        (jy + 1).to_string(),
                        bx.to_string(),
                        by.to_string(),
                        format!("{:.16e}", xl + bx as f64 * wx),
                        format!("{:.16e}", xl + (bx + 1) as f64 * wx),
                        format!("{:.16e}", yl + by as f64 * wy),
                        format!("{:.16e}", yl + (by + 1) as f64 * wy),
                        counts[bx * a.bins + by].to_string(),
                    ])?;
                }
            }
        }
        Ok(())
    })?;
    write_atomic(&a.out.join(HIST2D_FILE), &h2)?;
    println!("wrote histograms of {} samples to {}", pts.len(), a.out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips_exactly() {
        let p = Points::from_rows(&[[0.1, -1e-300], [std::f64::consts::PI, 1.0 / 3.0]]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write_atomic(&path, &points_to_csv(&p).unwrap()).unwrap();
        assert_eq!(read_points_csv(&path).unwrap(), p);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x1,x2\n"));
    }

    #[test]
    fn bins_cover_closed_range() {
        assert_eq!(bin_of(0.0, 0.0, 1.0, 4), Some(0));
        assert_eq!(bin_of(1.0, 0.0, 1.0, 4), Some(3));
        assert_eq!(bin_of(0.5, 0.0, 1.0, 4), Some(2));
        assert_eq!(bin_of(1.5, 0.0, 1.0, 4), None);
    }
}
