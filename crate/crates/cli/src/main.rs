//! `eventwin` command-line front end.
//!
//! Exit status: 0 on success, 1 for usage/configuration problems, 2 when the
//! input data (stream, report, ground truth) cannot be processed.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use chrono::{DateTime, TimeDelta, Utc};
use clap::{Args, Parser, Subcommand};
use eventwin_core::corpus::{format_timestamp, parse_timestamp, Preprocess};
use eventwin_core::detection::Aggregation;
use eventwin_core::pipeline::{self, DetectionReport, RunConfig};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "eventwin", version, about = "Detect event windows in a timestamped text stream")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Chunk, train per-window embeddings and flag event windows
    Detect {
        #[command(flatten)]
        run: RunArgs,
        /// Write the JSON report here instead of stdout
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Score a detection report against ground truth
    Eval {
        /// Report written by `eventwin detect`
        #[arg(long, value_name = "FILE")]
        report: PathBuf,
        /// Ground-truth events (JSON)
        #[arg(long, value_name = "FILE")]
        gt: PathBuf,
        /// Write the metrics JSON here
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Evaluate a grid of alpha/beta values, best F1 first (CSV)
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated alpha values
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
        /// Comma-separated beta values
        #[arg(long, value_delimiter = ',', required = true)]
        betas: Vec<u64>,
        /// Write the CSV here instead of stdout
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Print window boundaries and sizes without training anything
    Chunk {
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args, Default)]
struct RunArgs {
    /// TOML file with any of the options below; flags win
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// JSON-lines stream of {"id", "timestamp", "text"} records
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Stream start (defaults to the first document's timestamp)
    #[arg(long)]
    start: Option<String>,
    /// Window length, e.g. `2m`, `30min`, `90s`
    #[arg(long = "window-len")]
    window_len: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Minimum token frequency inside a window
    #[arg(long)]
    beta: Option<u64>,
    /// `max` or `avg`
    #[arg(long)]
    aggregation: Option<Aggregation>,
    /// `all-tokens`, `no-punctuation` or `no-punctuation-no-stopwords`
    #[arg(long)]
    preprocess: Option<Preprocess>,
    /// Embedding dimension
    #[arg(long)]
    dim: Option<usize>,
    /// Skip-gram context size on each side
    #[arg(long)]
    context: Option<usize>,
    #[arg(long = "min-count")]
    min_count: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long = "learning-rate")]
    learning_rate: Option<f64>,
    /// Negative samples per context word
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Ground truth (required by `sweep`)
    #[arg(long, value_name = "FILE")]
    gt: Option<PathBuf>,
    /// Stop-word list, one per line (defaults to the built-in English list)
    #[arg(long, value_name = "FILE")]
    stopwords: Option<PathBuf>,
    /// Directory to save the per-window vectors in
    #[arg(long = "save-models", value_name = "DIR")]
    save_models: Option<PathBuf>,
}

/// Keys accepted in a `--config` file.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    input: Option<PathBuf>,
    start: Option<String>,
    window_len: Option<String>,
    alpha: Option<f64>,
    beta: Option<u64>,
    aggregation: Option<String>,
    preprocess: Option<String>,
    dim: Option<usize>,
    context: Option<usize>,
    min_count: Option<u64>,
    epochs: Option<usize>,
    learning_rate: Option<f64>,
    negatives: Option<usize>,
    workers: Option<usize>,
    seed: Option<u64>,
    gt: Option<PathBuf>,
    stopwords: Option<PathBuf>,
    save_models: Option<PathBuf>,
}

enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

type Outcome = Result<(), Failure>;

trait Classify<T> {
    fn usage(self) -> Result<T, Failure>;
    fn data(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
    fn data(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Data(e.into()))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Detect { run, out } => detect(run, out),
        Command::Eval { report, gt, out } => eval(&report, &gt, out),
        Command::Sweep {
            run,
            alphas,
            betas,
            out,
        } => sweep(run, &alphas, &betas, out),
        Command::Chunk { run } => chunk(run),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("eventwin: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("eventwin: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn parse_window_length(text: &str) -> anyhow::Result<TimeDelta> {
    let d: Duration = humantime::parse_duration(text).with_context(|| format!("invalid window length {text:?}"))?;
    let delta = TimeDelta::from_std(d).context("window length out of range")?;
    if delta <= TimeDelta::zero() {
        bail!("window length must be positive");
    }
    Ok(delta)
}

fn parse_start(text: &str) -> anyhow::Result<DateTime<Utc>> {
    parse_timestamp(text).with_context(|| format!("invalid --start {text:?}"))
}

/// Merges flags over the config file over built-in defaults.
fn build_config(args: RunArgs) -> anyhow::Result<RunConfig> {
    let file: FileConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))?
        }
        None => FileConfig::default(),
    };
    let input = args
        .input
        .or(file.input)
        .context("no input stream given (use --input or `input` in the config file)")?;
    let window_len = args
        .window_len
        .or(file.window_len)
        .context("no window length given (use --window-len, e.g. 2m)")?;
    let mut cfg = RunConfig::new(input, parse_window_length(&window_len)?);
    cfg.stream_start = args.start.or(file.start).as_deref().map(parse_start).transpose()?;

    let det = &mut cfg.detector;
    det.alpha = args.alpha.or(file.alpha).unwrap_or(det.alpha);
    det.beta = args.beta.or(file.beta).unwrap_or(det.beta);
    if let Some(a) = args.aggregation {
        det.aggregation = a;
    } else if let Some(a) = file.aggregation {
        det.aggregation = a.parse().map_err(anyhow::Error::msg)?;
    }
    if let Some(p) = args.preprocess {
        det.preprocess = p;
    } else if let Some(p) = file.preprocess {
        det.preprocess = p.parse().map_err(anyhow::Error::msg)?;
    }

    let emb = &mut cfg.embedding;
    emb.dimension = args.dim.or(file.dim).unwrap_or(emb.dimension);
    emb.context_size = args.context.or(file.context).unwrap_or(emb.context_size);
    emb.min_count = args.min_count.or(file.min_count).unwrap_or(emb.min_count);
    emb.epochs = args.epochs.or(file.epochs).unwrap_or(emb.epochs);
    emb.learning_rate = args.learning_rate.or(file.learning_rate).unwrap_or(emb.learning_rate);
    emb.negatives = args.negatives.or(file.negatives).unwrap_or(emb.negatives);
    emb.seed = args.seed.or(file.seed).unwrap_or(emb.seed);

    cfg.workers = args.workers.or(file.workers).unwrap_or(cfg.workers);
    cfg.ground_truth = args.gt.or(file.gt);
    cfg.stopwords = args.stopwords.or(file.stopwords);
    cfg.save_models = args.save_models.or(file.save_models);
    cfg.validate()?;
    Ok(cfg)
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn detect(args: RunArgs, out: Option<PathBuf>) -> Outcome {
    let cfg = build_config(args).usage()?;
    let report = pipeline::run_detect(&cfg).data()?;
    match &out {
        Some(path) => {
            report.write(path).data()?;
            for r in report.event_windows() {
                let words: Vec<&str> = r.event_words.iter().map(String::as_str).collect();
                println!(
                    "event window {} [{} .. {}) change {:.4}: {}",
                    r.window_index,
                    format_timestamp(&r.start),
                    format_timestamp(&r.end),
                    r.overall_change,
                    words.join(" ")
                );
            }
            eprintln!(
                "{} windows, {} flagged, {:.2}s; report written to {}",
                report.windows.len(),
                report.event_windows().count(),
                report.timings.total,
                path.display()
            );
        }
        None => {
            let mut w = output(None).data()?;
            serde_json::to_writer_pretty(&mut w, &report).data()?;
            writeln!(w).data()?;
        }
    }
    Ok(())
}

fn eval(report: &Path, gt: &Path, out: Option<PathBuf>) -> Outcome {
    let report = DetectionReport::read(report).data()?;
    let metrics = pipeline::run_eval(&report, gt).data()?;
    if let Some(path) = &out {
        let text = serde_json::to_string_pretty(&metrics).data()?;
        std::fs::write(path, text + "\n")
            .with_context(|| format!("cannot write {}", path.display()))
            .data()?;
    }
    println!("recall         {:.4}", metrics.recall);
    println!("precision      {:.4}", metrics.precision);
    println!("f1             {:.4}", metrics.f1);
    println!("keyword_recall {:.4}", metrics.keyword_recall);
    Ok(())
}

fn sweep(args: RunArgs, alphas: &[f64], betas: &[u64], out: Option<PathBuf>) -> Outcome {
    let cfg = build_config(args).usage()?;
    if cfg.ground_truth.is_none() {
        return Err(Failure::Usage(anyhow::anyhow!("sweep needs --gt")));
    }
    if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Failure::Usage(anyhow::anyhow!("alpha must be in [0, 1], got {a}")));
    }
    let rows = pipeline::run_sweep(&cfg, alphas, betas).data()?;
    let mut w = output(out.as_deref()).data()?;
    pipeline::write_sweep_csv(&rows, &mut w).data()?;
    w.flush().data()
}

fn chunk(args: RunArgs) -> Outcome {
    let cfg = build_config(args).usage()?;
    let stream = pipeline::load_stream(&cfg).data()?;
    let mut w = output(None).data()?;
    writeln!(w, "index\tstart\tend\tdocuments\ttokens").data()?;
    for win in &stream.windows {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            win.index,
            format_timestamp(&win.start),
            format_timestamp(&win.end),
            win.documents.len(),
            win.token_count()
        )
        .data()?;
    }
    Ok(())
}
