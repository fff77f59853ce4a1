//! End-to-end runs: chunk, train, detect, evaluate, sweep.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::{DateTime, TimeDelta, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{chunk_stream, read_documents, Document, StopWords, TimeWindow};
use crate::detection::{classify, measure_pairs, DetectorConfig, PairMeasurement, WindowPairResult};
use crate::embedding::{EmbeddingConfig, EmbeddingModel, EmbeddingTrainer, SkipGram};
use crate::error::{Error, Result};
use crate::evaluation::{compute_metrics, GroundTruth, MetricsReport};

/// Schema tag written into every detection report.
pub const REPORT_SCHEMA: &str = "eventwin.detection/1";

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: PathBuf,
    /// Defaults to the first document's timestamp.
    pub stream_start: Option<DateTime<Utc>>,
    pub window_length: TimeDelta,
    pub embedding: EmbeddingConfig,
    pub detector: DetectorConfig,
    /// `None` uses the built-in English list.
    pub stopwords: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub workers: usize,
    /// Directory to store per-window vectors in, if any.
    pub save_models: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, window_length: TimeDelta) -> Self {
        RunConfig {
            input: input.into(),
            stream_start: None,
            window_length,
            embedding: EmbeddingConfig::default(),
            detector: DetectorConfig::default(),
            stopwords: None,
            ground_truth: None,
            workers: 1,
            save_models: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_length <= TimeDelta::zero() {
            return Err(Error::NonPositiveWindow);
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.embedding.validate()?;
        self.detector.validate()
    }

    pub fn load_stopwords(&self) -> Result<StopWords> {
        match &self.stopwords {
            Some(p) => StopWords::from_file(p),
            None => Ok(StopWords::english()),
        }
    }
}

/// Wall-clock seconds per pipeline stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub stream_chunking: f64,
    pub embedding_learning: f64,
    pub event_window_identification: f64,
    pub event_word_extraction: f64,
    pub total: f64,
}

impl Timings {
    pub fn stage_sum(&self) -> f64 {
        self.stream_chunking + self.embedding_learning + self.event_window_identification + self.event_word_extraction
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub input: String,
    pub stream_start: DateTime<Utc>,
    pub window_length_seconds: i64,
    pub workers: usize,
    pub stopwords: Option<String>,
    pub embedding: EmbeddingConfig,
    pub detector: DetectorConfig,
}

impl ReportConfig {
    pub fn window_length(&self) -> TimeDelta {
        TimeDelta::seconds(self.window_length_seconds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub index: usize,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub documents: usize,
    pub tokens: usize,
    /// False for the first window, which has nothing to be compared with.
    pub compared: bool,
}

/// Output of a detection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub schema: String,
    pub config: ReportConfig,
    pub windows: Vec<WindowSummary>,
    pub results: Vec<WindowPairResult>,
    pub timings: Timings,
}

impl DetectionReport {
    pub fn event_windows(&self) -> impl Iterator<Item = &WindowPairResult> {
        self.results.iter().filter(|r| r.is_event)
    }

    /// The report as JSON without the timing block, which is the part that
    /// is reproducible across runs.
    pub fn deterministic_json(&self) -> Result<String> {
        let mut value = serde_json::to_value(self)?;
        if let Some(obj) = value.as_object_mut() {
            obj.remove("timings");
        }
        Ok(serde_json::to_string_pretty(&value)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let report: DetectionReport = serde_json::from_str(&text)?;
        if report.schema != REPORT_SCHEMA {
            return Err(Error::Config(format!(
                "unsupported report schema {:?} (expected {REPORT_SCHEMA})",
                report.schema
            )));
        }
        Ok(report)
    }
}

/// Reads and chunks the input stream.
pub struct ChunkedStream {
    pub stream_start: DateTime<Utc>,
    pub window_length: TimeDelta,
    pub windows: Vec<TimeWindow>,
}

pub fn chunk_documents(
    documents: Vec<Document>,
    stream_start: Option<DateTime<Utc>>,
    window_length: TimeDelta,
) -> Result<ChunkedStream> {
    let start = match stream_start {
        Some(s) => s,
        None => documents
            .first()
            .map(|d| d.timestamp)
            .ok_or_else(|| Error::Config("input stream is empty".into()))?,
    };
    let windows = chunk_stream(documents, window_length, start)?;
    Ok(ChunkedStream {
        stream_start: start,
        window_length,
        windows,
    })
}

pub fn load_stream(config: &RunConfig) -> Result<ChunkedStream> {
    let docs = read_documents(&config.input)?;
    if docs.is_empty() {
        return Err(Error::Config(format!("input stream {} is empty", config.input.display())));
    }
    chunk_documents(docs, config.stream_start, config.window_length)
}

/// Trains one model per window on the current rayon pool.
pub fn train_models(windows: &[TimeWindow], trainer: &dyn EmbeddingTrainer) -> Vec<EmbeddingModel> {
    windows.par_iter().map(|w| trainer.train(w)).collect()
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Splits the wall time of the combined identification/extraction phase
/// between the two stages in proportion to their measured busy time.
fn split_phase(wall: Duration, measurements: &[PairMeasurement]) -> (f64, f64) {
    let ident: f64 = measurements.iter().map(|m| secs(m.identification_time)).sum();
    let extract: f64 = measurements.iter().map(|m| secs(m.extraction_time)).sum();
    let busy = ident + extract;
    if busy == 0.0 {
        return (secs(wall), 0.0);
    }
    (secs(wall) * ident / busy, secs(wall) * extract / busy)
}

fn save_models(dir: &Path, models: &[EmbeddingModel]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for m in models {
        m.save(&dir.join(format!("window-{:05}.vec", m.window_index)))?;
    }
    Ok(())
}

/// Runs chunking, per-window training and event window identification.
pub fn run_detect(config: &RunConfig) -> Result<DetectionReport> {
    config.validate()?;
    let stopwords = Arc::new(config.load_stopwords()?);
    let pool = build_pool(config.workers)?;
    pool.install(|| {
        let started = Instant::now();

        let stream = load_stream(config)?;
        if stream.windows.len() < 2 {
            return Err(Error::TooFewWindows(stream.windows.len()));
        }
        let chunked = started.elapsed();

        let t = Instant::now();
        let models = train_models(&stream.windows, &SkipGram::new(config.embedding.clone()));
        let learning = t.elapsed();

        let t = Instant::now();
        let filter = config.detector.filter(stopwords);
        let measurements = measure_pairs(&stream.windows, &models, &filter, config.detector.change_epsilon)?;
        let (identification, extraction) = split_phase(t.elapsed(), &measurements);
        let results = classify(&measurements, config.detector.alpha, config.detector.aggregation);
        let total = started.elapsed();

        if let Some(dir) = &config.save_models {
            save_models(dir, &models)?;
        }

        Ok(DetectionReport {
            schema: REPORT_SCHEMA.to_string(),
            config: ReportConfig {
                input: config.input.display().to_string(),
                stream_start: stream.stream_start,
                window_length_seconds: config.window_length.num_seconds(),
                workers: config.workers,
                stopwords: config.stopwords.as_ref().map(|p| p.display().to_string()),
                embedding: config.embedding.clone(),
                detector: config.detector.clone(),
            },
            windows: stream
                .windows
                .iter()
                .map(|w| WindowSummary {
                    index: w.index,
                    start: w.start,
                    end: w.end,
                    documents: w.documents.len(),
                    tokens: w.token_count(),
                    compared: w.index > 0,
                })
                .collect(),
            results,
            timings: Timings {
                stream_chunking: secs(chunked),
                embedding_learning: secs(learning),
                event_window_identification: identification,
                event_word_extraction: extraction,
                total: secs(total),
            },
        })
    })
}

/// Scores a detection report against a ground-truth file whose window
/// start times are resolved with the report's own chunking parameters.
pub fn run_eval(report: &DetectionReport, gt_path: &Path) -> Result<MetricsReport> {
    let gt = GroundTruth::load(
        gt_path,
        report.config.stream_start,
        report.config.window_length(),
        Some(report.windows.len()),
    )?;
    compute_metrics(&report.results, &gt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub beta: u64,
    pub metrics: MetricsReport,
    pub flagged: Vec<usize>,
}

/// Evaluates every `(alpha, beta)` combination. Models are trained once
/// (they do not depend on either threshold), change values are computed
/// once per beta and thresholded for every alpha. Rows are sorted by F1,
/// best first.
pub fn run_sweep(config: &RunConfig, alphas: &[f64], betas: &[u64]) -> Result<Vec<SweepRow>> {
    config.validate()?;
    if alphas.is_empty() || betas.is_empty() {
        return Err(Error::Config("sweep grids must not be empty".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::Config(format!("alpha must be in [0, 1], got {a}")));
    }
    let gt_path = config
        .ground_truth
        .as_ref()
        .ok_or_else(|| Error::Config("sweep needs a ground-truth file".into()))?;
    let stopwords = Arc::new(config.load_stopwords()?);
    let pool = build_pool(config.workers)?;
    pool.install(|| {
        let stream = load_stream(config)?;
        if stream.windows.len() < 2 {
            return Err(Error::TooFewWindows(stream.windows.len()));
        }
        let gt = GroundTruth::load(
            gt_path,
            stream.stream_start,
            stream.window_length,
            Some(stream.windows.len()),
        )?;
        let models = train_models(&stream.windows, &SkipGram::new(config.embedding.clone()));

        let mut rows = Vec::with_capacity(alphas.len() * betas.len());
        for &beta in betas {
            let detector = DetectorConfig {
                beta,
                ..config.detector.clone()
            };
            let filter = detector.filter(stopwords.clone());
            let measurements = measure_pairs(&stream.windows, &models, &filter, detector.change_epsilon)?;
            for &alpha in alphas {
                let results = classify(&measurements, alpha, detector.aggregation);
                let metrics = compute_metrics(&results, &gt)?;
                rows.push(SweepRow {
                    alpha,
                    beta,
                    metrics,
                    flagged: results.iter().filter(|r| r.is_event).map(|r| r.window_index).collect(),
                });
            }
        }
        rows.sort_by(|a, b| {
            b.metrics
                .f1
                .total_cmp(&a.metrics.f1)
                .then(a.beta.cmp(&b.beta))
                .then(a.alpha.total_cmp(&b.alpha))
        });
        Ok(rows)
    })
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "alpha,beta,recall,precision,f1,keyword_recall,gt_windows,detected_windows,relevant_windows"
    )?;
    for r in rows {
        let m = &r.metrics;
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{},{},{}",
            r.alpha,
            r.beta,
            m.recall,
            m.precision,
            m.f1,
            m.keyword_recall,
            m.gt_windows,
            m.detected_windows,
            m.relevant_windows
        )?;
    }
    Ok(())
}
