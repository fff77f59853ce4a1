//! Window-pair change measures and event window flagging.
//!
//! For every consecutive pair `(W_t, W_t+1)` the preprocessed vocabulary of
//! `W_t+1` is the common vocabulary of both similarity matrices. Each
//! window's dendrogram covers the common tokens its own model embedded, so
//! tokens new to `W_t+1` have an all-zero row at `t` and register as changed.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{hac_average_linkage, similarity_matrix, Dendrogram, SimilarityMatrix};
use crate::corpus::{Preprocess, StopWords, TimeWindow, Vocabulary, VocabularyFilter};
use crate::embedding::EmbeddingModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Maximum,
    Average,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Maximum => "maximum",
            Aggregation::Average => "average",
        })
    }
}

impl FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max" | "maximum" => Ok(Aggregation::Maximum),
            "avg" | "average" | "mean" => Ok(Aggregation::Average),
            _ => Err(format!("unknown aggregation {s:?} (expected maximum or average)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Overall change at or above this marks an event window.
    pub alpha: f64,
    /// Tokens rarer than this are dropped before change computation.
    pub beta: u64,
    pub aggregation: Aggregation,
    pub preprocess: Preprocess,
    /// Similarity differences at or below this count as unchanged.
    pub change_epsilon: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            alpha: 0.23,
            beta: 20,
            aggregation: Aggregation::Maximum,
            preprocess: Preprocess::NoPunctuationNoStopwords,
            change_epsilon: 1e-9,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must be in [0, 1], got {}", self.alpha)));
        }
        if !(self.change_epsilon > 0.0 && self.change_epsilon < 1.0) {
            return Err(Error::Config(format!(
                "change epsilon must be a small positive number, got {}",
                self.change_epsilon
            )));
        }
        Ok(())
    }

    pub fn filter(&self, stopwords: Arc<StopWords>) -> VocabularyFilter {
        VocabularyFilter::new(self.preprocess, self.beta, stopwords)
    }
}

/// Outcome for window `window_index` compared to its predecessor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPairResult {
    pub window_index: usize,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub cluster_change: f64,
    pub vocabulary_change: f64,
    pub overall_change: f64,
    pub is_event: bool,
    pub event_words: BTreeSet<String>,
}

/// Mean absolute difference over the strict upper triangle.
pub fn cluster_change(matrix_t: &SimilarityMatrix, matrix_t1: &SimilarityMatrix) -> Result<f64> {
    if matrix_t.vocabulary() != matrix_t1.vocabulary() {
        return Err(Error::VocabularyMismatch);
    }
    let n = matrix_t.size();
    if n < 2 {
        return Ok(0.0);
    }
    let sum: f64 = matrix_t
        .upper_triangle()
        .iter()
        .zip(matrix_t1.upper_triangle())
        .map(|(a, b)| (b - a).abs())
        .sum();
    Ok(sum / (n * (n - 1) / 2) as f64)
}

/// Fraction of `vocab_t1` that is new relative to `vocab_t`.
pub fn vocabulary_change(vocab_t: &Vocabulary, vocab_t1: &Vocabulary) -> f64 {
    if vocab_t1.is_empty() {
        log::warn!("empty vocabulary in the newer window; vocabulary change set to 0");
        return 0.0;
    }
    vocab_t1.new_tokens_since(vocab_t) as f64 / vocab_t1.len() as f64
}

pub fn overall_change(cluster_change: f64, vocabulary_change: f64, aggregation: Aggregation) -> f64 {
    match aggregation {
        Aggregation::Maximum => cluster_change.max(vocabulary_change),
        Aggregation::Average => (cluster_change + vocabulary_change) / 2.0,
    }
}

/// Both tokens of every pair whose similarity moved by more than `change_epsilon`.
pub fn extract_event_words(
    matrix_t: &SimilarityMatrix,
    matrix_t1: &SimilarityMatrix,
    change_epsilon: f64,
) -> Result<BTreeSet<String>> {
    if matrix_t.vocabulary() != matrix_t1.vocabulary() {
        return Err(Error::VocabularyMismatch);
    }
    let vocab = matrix_t.vocabulary();
    let n = vocab.len();
    let mut changed = vec![false; n];
    let (a, b) = (matrix_t.upper_triangle(), matrix_t1.upper_triangle());
    let mut idx = 0;
    for i in 0..n {
        for j in i + 1..n {
            if (b[idx] - a[idx]).abs() > change_epsilon {
                changed[i] = true;
                changed[j] = true;
            }
            idx += 1;
        }
    }
    Ok(vocab
        .iter()
        .zip(changed)
        .filter(|&(_, c)| c)
        .map(|(t, _)| t.clone())
        .collect())
}

/// Dendrogram over the tokens of `common` that `model` has vectors for, in
/// `common` order. `None` when the model covers none of them.
pub fn window_dendrogram(model: &EmbeddingModel, common: &[String]) -> Result<Option<Dendrogram>> {
    let covered: Vec<String> = common.iter().filter(|t| model.contains(t)).cloned().collect();
    if covered.is_empty() {
        return Ok(None);
    }
    let vectors: Vec<&[f32]> = covered
        .iter()
        .map(|t| model.vector(t).expect("covered token has a vector"))
        .collect();
    hac_average_linkage(covered, &vectors).map(Some)
}

/// Alpha-independent measurements of one window pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMeasurement {
    pub window_index: usize,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub cluster_change: f64,
    pub vocabulary_change: f64,
    pub event_words: BTreeSet<String>,
    /// Time spent on vocabularies, clustering, matrices and change values.
    pub identification_time: Duration,
    /// Time spent extracting event words.
    pub extraction_time: Duration,
}

impl PairMeasurement {
    pub fn classify(&self, alpha: f64, aggregation: Aggregation) -> WindowPairResult {
        let overall = overall_change(self.cluster_change, self.vocabulary_change, aggregation);
        WindowPairResult {
            window_index: self.window_index,
            start: self.start,
            end: self.end,
            cluster_change: self.cluster_change,
            vocabulary_change: self.vocabulary_change,
            overall_change: overall,
            is_event: overall >= alpha,
            event_words: self.event_words.clone(),
        }
    }
}

pub fn measure_pair(
    prev: &TimeWindow,
    next: &TimeWindow,
    model_prev: &EmbeddingModel,
    model_next: &EmbeddingModel,
    filter: &VocabularyFilter,
    change_epsilon: f64,
) -> Result<PairMeasurement> {
    let started = Instant::now();
    let vocab_t = prev.preprocessed_vocabulary(filter);
    let vocab_t1 = next.preprocessed_vocabulary(filter);
    let common = vocab_t1.by_frequency();

    let dendro_t = window_dendrogram(model_prev, &common)?;
    let dendro_t1 = window_dendrogram(model_next, &common)?;
    let matrix_t = similarity_matrix(dendro_t.as_ref(), &common);
    let matrix_t1 = similarity_matrix(dendro_t1.as_ref(), &common);
    let cluster = cluster_change(&matrix_t, &matrix_t1)?;
    let vocab = vocabulary_change(&vocab_t, &vocab_t1);
    let identification_time = started.elapsed();

    let started = Instant::now();
    let event_words = extract_event_words(&matrix_t, &matrix_t1, change_epsilon)?;
    let extraction_time = started.elapsed();

    Ok(PairMeasurement {
        window_index: next.index,
        start: next.start,
        end: next.end,
        cluster_change: cluster,
        vocabulary_change: vocab,
        event_words,
        identification_time,
        extraction_time,
    })
}

/// Measures every consecutive window pair on the current rayon pool.
/// Results come back in window order whatever the pool size.
pub fn measure_pairs(
    windows: &[TimeWindow],
    models: &[EmbeddingModel],
    filter: &VocabularyFilter,
    change_epsilon: f64,
) -> Result<Vec<PairMeasurement>> {
    if windows.len() < 2 {
        return Err(Error::TooFewWindows(windows.len()));
    }
    if models.len() != windows.len() {
        return Err(Error::ModelCountMismatch {
            windows: windows.len(),
            models: models.len(),
        });
    }
    (1..windows.len())
        .into_par_iter()
        .map(|t| {
            measure_pair(
                &windows[t - 1],
                &windows[t],
                &models[t - 1],
                &models[t],
                filter,
                change_epsilon,
            )
        })
        .collect()
}

pub fn classify(measurements: &[PairMeasurement], alpha: f64, aggregation: Aggregation) -> Vec<WindowPairResult> {
    measurements.iter().map(|m| m.classify(alpha, aggregation)).collect()
}

/// Flags event windows. The first window has no predecessor and therefore
/// no result; result `k` describes window `k + 1`.
pub fn detect(
    windows: &[TimeWindow],
    models: &[EmbeddingModel],
    config: &DetectorConfig,
    stopwords: Arc<StopWords>,
) -> Result<Vec<WindowPairResult>> {
    config.validate()?;
    let filter = config.filter(stopwords);
    let measurements = measure_pairs(windows, models, &filter, config.change_epsilon)?;
    Ok(classify(&measurements, config.alpha, config.aggregation))
}
