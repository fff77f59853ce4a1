//! Ground-truth matching and window-level IR metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{DateTime, TimeDelta, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{format_timestamp, parse_timestamp, tokenize};
use crate::detection::WindowPairResult;
use crate::error::{Error, Result};

/// A ground-truth keyword. Usually one token; a multi-token keyword such as
/// "yellow card" matches only when all of its tokens were detected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Keyword {
    pub tokens: Vec<String>,
}

impl Keyword {
    /// Normalizes raw keyword text with the corpus tokenizer.
    pub fn parse(raw: &str) -> Option<Self> {
        let tokens = tokenize(raw);
        (!tokens.is_empty()).then_some(Keyword { tokens })
    }

    pub fn matches(&self, words: &BTreeSet<String>) -> bool {
        self.tokens.iter().all(|t| words.contains(t))
    }
}

/// Interchangeable keywords; matching any one of them matches the group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynonymGroup {
    pub keywords: Vec<Keyword>,
}

impl SynonymGroup {
    pub fn matches(&self, words: &BTreeSet<String>) -> bool {
        self.keywords.iter().any(|k| k.matches(words))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GtEvent {
    pub label: String,
    pub synonym_groups: Vec<SynonymGroup>,
}

impl GtEvent {
    pub fn new<G, K>(label: impl Into<String>, groups: G) -> Result<Self>
    where
        G: IntoIterator<Item = K>,
        K: IntoIterator,
        K::Item: AsRef<str>,
    {
        let label = label.into();
        let mut synonym_groups = Vec::new();
        for group in groups {
            let keywords: Vec<Keyword> = group.into_iter().filter_map(|k| Keyword::parse(k.as_ref())).collect();
            if keywords.is_empty() {
                return Err(Error::GroundTruth(format!("event {label:?} has an empty synonym group")));
            }
            synonym_groups.push(SynonymGroup { keywords });
        }
        if synonym_groups.is_empty() {
            return Err(Error::GroundTruth(format!("event {label:?} has no synonym groups")));
        }
        Ok(GtEvent { label, synonym_groups })
    }

    /// True when any keyword of any synonym group was detected.
    pub fn matches(&self, words: &BTreeSet<String>) -> bool {
        self.synonym_groups.iter().any(|g| g.matches(words))
    }
}

/// Ground-truth events keyed by window index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub windows: BTreeMap<usize, Vec<GtEvent>>,
}

#[derive(Debug, Deserialize)]
struct RawEvent {
    label: String,
    synonym_groups: Vec<Vec<String>>,
}

impl GroundTruth {
    pub fn total_groups(&self) -> usize {
        self.windows
            .values()
            .flat_map(|events| events.iter().map(|e| e.synonym_groups.len()))
            .sum()
    }

    /// Parses the JSON ground-truth format: an object mapping window start
    /// times to event lists, e.g.
    ///
    /// ```json
    /// {"2019-10-20T17:06:00Z": [{"label": "goal", "synonym_groups": [["goal", "goalll"], ["rashford"]]}]}
    /// ```
    ///
    /// Start times must fall exactly on a window boundary of the stream
    /// described by `stream_start`/`window_length` and, when `window_count`
    /// is given, inside the stream.
    pub fn from_json(
        text: &str,
        stream_start: DateTime<Utc>,
        window_length: TimeDelta,
        window_count: Option<usize>,
    ) -> Result<Self> {
        let raw: BTreeMap<String, Vec<RawEvent>> = serde_json::from_str(text)?;
        let len_ms = window_length.num_milliseconds();
        if len_ms <= 0 {
            return Err(Error::NonPositiveWindow);
        }
        let mut windows = BTreeMap::new();
        for (when, events) in raw {
            let t = parse_timestamp(&when)?;
            let offset = (t - stream_start).num_milliseconds();
            if offset < 0 || offset % len_ms != 0 {
                return Err(Error::GroundTruth(format!(
                    "{when} is not a window start (stream starts {}, windows of {}s)",
                    format_timestamp(&stream_start),
                    window_length.num_seconds()
                )));
            }
            let index = (offset / len_ms) as usize;
            if let Some(count) = window_count.filter(|&c| index >= c) {
                return Err(Error::GroundTruth(format!(
                    "{when} resolves to window {index} but the stream has {count} windows"
                )));
            }
            let parsed = events
                .into_iter()
                .map(|e| GtEvent::new(e.label, e.synonym_groups))
                .collect::<Result<Vec<_>>>()?;
            if !parsed.is_empty() {
                windows.entry(index).or_insert_with(Vec::new).extend(parsed);
            }
        }
        Ok(GroundTruth { windows })
    }

    pub fn load(
        path: &Path,
        stream_start: DateTime<Utc>,
        window_length: TimeDelta,
        window_count: Option<usize>,
    ) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, stream_start, window_length, window_count)
    }
}

/// A window is relevant when every one of its events is matched by the
/// detected words.
pub fn window_is_relevant(detected_words: &BTreeSet<String>, events: &[GtEvent]) -> bool {
    !events.is_empty() && events.iter().all(|e| e.matches(detected_words))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub keyword_recall: f64,
    /// |W|: windows with ground-truth events.
    pub gt_windows: usize,
    /// |W^d|: flagged windows.
    pub detected_windows: usize,
    /// |W^r|: flagged windows that are relevant.
    pub relevant_windows: usize,
    pub matched_groups: usize,
    pub total_groups: usize,
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Recall, precision, F1 and micro-averaged keyword recall of a detection
/// run. Ground-truth windows without a result count as not flagged.
pub fn compute_metrics(results: &[WindowPairResult], gt: &GroundTruth) -> Result<MetricsReport> {
    if gt.windows.is_empty() {
        return Err(Error::GroundTruth("no ground-truth windows".into()));
    }
    let flagged: BTreeMap<usize, &WindowPairResult> = results
        .iter()
        .filter(|r| r.is_event)
        .map(|r| (r.window_index, r))
        .collect();

    let mut relevant = 0;
    let mut matched_groups = 0;
    for (index, events) in &gt.windows {
        let Some(result) = flagged.get(index) else {
            continue;
        };
        if window_is_relevant(&result.event_words, events) {
            relevant += 1;
        }
        matched_groups += events
            .iter()
            .flat_map(|e| &e.synonym_groups)
            .filter(|g| g.matches(&result.event_words))
            .count();
    }

    let gt_windows = gt.windows.len();
    let detected = flagged.len();
    let total_groups = gt.total_groups();
    let recall = relevant as f64 / gt_windows as f64;
    let precision = if detected == 0 {
        log::warn!("no windows flagged; precision set to 0");
        0.0
    } else {
        relevant as f64 / detected as f64
    };
    Ok(MetricsReport {
        recall,
        precision,
        f1: f1_score(precision, recall),
        keyword_recall: matched_groups as f64 / total_groups as f64,
        gt_windows,
        detected_windows: detected,
        relevant_windows: relevant,
        matched_groups,
        total_groups,
    })
}
