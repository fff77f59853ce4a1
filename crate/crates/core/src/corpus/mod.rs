//! Document ingestion, tokenization and time-window chunking.

mod stopwords;
mod tokenize;
mod vocabulary;

use std::io::BufRead;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, SubsecRound, TimeDelta, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use stopwords::{StopWords, ENGLISH as ENGLISH_STOPWORDS};
pub use tokenize::{is_emoji, is_punctuation, squash_repeats, tokenize, MAX_REPEAT};
pub use vocabulary::{build_vocabulary, Preprocess, Vocabulary, VocabularyFilter};

/// One timestamped post.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub timestamp: DateTime<Utc>,
    pub raw_text: String,
    pub tokens: Vec<String>,
}

impl Document {
    /// Tokenizes `raw_text`; the timestamp is truncated to whole seconds.
    pub fn new(id: impl Into<String>, timestamp: DateTime<Utc>, raw_text: impl Into<String>) -> Self {
        let raw_text = raw_text.into();
        Document {
            id: id.into(),
            timestamp: timestamp.trunc_subsecs(0),
            tokens: tokenize(&raw_text),
            raw_text,
        }
    }
}

/// Input record: one JSON object per line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub timestamp: String,
    pub text: String,
}

/// Parses an ISO-8601 instant. Offsets are honored; a value without an
/// offset is taken as UTC.
pub fn parse_timestamp(value: &str) -> Result<DateTime<Utc>> {
    let v = value.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(v) {
        return Ok(t.with_timezone(&Utc).trunc_subsecs(0));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(v, fmt) {
            return Ok(t.and_utc().trunc_subsecs(0));
        }
    }
    Err(Error::Timestamp {
        value: value.to_string(),
    })
}

/// Formats an instant as `YYYY-MM-DDTHH:MM:SSZ`.
pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// Reads a line-delimited JSON record file into documents, in file order.
pub fn read_documents(path: &Path) -> Result<Vec<Document>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let rec: Record = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let ts = parse_timestamp(&rec.timestamp).map_err(|e| parse_err(e.to_string()))?;
        docs.push(Document::new(rec.id, ts, rec.text));
    }
    Ok(docs)
}

/// A contiguous, half-open slice `[start, end)` of the stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeWindow {
    pub index: usize,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub documents: Vec<Document>,
    pub raw_vocabulary: Vocabulary,
}

impl TimeWindow {
    pub fn new(index: usize, start: DateTime<Utc>, end: DateTime<Utc>, documents: Vec<Document>) -> Self {
        let raw_vocabulary = Vocabulary::from_tokens(
            documents
                .iter()
                .flat_map(|d| d.tokens.iter().map(String::as_str)),
        );
        TimeWindow {
            index,
            start,
            end,
            documents,
            raw_vocabulary,
        }
    }

    /// Token sequences, one per document.
    pub fn sentences(&self) -> impl Iterator<Item = &[String]> {
        self.documents.iter().map(|d| d.tokens.as_slice())
    }

    pub fn token_count(&self) -> usize {
        self.documents.iter().map(|d| d.tokens.len()).sum()
    }

    pub fn preprocessed_vocabulary(&self, filter: &VocabularyFilter) -> Vocabulary {
        filter.apply(&self.raw_vocabulary)
    }
}

/// Splits a chronological stream into fixed-length windows starting at
/// `stream_start`.
///
/// A document stamped exactly on a boundary belongs to the later window.
/// Empty windows in the middle of the stream are kept so indices map to
/// wall-clock time; the last window is the one holding the last document.
pub fn chunk_stream(
    documents: Vec<Document>,
    window_length: TimeDelta,
    stream_start: DateTime<Utc>,
) -> Result<Vec<TimeWindow>> {
    if window_length <= TimeDelta::zero() {
        return Err(Error::NonPositiveWindow);
    }
    for (i, pair) in documents.windows(2).enumerate() {
        if pair[1].timestamp < pair[0].timestamp {
            return Err(Error::UnsortedStream {
                position: i + 1,
                id: pair[1].id.clone(),
                timestamp: format_timestamp(&pair[1].timestamp),
            });
        }
    }
    let Some(last) = documents.last() else {
        return Ok(Vec::new());
    };
    if let Some(first) = documents.first().filter(|d| d.timestamp < stream_start) {
        return Err(Error::BeforeStreamStart {
            id: first.id.clone(),
            timestamp: format_timestamp(&first.timestamp),
            stream_start: format_timestamp(&stream_start),
        });
    }

    let len_ms = window_length.num_milliseconds();
    let slot = |t: &DateTime<Utc>| ((*t - stream_start).num_milliseconds() / len_ms) as usize;
    let count = slot(&last.timestamp) + 1;

    let mut buckets: Vec<Vec<Document>> = (0..count).map(|_| Vec::new()).collect();
    for doc in documents {
        let k = slot(&doc.timestamp);
        buckets[k].push(doc);
    }
    Ok(buckets
        .into_iter()
        .enumerate()
        .map(|(k, docs)| {
            let start = stream_start + window_length * k as i32;
            TimeWindow::new(k, start, start + window_length, docs)
        })
        .collect())
}
