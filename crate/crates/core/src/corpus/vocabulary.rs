use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::stopwords::StopWords;
use super::tokenize::is_punctuation;
use super::TimeWindow;

/// Token frequencies of one window. Frequencies are always at least 1.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    entries: BTreeMap<String, u64>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_tokens<'a, I>(tokens: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut entries = BTreeMap::new();
        for t in tokens {
            *entries.entry(t.to_string()).or_insert(0) += 1;
        }
        Vocabulary { entries }
    }

    /// Builds a vocabulary from explicit counts, dropping zero counts.
    pub fn from_counts<I, S>(counts: I) -> Self
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let mut entries = BTreeMap::new();
        for (t, n) in counts {
            if n > 0 {
                *entries.entry(t.into()).or_insert(0) += n;
            }
        }
        Vocabulary { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains_key(token)
    }

    pub fn frequency(&self, token: &str) -> u64 {
        self.entries.get(token).copied().unwrap_or(0)
    }

    /// Entries in lexicographic token order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.entries.iter().map(|(t, &n)| (t.as_str(), n))
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Tokens sorted by descending frequency, ties broken lexicographically.
    pub fn by_frequency(&self) -> Vec<String> {
        let mut tokens: Vec<(&String, u64)> = self.entries.iter().map(|(t, &n)| (t, n)).collect();
        tokens.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        tokens.into_iter().map(|(t, _)| t.clone()).collect()
    }

    /// Number of tokens of `self` that do not occur in `older`.
    pub fn new_tokens_since(&self, older: &Vocabulary) -> usize {
        self.tokens().filter(|t| !older.contains(t)).count()
    }

    pub fn is_subset_of(&self, other: &Vocabulary) -> bool {
        self.tokens().all(|t| other.contains(t))
    }
}

/// Which tokens survive preprocessing before change computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preprocess {
    AllTokens,
    NoPunctuation,
    #[default]
    NoPunctuationNoStopwords,
}

impl Preprocess {
    pub fn as_str(self) -> &'static str {
        match self {
            Preprocess::AllTokens => "all_tokens",
            Preprocess::NoPunctuation => "no_punctuation",
            Preprocess::NoPunctuationNoStopwords => "no_punctuation_no_stopwords",
        }
    }
}

impl fmt::Display for Preprocess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preprocess {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "all_tokens" | "all" | "none" => Ok(Preprocess::AllTokens),
            "no_punctuation" => Ok(Preprocess::NoPunctuation),
            "no_punctuation_no_stopwords" => Ok(Preprocess::NoPunctuationNoStopwords),
            _ => Err(format!(
                "unknown preprocessing {s:?} (expected all_tokens, no_punctuation or no_punctuation_no_stopwords)"
            )),
        }
    }
}

/// Preprocessing applied to a raw window vocabulary: punctuation and
/// stop-word removal according to `mode`, then the frequency threshold
/// `beta` (tokens seen fewer than `beta` times are dropped as outliers).
#[derive(Debug, Clone)]
pub struct VocabularyFilter {
    pub mode: Preprocess,
    pub beta: u64,
    pub stopwords: Arc<StopWords>,
}

impl VocabularyFilter {
    pub fn new(mode: Preprocess, beta: u64, stopwords: Arc<StopWords>) -> Self {
        VocabularyFilter {
            mode,
            beta,
            stopwords,
        }
    }

    pub fn keeps(&self, token: &str, frequency: u64) -> bool {
        if frequency < self.beta {
            return false;
        }
        match self.mode {
            Preprocess::AllTokens => true,
            Preprocess::NoPunctuation => !is_punctuation(token),
            Preprocess::NoPunctuationNoStopwords => {
                !is_punctuation(token) && !self.stopwords.contains(token)
            }
        }
    }

    pub fn apply(&self, raw: &Vocabulary) -> Vocabulary {
        Vocabulary {
            entries: raw
                .entries
                .iter()
                .filter(|(t, &n)| self.keeps(t, n))
                .map(|(t, &n)| (t.clone(), n))
                .collect(),
        }
    }
}

/// Vocabulary of a window: the raw token counts when `filter` is `None`,
/// otherwise the preprocessed vocabulary.
pub fn build_vocabulary(window: &TimeWindow, filter: Option<&VocabularyFilter>) -> Vocabulary {
    match filter {
        None => window.raw_vocabulary.clone(),
        Some(f) => f.apply(&window.raw_vocabulary),
    }
}
