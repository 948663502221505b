//! Text analysis shared by indexing, querying and the reference reader.
//!
//! The chain is: split on non-alphanumeric boundaries, lowercase, drop
//! stopwords, stem. It approximates an English search analyzer; exact parity
//! with any particular search engine is not a goal.

use std::collections::BTreeSet;
use std::fmt;

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

/// English stopword list of the classic search-engine English analyzer.
pub const ENGLISH_STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "if", "in", "into", "is", "it",
    "no", "not", "of", "on", "or", "such", "that", "the", "their", "then", "there", "these",
    "they", "this", "to", "was", "will", "with",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyzerConfig {
    pub lowercase: bool,
    pub stopwords: BTreeSet<String>,
    pub stemming: bool,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        AnalyzerConfig {
            lowercase: true,
            stopwords: ENGLISH_STOPWORDS.iter().map(|s| s.to_string()).collect(),
            stemming: true,
        }
    }
}

impl AnalyzerConfig {
    /// No stopwords, no stemming; lowercasing only.
    pub fn plain() -> Self {
        AnalyzerConfig {
            lowercase: true,
            stopwords: BTreeSet::new(),
            stemming: false,
        }
    }
}

/// A raw word of the input with its character offsets `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawToken<'a> {
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
}

/// Splits `text` into maximal alphanumeric runs.
pub fn split_words(text: &str) -> Vec<RawToken<'_>> {
    let mut out = Vec::new();
    let mut current: Option<(usize, usize)> = None; // (byte start, char start)
    let mut char_idx = 0;
    for (b, c) in text.char_indices() {
        if c.is_alphanumeric() {
            if current.is_none() {
                current = Some((b, char_idx));
            }
        } else if let Some((bs, cs)) = current.take() {
            out.push(RawToken {
                text: &text[bs..b],
                start: cs,
                end: char_idx,
            });
        }
        char_idx += 1;
    }
    if let Some((bs, cs)) = current {
        out.push(RawToken {
            text: &text[bs..],
            start: cs,
            end: char_idx,
        });
    }
    out
}

pub struct Analyzer {
    config: AnalyzerConfig,
    stemmer: Stemmer,
}

impl fmt::Debug for Analyzer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Analyzer").field("config", &self.config).finish()
    }
}

impl Clone for Analyzer {
    fn clone(&self) -> Self {
        Analyzer::new(self.config.clone())
    }
}

impl Default for Analyzer {
    fn default() -> Self {
        Analyzer::new(AnalyzerConfig::default())
    }
}

impl Analyzer {
    pub fn new(config: AnalyzerConfig) -> Self {
        Analyzer {
            config,
            stemmer: Stemmer::create(Algorithm::English),
        }
    }

    pub fn config(&self) -> &AnalyzerConfig {
        &self.config
    }

    /// Maps one raw word to its index term, or `None` for a stopword.
    pub fn term(&self, word: &str) -> Option<String> {
        let word = if self.config.lowercase {
            word.to_lowercase()
        } else {
            word.to_string()
        };
        if self.config.stopwords.contains(&word) {
            return None;
        }
        if self.config.stemming {
            Some(self.stemmer.stem(&word).into_owned())
        } else {
            Some(word)
        }
    }

    pub fn analyze(&self, text: &str) -> Vec<String> {
        split_words(text)
            .into_iter()
            .filter_map(|t| self.term(t.text))
            .collect()
    }
}
