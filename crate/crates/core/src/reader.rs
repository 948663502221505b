//! The reader phase: pick an answer span out of retrieved passages.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::analysis::{split_words, Analyzer};
use crate::corpus::{Passage, PassageStore};
use crate::error::{Error, Result};
use crate::retrieve::ScoredHit;
use crate::sparse::InvertedIndex;
use crate::text::{char_len, char_slice};

pub const DEFAULT_MAX_ANSWER_TOKENS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerSpan {
    pub passage_id: String,
    pub start_char: usize,
    pub end_char: usize,
    pub text: String,
    pub score: f64,
    pub retriever_rank: usize,
}

/// Raw reader output before it is checked against the passage text.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpanPrediction {
    pub start_char: usize,
    pub end_char: usize,
    pub score: f64,
}

pub trait Reader: Send + Sync {
    fn name(&self) -> &str;

    fn max_answer_tokens(&self) -> usize;

    /// At most one span for this passage; `Ok(None)` means no answer.
    fn read(&self, question: &str, passage: &Passage) -> Result<Option<SpanPrediction>>;
}

/// Checks offsets against the passage and materializes the span text.
pub fn accept_span(
    passage: &Passage,
    prediction: SpanPrediction,
    retriever_rank: usize,
) -> Result<AnswerSpan> {
    let SpanPrediction {
        start_char,
        end_char,
        score,
    } = prediction;
    let len = char_len(&passage.text);
    if start_char >= end_char || end_char > len {
        return Err(Error::Contract(format!(
            "span [{start_char}, {end_char}) invalid for passage {} of length {len}",
            passage.id
        )));
    }
    if !score.is_finite() {
        return Err(Error::Contract(format!("non-finite reader score {score}")));
    }
    let text = char_slice(&passage.text, start_char, end_char)
        .expect("offsets checked above")
        .to_string();
    Ok(AnswerSpan {
        passage_id: passage.id.clone(),
        start_char,
        end_char,
        text,
        score,
        retriever_rank,
    })
}

/// Lexical stand-in for a neural reader.
///
/// Every window of at most `max_answer_tokens` words scores the idf sum of the
/// distinct question terms it contains, minus `lambda` per word. The best
/// window wins; ties go to the earliest start, then the shortest window.
#[derive(Debug, Clone)]
pub struct ReferenceReader {
    analyzer: Analyzer,
    idf: HashMap<String, f64>,
    lambda: f64,
    max_answer_tokens: usize,
}

impl ReferenceReader {
    /// Takes idf values and the analyzer from `index`; the per-word penalty
    /// is one hundredth of the mean vocabulary idf.
    pub fn from_index(index: &InvertedIndex, max_answer_tokens: usize) -> Self {
        let idf = index
            .vocabulary()
            .map(|t| (t.to_string(), index.idf(t)))
            .collect();
        ReferenceReader {
            analyzer: index.analyzer().clone(),
            idf,
            lambda: 0.01 * index.mean_idf(),
            max_answer_tokens,
        }
    }

    pub fn with_weights(
        analyzer: Analyzer,
        idf: HashMap<String, f64>,
        lambda: f64,
        max_answer_tokens: usize,
    ) -> Self {
        ReferenceReader {
            analyzer,
            idf,
            lambda,
            max_answer_tokens,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn best_window(&self, question: &str, text: &str) -> Option<SpanPrediction> {
        let q_terms: HashSet<String> = self.analyzer.analyze(question).into_iter().collect();
        if q_terms.is_empty() || self.max_answer_tokens == 0 {
            return None;
        }
        let words = split_words(text);
        let terms: Vec<Option<String>> = words
            .iter()
            .map(|w| self.analyzer.term(w.text).filter(|t| q_terms.contains(t)))
            .collect();

        let mut best: Option<(f64, usize, usize)> = None;
        for start in 0..words.len() {
            let mut matched: HashSet<&str> = HashSet::new();
            let mut gain = 0.0;
            let stop = (start + self.max_answer_tokens).min(words.len());
            for end in start..stop {
                if let Some(term) = &terms[end] {
                    if matched.insert(term) {
                        gain += self.idf.get(term).copied().unwrap_or(0.0);
                    }
                }
                let score = gain - self.lambda * (end - start + 1) as f64;
                if best.is_none_or(|(s, _, _)| score > s) {
                    best = Some((score, start, end));
                }
            }
        }
        let (score, start, end) = best?;
        (score > 0.0).then(|| SpanPrediction {
            start_char: words[start].start,
            end_char: words[end].end,
            score,
        })
    }
}

impl Reader for ReferenceReader {
    fn name(&self) -> &str {
        "reference"
    }

    fn max_answer_tokens(&self) -> usize {
        self.max_answer_tokens
    }

    fn read(&self, question: &str, passage: &Passage) -> Result<Option<SpanPrediction>> {
        Ok(self.best_window(question, &passage.text))
    }
}

/// Runs the reader on a single passage and validates its output.
pub fn reference_read(
    reader: &ReferenceReader,
    question: &str,
    passage: &Passage,
) -> Option<AnswerSpan> {
    let prediction = reader.best_window(question, &passage.text)?;
    Some(accept_span(passage, prediction, 1).expect("reference reader emits valid spans"))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineAnswer {
    pub answer: Option<AnswerSpan>,
    /// One entry per passage whose reader call failed and was skipped.
    pub warnings: Vec<String>,
}

/// Reads every hit's passage and keeps the highest-scoring span. Ties go to
/// the better retriever rank, then the earlier start.
pub fn pipeline_answer(
    question: &str,
    hits: &[ScoredHit],
    reader: &dyn Reader,
    store: &PassageStore,
) -> Result<PipelineAnswer> {
    let mut out = PipelineAnswer::default();
    if hits.is_empty() {
        return Ok(out);
    }
    for hit in hits {
        let attempt = store
            .get(&hit.passage_id)
            .ok_or_else(|| Error::UnknownPassage(hit.passage_id.clone()))
            .and_then(|p| {
                reader
                    .read(question, p)?
                    .map(|pred| accept_span(p, pred, hit.rank))
                    .transpose()
            });
        match attempt {
            Ok(Some(span)) => {
                let better = match &out.answer {
                    None => true,
                    Some(cur) => span
                        .score
                        .total_cmp(&cur.score)
                        .then_with(|| cur.retriever_rank.cmp(&span.retriever_rank))
                        .then_with(|| cur.start_char.cmp(&span.start_char))
                        .is_gt(),
                };
                if better {
                    out.answer = Some(span);
                }
            }
            Ok(None) => {}
            Err(e) => {
                tracing::warn!(passage = %hit.passage_id, reader = reader.name(), "reader failed: {e}");
                out.warnings.push(format!("{}: {e}", hit.passage_id));
            }
        }
    }
    if out.warnings.len() == hits.len() {
        return Err(Error::AllReadersFailed(hits.len()));
    }
    Ok(out)
}
