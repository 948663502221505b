//! Answer metrics (EM, token F1), retrieval recall and end-to-end runs.
//!
//! Answers are compared after SQuAD-style normalization: lowercase, ASCII
//! punctuation stripped, the articles "a", "an" and "the" dropped, whitespace
//! collapsed. Comparison is at the string level.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, PassageStore};
use crate::error::{Error, Result};
use crate::reader::{pipeline_answer, AnswerSpan, Reader};
use crate::retrieve::{Retriever, ScoredHit};

pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let no_punct: String = lowered.chars().filter(|c| !c.is_ascii_punctuation()).collect();
    no_punct
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn require_golds(golds: &[impl AsRef<str>]) -> Result<()> {
    if golds.is_empty() {
        return Err(Error::Metric("at least one gold answer is required".into()));
    }
    Ok(())
}

pub fn exact_match(prediction: &str, golds: &[impl AsRef<str>]) -> Result<u8> {
    require_golds(golds)?;
    let pred = normalize_answer(prediction);
    Ok(golds.iter().any(|g| normalize_answer(g.as_ref()) == pred) as u8)
}

fn f1_single(pred: &str, gold: &str) -> f64 {
    let pred_tokens: Vec<&str> = pred.split_whitespace().collect();
    let gold_tokens: Vec<&str> = gold.split_whitespace().collect();
    if pred_tokens.is_empty() || gold_tokens.is_empty() {
        return (pred_tokens.is_empty() && gold_tokens.is_empty()) as u8 as f64;
    }
    let mut gold_counts: HashMap<&str, usize> = HashMap::new();
    for t in &gold_tokens {
        *gold_counts.entry(t).or_default() += 1;
    }
    let mut common = 0usize;
    for t in &pred_tokens {
        if let Some(c) = gold_counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / pred_tokens.len() as f64;
    let recall = common as f64 / gold_tokens.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Best multiset token F1 against any gold answer.
pub fn token_f1(prediction: &str, golds: &[impl AsRef<str>]) -> Result<f64> {
    require_golds(golds)?;
    let pred = normalize_answer(prediction);
    Ok(golds
        .iter()
        .map(|g| f1_single(&pred, &normalize_answer(g.as_ref())))
        .fold(0.0, f64::max))
}

/// Fraction of questions whose gold passage is among the first `k` hits.
pub fn recall_at_k(
    results: &BTreeMap<String, Vec<ScoredHit>>,
    golds: &BTreeMap<String, String>,
    k: usize,
) -> Result<f64> {
    if !results.keys().eq(golds.keys()) {
        return Err(Error::Metric("result and gold qid sets differ".into()));
    }
    if golds.is_empty() {
        return Err(Error::Metric("no questions".into()));
    }
    let found = golds
        .iter()
        .filter(|(qid, gold)| {
            results[*qid]
                .iter()
                .filter(|h| h.rank <= k)
                .any(|h| &h.passage_id == *gold)
        })
        .count();
    Ok(found as f64 / golds.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dataset_name: String,
    pub system_name: String,
    pub em: f64,
    pub token_f1: f64,
    pub recall_at_k: BTreeMap<usize, f64>,
    pub n_questions: usize,
}

impl MetricsReport {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let body = serde_json::to_string_pretty(self)?;
        std::fs::write(path, body + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&body)?)
    }
}

/// Two-column system/EM table.
pub fn render_table(reports: &[MetricsReport]) -> String {
    let width = reports
        .iter()
        .map(|r| r.system_name.len())
        .chain(["Extractive QA system name".len()])
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$} | {:>4}", "Extractive QA system name", "EM");
    let _ = writeln!(out, "{}-+-{}", "-".repeat(width), "-".repeat(4));
    for r in reports {
        let _ = writeln!(out, "{:<width$} | {:>4.2}", r.system_name, r.em);
    }
    out
}

/// Per-question outcome of an evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuestionResult {
    pub qid: String,
    pub hits: Vec<ScoredHit>,
    pub answer: Option<AnswerSpan>,
    pub em: u8,
    pub f1: f64,
}

/// Share of questions that may fail before the whole run is an error.
pub const MAX_FAILURE_RATE: f64 = 0.10;

pub fn evaluate_pipeline(
    dataset: &Dataset,
    store: &PassageStore,
    retriever: &dyn Retriever,
    reader: &dyn Reader,
    k: usize,
) -> Result<MetricsReport> {
    evaluate_pipeline_detailed(dataset, store, retriever, reader, k).map(|(r, _)| r)
}

pub fn evaluate_pipeline_detailed(
    dataset: &Dataset,
    store: &PassageStore,
    retriever: &dyn Retriever,
    reader: &dyn Reader,
    k: usize,
) -> Result<(MetricsReport, Vec<QuestionResult>)> {
    if k < 1 {
        return Err(Error::InvalidK);
    }
    if dataset.is_empty() {
        return Err(Error::Metric("cannot evaluate an empty dataset".into()));
    }
    if dataset.store_fingerprint() != store.fingerprint() {
        return Err(Error::StoreMismatch(
            dataset.store_fingerprint().to_string(),
            store.fingerprint().to_string(),
        ));
    }
    let mut failed = 0usize;
    let mut per_question = Vec::with_capacity(dataset.len());
    for label in dataset.records() {
        let outcome = retriever
            .retrieve(&label.question, k)
            .and_then(|hits| {
                let answer = pipeline_answer(&label.question, &hits, reader, store)?.answer;
                Ok((hits, answer))
            });
        let (hits, answer) = match outcome {
            Ok(v) => v,
            Err(e) => {
                tracing::warn!(qid = %label.qid, "evaluation failed: {e}");
                failed += 1;
                (Vec::new(), None)
            }
        };
        let (em, f1) = match &answer {
            Some(a) => (
                exact_match(&a.text, &label.answers)?,
                token_f1(&a.text, &label.answers)?,
            ),
            None => (0, 0.0),
        };
        per_question.push(QuestionResult {
            qid: label.qid.clone(),
            hits,
            answer,
            em,
            f1,
        });
    }
    let total = dataset.len();
    if failed as f64 > MAX_FAILURE_RATE * total as f64 {
        return Err(Error::TooManyFailures { failed, total });
    }

    let results: BTreeMap<String, Vec<ScoredHit>> = per_question
        .iter()
        .map(|q| (q.qid.clone(), q.hits.clone()))
        .collect();
    let golds: BTreeMap<String, String> = dataset
        .records()
        .iter()
        .map(|l| (l.qid.clone(), l.gold_passage_id.clone()))
        .collect();
    let mut recall = BTreeMap::new();
    for cutoff in 1..=k {
        recall.insert(cutoff, recall_at_k(&results, &golds, cutoff)?);
    }
    let n = total as f64;
    let report = MetricsReport {
        dataset_name: dataset.name.clone(),
        system_name: format!("{} + {}", retriever.name(), reader.name()),
        em: per_question.iter().map(|q| q.em as f64).sum::<f64>() / n,
        token_f1: per_question.iter().map(|q| q.f1).sum::<f64>() / n,
        recall_at_k: recall,
        n_questions: total,
    };
    Ok((report, per_question))
}

/// `100 * (new - base) / base`.
pub fn relative_improvement(base_em: f64, new_em: f64) -> Result<f64> {
    if base_em <= 0.0 {
        return Err(Error::Metric(
            "relative improvement is undefined for a zero baseline".into(),
        ));
    }
    Ok(100.0 * (new_em - base_em) / base_em)
}

/// Rounds to a whole percent, e.g. `16.67` -> `"17%"`.
pub fn format_percent(percent: f64) -> String {
    let rounded = percent.round();
    if rounded == 0.0 {
        return "0%".to_string();
    }
    format!("{rounded:.0}%")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_answer("The Answer."), "answer");
        assert_eq!(normalize_answer(""), "");
        assert_eq!(normalize_answer("an  REM   sleep"), "rem sleep");
        assert_eq!(normalize_answer("theater"), "theater");
    }

    #[test]
    fn exact_match_examples() {
        assert_eq!(exact_match("the answer", &["Answer"]).unwrap(), 1);
        assert_eq!(exact_match("partial answer", &["answer"]).unwrap(), 0);
        assert_eq!(exact_match("x", &["y", "X!"]).unwrap(), 1);
        assert!(exact_match("x", &[] as &[&str]).is_err());
    }

    #[test]
    fn f1_examples() {
        let f = token_f1("sleep quality", &["good sleep quality"]).unwrap();
        assert!((f - 0.8).abs() < 1e-15);
        assert_eq!(token_f1("deep sleep", &["deep sleep"]).unwrap(), 1.0);
        assert_eq!(token_f1("", &["the"]).unwrap(), 1.0);
        assert_eq!(token_f1("", &["sleep"]).unwrap(), 0.0);
        assert_eq!(token_f1("sleep", &["a"]).unwrap(), 0.0);
        assert!(token_f1("x", &[] as &[&str]).is_err());
    }

    #[test]
    fn f1_counts_multisets() {
        // pred has "sleep" twice, gold once: common = 1.
        let f = token_f1("sleep sleep", &["sleep"]).unwrap();
        assert!((f - 2.0 * 0.5 * 1.0 / 1.5).abs() < 1e-15);
    }

    fn hit(id: &str, rank: usize) -> ScoredHit {
        ScoredHit {
            passage_id: id.into(),
            score: 1.0 / rank as f64,
            rank,
        }
    }

    #[test]
    fn recall_counts_placements() {
        let results: BTreeMap<String, Vec<ScoredHit>> = [
            ("q1".to_string(), vec![hit("g1", 1), hit("x", 2)]),
            ("q2".to_string(), vec![hit("x", 1), hit("y", 2), hit("g2", 3)]),
            ("q3".to_string(), vec![hit("x", 1)]),
            ("q4".to_string(), vec![hit("x", 1), hit("g4", 2)]),
        ]
        .into();
        let golds: BTreeMap<String, String> = (1..=4)
            .map(|i| (format!("q{i}"), format!("g{i}")))
            .collect();
        assert_eq!(recall_at_k(&results, &golds, 1).unwrap(), 0.25);
        assert_eq!(recall_at_k(&results, &golds, 2).unwrap(), 0.5);
        assert_eq!(recall_at_k(&results, &golds, 3).unwrap(), 0.75);
        assert_eq!(recall_at_k(&results, &golds, 10).unwrap(), 0.75);

        let mut short = golds.clone();
        short.remove("q4");
        assert!(recall_at_k(&results, &short, 1).is_err());
    }

    #[test]
    fn relative_improvement_values() {
        let up = relative_improvement(0.24, 0.28).unwrap();
        assert!((up - 50.0 / 3.0).abs() < 1e-9);
        assert_eq!(format_percent(up), "17%");
        assert_eq!(format_percent(relative_improvement(0.30, 0.24).unwrap()), "-20%");
        assert_eq!(relative_improvement(0.4, 0.4).unwrap(), 0.0);
        assert_eq!(format_percent(-0.2), "0%");
        assert!(relative_improvement(0.0, 0.3).is_err());
    }

    #[test]
    fn table_lists_systems() {
        let r = |name: &str, em| MetricsReport {
            dataset_name: "test".into(),
            system_name: name.into(),
            em,
            token_f1: em,
            recall_at_k: BTreeMap::new(),
            n_questions: 10,
        };
        let t = render_table(&[r("bm25 + reference", 0.3), r("dense + remote", 0.24)]);
        assert!(t.contains("bm25 + reference          | 0.30"));
        assert!(t.contains("dense + remote            | 0.24"));
    }
}
