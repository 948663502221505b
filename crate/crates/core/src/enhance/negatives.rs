use std::collections::BTreeMap;

use crate::corpus::{Dataset, PassageStore};
use crate::error::{Error, Result};
use crate::eval::normalize_answer;
use crate::sparse::InvertedIndex;

/// Over-fetch factor: `n` negatives are picked from the top `n + 2n` hits.
pub const HARD_NEGATIVE_MARGIN: usize = 2;

/// True when the passage mentions any gold answer, either as a
/// case-insensitive substring or after answer normalization.
pub(crate) fn contains_answer(text: &str, answers: &[String]) -> bool {
    let lowered = text.to_lowercase();
    let normalized = normalize_answer(text);
    answers.iter().any(|a| {
        let a_norm = normalize_answer(a);
        lowered.contains(&a.to_lowercase()) || (!a_norm.is_empty() && normalized.contains(&a_norm))
    })
}

/// For each label, the best-ranked BM25 passages for its question that are
/// neither the gold passage nor answer-bearing, at most `n` of them.
pub fn mine_hard_negatives(
    dataset: &Dataset,
    index: &InvertedIndex,
    store: &PassageStore,
    n: usize,
) -> Result<BTreeMap<String, Vec<String>>> {
    if n < 1 {
        return Err(Error::Contract("need at least one negative per question".into()));
    }
    if index.store_fingerprint() != store.fingerprint() {
        return Err(Error::StoreMismatch(
            index.store_fingerprint().to_string(),
            store.fingerprint().to_string(),
        ));
    }
    let fetch = n + HARD_NEGATIVE_MARGIN * n;
    let mut out = BTreeMap::new();
    for label in dataset.records() {
        let negatives: Vec<String> = index
            .search(&label.question, fetch)?
            .into_iter()
            .filter(|h| h.passage_id != label.gold_passage_id)
            .filter(|h| {
                store
                    .get(&h.passage_id)
                    .is_some_and(|p| !contains_answer(&p.text, &label.answers))
            })
            .take(n)
            .map(|h| h.passage_id)
            .collect();
        out.insert(label.qid.clone(), negatives);
    }
    Ok(out)
}
