use std::collections::HashSet;

use crate::corpus::{Dataset, Variant};
use crate::error::{Error, Result};
use crate::eval::normalize_answer;

/// Deduplication key for questions.
pub fn question_key(question: &str) -> String {
    normalize_answer(question)
}

/// Union of the inputs, deduplicated by normalized question text. The first
/// occurrence in input order wins; provenance travels with each record.
pub fn merge_augment(datasets: &[&Dataset]) -> Result<Dataset> {
    let first = datasets
        .first()
        .ok_or_else(|| Error::Contract("nothing to merge".into()))?;
    let fingerprint = first.store_fingerprint();
    if let Some(other) = datasets.iter().find(|d| d.store_fingerprint() != fingerprint) {
        return Err(Error::StoreMismatch(
            fingerprint.to_string(),
            other.store_fingerprint().to_string(),
        ));
    }
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    let mut provenance = Vec::new();
    for d in datasets {
        for (label, prov) in d.iter() {
            if seen.insert(question_key(&label.question)) {
                records.push(label.clone());
                provenance.push(prov.clone());
            }
        }
    }
    let name = datasets
        .iter()
        .map(|d| d.name.as_str())
        .collect::<Vec<_>>()
        .join("+");
    Dataset::new(name, Variant::Augmented, records, provenance, fingerprint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Provenance, QALabel};

    fn ds(name: &str, fp: &str, qs: &[(&str, &str)]) -> Dataset {
        let records = qs
            .iter()
            .map(|(qid, q)| QALabel {
                qid: qid.to_string(),
                question: q.to_string(),
                gold_passage_id: "p".into(),
                answers: vec!["a".into()],
                answer_span: None,
            })
            .collect();
        Dataset::original(name, records, fp).unwrap()
    }

    #[test]
    fn single_dataset_is_returned_as_is() {
        let d = ds("d", "fp", &[("q1", "Why nap?"), ("q2", "When to sleep?")]);
        let m = merge_augment(&[&d]).unwrap();
        assert_eq!(m.records(), d.records());
        assert_eq!(m.provenance(), d.provenance());
        assert_eq!(m.variant, Variant::Augmented);
        assert_eq!(merge_augment(&[&d, &d]).unwrap().records(), d.records());
    }

    #[test]
    fn first_occurrence_wins() {
        let a = ds("a", "fp", &[("q1", "Why nap?")]);
        let b = ds("b", "fp", &[("q1#ws", "why  NAP"), ("q2", "When to sleep?")]);
        let m = merge_augment(&[&a, &b]).unwrap();
        let qids: Vec<_> = m.records().iter().map(|r| r.qid.as_str()).collect();
        assert_eq!(qids, vec!["q1", "q2"]);
        assert_eq!(m.provenance()[1], Provenance::original("q2"));
    }

    #[test]
    fn different_stores_cannot_merge() {
        let a = ds("a", "fp1", &[("q1", "x")]);
        let b = ds("b", "fp2", &[("q2", "y")]);
        assert!(matches!(merge_augment(&[&a, &b]), Err(Error::StoreMismatch(_, _))));
        assert!(merge_augment(&[]).is_err());
    }
}
