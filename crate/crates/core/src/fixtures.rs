//! Synthetic corpora for tests, benchmarks and demos.
//!
//! The planted-answer corpus ties every question to its gold passage through
//! two invented words that occur nowhere else; the question asks for exactly
//! those two words, so a lexical retriever plus the reference reader answer
//! every question correctly.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::Analyzer;
use crate::corpus::{save_dataset, save_passages, CharSpan, Dataset, Passage, PassageStore, QALabel};
use crate::error::Result;
use crate::text::char_len;

const FILLER: &[&str] = &[
    "Adults generally need seven to nine hours of sleep each night.",
    "Consistent bedtimes help regulate the circadian rhythm.",
    "Caffeine late in the day can delay sleep onset.",
    "Bright light in the morning supports daytime alertness.",
    "Short naps can restore energy without grogginess.",
    "Screens before bed may suppress melatonin release.",
    "A cool and quiet bedroom promotes deeper rest.",
    "Alcohol fragments sleep during the second half of the night.",
    "Regular exercise improves sleep quality for many people.",
    "Shift workers often struggle with irregular schedules.",
    "Snoring can signal obstructive breathing during sleep.",
    "Teenagers tend to feel sleepy later in the evening.",
];

const SYLLABLES: &[&str] = &["ka", "lo", "mi", "nu", "ra", "ti", "vo", "zu", "po", "gi", "da", "fu"];

fn pseudo_word(i: usize) -> String {
    let mut word = String::from("q");
    let mut rest = i;
    for _ in 0..4 {
        word.push_str(SYLLABLES[rest % SYLLABLES.len()]);
        rest /= SYLLABLES.len();
    }
    word
}

#[derive(Debug, Clone)]
pub struct PlantedFixture {
    pub store: PassageStore,
    pub dataset: Dataset,
}

impl PlantedFixture {
    /// Writes `passages.jsonl` and `labels.jsonl` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
        let dir = dir.as_ref();
        let passages = dir.join("passages.jsonl");
        let labels = dir.join("labels.jsonl");
        save_passages(&self.store, &passages)?;
        save_dataset(&self.dataset, &labels)?;
        Ok((passages, labels))
    }
}

/// `n_questions` planted passages followed by `n_distractors` filler-only
/// passages.
pub fn planted(n_questions: usize, n_distractors: usize) -> PlantedFixture {
    let analyzer = Analyzer::default();
    let mut stems = HashSet::new();
    let mut passages = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n_questions {
        let (a, b) = (pseudo_word(2 * i), pseudo_word(2 * i + 1));
        for w in [&a, &b] {
            let terms = analyzer.analyze(w);
            assert!(terms.len() == 1 && stems.insert(terms[0].clone()), "fixture word clash: {w}");
        }
        let answer = format!("{a} {b}");
        let lead = FILLER[i % FILLER.len()];
        let tail = FILLER[(i * 5 + 3) % FILLER.len()];
        let prefix = format!("{lead} Clinicians call this pattern ");
        let text = format!("{prefix}{answer} in sleep logs. {tail}");
        let start = char_len(&prefix);
        let id = format!("planted-{i:03}");
        passages.push(
            Passage::new(&id, &text)
                .expect("non-empty")
                .with_title(format!("Planted passage {i}"))
                .with_source_url(format!("https://example.org/planted/{i}")),
        );
        labels.push(QALabel {
            qid: format!("pq-{i:03}"),
            question: format!("What is {answer}?"),
            gold_passage_id: id,
            answers: vec![answer.clone()],
            answer_span: Some(CharSpan {
                start,
                end: start + char_len(&answer),
            }),
        });
    }
    for j in 0..n_distractors {
        let text = format!(
            "{} {}",
            FILLER[j % FILLER.len()],
            FILLER[(j * 7 + 1) % FILLER.len()]
        );
        passages.push(Passage::new(format!("filler-{j:03}"), &text).expect("non-empty"));
    }
    let store = PassageStore::new(passages).expect("unique ids");
    let dataset = Dataset::original("planted", labels, store.fingerprint()).expect("unique qids");
    PlantedFixture { store, dataset }
}

/// Random passages over the vocabulary `w0 .. w{vocab-1}`.
pub fn random_corpus(seed: u64, n_passages: usize, vocab: usize, max_len: usize) -> PassageStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let passages = (0..n_passages)
        .map(|i| {
            let len = rng.gen_range(1..=max_len);
            let words: Vec<String> = (0..len)
                .map(|_| format!("w{}", rng.gen_range(0..vocab)))
                .collect();
            Passage::new(format!("d{i:03}"), &words.join(" ")).expect("non-empty")
        })
        .collect();
    PassageStore::new(passages).expect("unique ids")
}

/// Random labels over a small-vocabulary corpus (`w0 .. w59`). Questions are
/// drawn from the gold passage's words; answers are one or two consecutive
/// gold words and frequently recur in other passages.
pub fn synthetic_qa(seed: u64, n_labels: usize, n_passages: usize) -> PlantedFixture {
    const VOCAB: usize = 60;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let texts: Vec<Vec<String>> = (0..n_passages)
        .map(|_| {
            let len = rng.gen_range(15..=40);
            (0..len).map(|_| format!("w{}", rng.gen_range(0..VOCAB))).collect()
        })
        .collect();
    let passages = texts
        .iter()
        .enumerate()
        .map(|(i, words)| Passage::new(format!("s{i:04}"), &words.join(" ")).expect("non-empty"))
        .collect();
    let store = PassageStore::new(passages).expect("unique ids");

    let labels = (0..n_labels)
        .map(|i| {
            let gold = rng.gen_range(0..n_passages);
            let words = &texts[gold];
            let answer_len = rng.gen_range(1..=2).min(words.len());
            let at = rng.gen_range(0..=words.len() - answer_len);
            let answer = words[at..at + answer_len].join(" ");
            let start: usize = words[..at].iter().map(|w| w.len() + 1).sum();
            let n_q = rng.gen_range(3..=5);
            let q_words: Vec<&str> = (0..n_q)
                .map(|_| words[rng.gen_range(0..words.len())].as_str())
                .collect();
            QALabel {
                qid: format!("sq-{i:04}"),
                question: format!("what {}?", q_words.join(" ")),
                gold_passage_id: format!("s{gold:04}"),
                answer_span: Some(CharSpan {
                    start,
                    end: start + answer.len(),
                }),
                answers: vec![answer],
            }
        })
        .collect();
    let dataset = Dataset::original("synthetic", labels, store.fingerprint()).expect("unique qids");
    PlantedFixture { store, dataset }
}

/// A random query over the same vocabulary as [`random_corpus`].
pub fn random_query(rng: &mut impl Rng, vocab: usize, max_terms: usize) -> String {
    let n = rng.gen_range(1..=max_terms);
    (0..n)
        .map(|_| format!("w{}", rng.gen_range(0..vocab)))
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::validate_label;

    #[test]
    fn planted_labels_validate() {
        let f = planted(40, 10);
        assert_eq!(f.store.len(), 50);
        assert_eq!(f.dataset.len(), 40);
        for l in f.dataset.records() {
            validate_label(l, &f.store).unwrap();
        }
    }

    #[test]
    fn random_corpus_is_seeded() {
        let a = random_corpus(5, 20, 50, 12);
        let b = random_corpus(5, 20, 50, 12);
        assert_eq!(a.passages(), b.passages());
        assert_ne!(a.passages(), random_corpus(6, 20, 50, 12).passages());
    }
}
