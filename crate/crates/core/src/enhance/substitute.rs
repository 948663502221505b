use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{split_words, ENGLISH_STOPWORDS};
use crate::corpus::{Dataset, Provenance, QALabel, Variant};
use crate::error::{Error, Result};
use crate::text::byte_offset;

use super::variant_dataset;

/// Lowercase token -> ordered replacement candidates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynonymLexicon {
    map: BTreeMap<String, Vec<String>>,
}

impl SynonymLexicon {
    pub fn new(map: BTreeMap<String, Vec<String>>) -> Result<Self> {
        for (token, replacements) in &map {
            if token.is_empty() || *token != token.to_lowercase() {
                return Err(Error::Lexicon(format!("entry {token:?} is not lowercase")));
            }
            if replacements.is_empty() {
                return Err(Error::Lexicon(format!("entry {token:?} has no replacements")));
            }
            for r in replacements {
                if r.is_empty() || *r != r.to_lowercase() {
                    return Err(Error::Lexicon(format!(
                        "replacement {r:?} for {token:?} is not lowercase"
                    )));
                }
                if r == token {
                    return Err(Error::Lexicon(format!("{token:?} maps to itself")));
                }
            }
        }
        Ok(SynonymLexicon { map })
    }

    /// Reads a JSON object of `token -> [replacements]`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::new(serde_json::from_str(&body)?)
    }

    pub fn get(&self, token: &str) -> Option<&[String]> {
        self.map.get(token).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Substitution {
    pub label: QALabel,
    pub provenance: Provenance,
    /// No eligible token; the question is the original one.
    pub unchanged: bool,
    /// Word positions (in `split_words` order) that were replaced.
    pub positions: Vec<usize>,
}

fn qid_seed(seed: u64, qid: &str) -> u64 {
    qid.bytes()
        .fold(seed ^ 0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

fn match_case(original: &str, replacement: &str) -> String {
    let mut chars = original.chars();
    let first_upper = chars.next().is_some_and(char::is_uppercase);
    if first_upper && original.chars().count() > 1 && original.chars().all(|c| !c.is_lowercase()) {
        return replacement.to_uppercase();
    }
    if first_upper {
        let mut r = replacement.chars();
        return match r.next() {
            Some(c) => c.to_uppercase().chain(r).collect(),
            None => String::new(),
        };
    }
    replacement.to_string()
}

/// Word positions of `question` that may be replaced: covered by the
/// lexicon, not a stopword, and not a word of any gold answer.
pub(crate) fn eligible_positions(question: &str, answers: &[String], lexicon: &SynonymLexicon) -> Vec<usize> {
    let answer_words: HashSet<String> = answers
        .iter()
        .flat_map(|a| split_words(a).into_iter().map(|w| w.text.to_lowercase()))
        .collect();
    split_words(question)
        .iter()
        .enumerate()
        .filter(|(_, w)| {
            let lower = w.text.to_lowercase();
            lexicon.get(&lower).is_some()
                && !ENGLISH_STOPWORDS.contains(&lower.as_str())
                && !answer_words.contains(&lower)
        })
        .map(|(i, _)| i)
        .collect()
}

/// Replaces up to `max_subs` eligible question words with lexicon entries.
/// Choices depend only on `seed` and the label's qid.
pub fn substitute_words(
    label: &QALabel,
    origin: &Provenance,
    lexicon: &SynonymLexicon,
    max_subs: usize,
    seed: u64,
) -> Result<Substitution> {
    if max_subs < 1 {
        return Err(Error::Contract("max_subs must be at least 1".into()));
    }
    let provenance = Provenance {
        origin_qid: origin.origin_qid.clone(),
        method: Variant::WordSubstitution,
    };
    let mut out = label.clone();
    out.qid = format!("{}#ws", label.qid);

    let eligible = eligible_positions(&label.question, &label.answers, lexicon);
    if eligible.is_empty() {
        return Ok(Substitution {
            label: out,
            provenance,
            unchanged: true,
            positions: Vec::new(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(qid_seed(seed, &label.qid));
    let amount = max_subs.min(eligible.len());
    let mut positions: Vec<usize> = index::sample(&mut rng, eligible.len(), amount)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    positions.sort_unstable();

    let words = split_words(&label.question);
    let q = &label.question;
    let mut rewritten = String::with_capacity(q.len());
    let mut cursor = 0;
    for &pos in &positions {
        let w = &words[pos];
        let begin = byte_offset(q, w.start).expect("word offsets are in range");
        let end = byte_offset(q, w.end).expect("word offsets are in range");
        let choices = lexicon.get(&w.text.to_lowercase()).expect("eligible words are covered");
        let pick = &choices[rng.gen_range(0..choices.len())];
        rewritten.push_str(&q[cursor..begin]);
        rewritten.push_str(&match_case(w.text, pick));
        cursor = end;
    }
    rewritten.push_str(&q[cursor..]);
    out.question = rewritten;

    Ok(Substitution {
        label: out,
        provenance,
        unchanged: false,
        positions,
    })
}

/// Word-substituted copy of every record. Returns the dataset and the qids
/// of records left unchanged.
pub fn apply_word_substitution(
    dataset: &Dataset,
    lexicon: &SynonymLexicon,
    max_subs: usize,
    seed: u64,
) -> Result<(Dataset, Vec<String>)> {
    let mut items = Vec::with_capacity(dataset.len());
    let mut unchanged = Vec::new();
    for (label, prov) in dataset.iter() {
        let s = substitute_words(label, prov, lexicon, max_subs, seed)?;
        if s.unchanged {
            unchanged.push(s.label.qid.clone());
        }
        items.push((s.label, s.provenance));
    }
    Ok((variant_dataset(dataset, Variant::WordSubstitution, items)?, unchanged))
}
