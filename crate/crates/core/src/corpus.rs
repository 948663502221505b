//! Passages, QA labels and datasets, plus their JSON-lines file formats.
//!
//! Everything is normalized once at load time (see [`normalize_text`]); the
//! rest of the system only ever sees the canonical text.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::text::{char_len, char_slice, normalize_text};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(rename = "url", default, skip_serializing_if = "Option::is_none")]
    pub source_url: Option<String>,
}

impl Passage {
    /// Normalizes `text`; fails if nothing is left.
    pub fn new(id: impl Into<String>, text: &str) -> Result<Self> {
        let id = id.into();
        let text = normalize_text(text);
        if text.is_empty() {
            return Err(Error::EmptyPassage(id));
        }
        Ok(Passage {
            id,
            text,
            title: None,
            source_url: None,
        })
    }

    pub fn with_title(mut self, title: impl Into<String>) -> Self {
        self.title = Some(title.into());
        self
    }

    pub fn with_source_url(mut self, url: impl Into<String>) -> Self {
        self.source_url = Some(url.into());
        self
    }
}

/// Immutable, id-addressable collection of passages in file order.
#[derive(Debug, Clone)]
pub struct PassageStore {
    passages: Vec<Passage>,
    by_id: HashMap<String, usize>,
    fingerprint: String,
}

impl PassageStore {
    pub fn new(passages: Vec<Passage>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(passages.len());
        let mut hasher = Sha256::new();
        for (i, p) in passages.iter().enumerate() {
            if p.text.is_empty() {
                return Err(Error::EmptyPassage(p.id.clone()));
            }
            if by_id.insert(p.id.clone(), i).is_some() {
                return Err(Error::DuplicatePassage(p.id.clone()));
            }
            hasher.update((p.id.len() as u64).to_le_bytes());
            hasher.update(p.id.as_bytes());
            hasher.update((p.text.len() as u64).to_le_bytes());
            hasher.update(p.text.as_bytes());
        }
        let fingerprint = hex::encode(&hasher.finalize()[..12]);
        Ok(PassageStore {
            passages,
            by_id,
            fingerprint,
        })
    }

    pub fn get(&self, id: &str) -> Option<&Passage> {
        self.by_id.get(id).map(|&i| &self.passages[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Passage> {
        self.passages.iter()
    }

    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    /// Content hash over ids and texts in order. Datasets remember the
    /// fingerprint of the store they were validated against.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }
}

/// Character offsets `[start, end)` into the gold passage's normalized text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QALabel {
    pub qid: String,
    pub question: String,
    pub gold_passage_id: String,
    pub answers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_span: Option<CharSpan>,
}

/// How a dataset (or a single record) was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Original,
    HardNegatives,
    WordSubstitution,
    Paraphrase,
    BackTranslation,
    Augmented,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Original,
        Variant::HardNegatives,
        Variant::WordSubstitution,
        Variant::Paraphrase,
        Variant::BackTranslation,
        Variant::Augmented,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::HardNegatives => "hard_negatives",
            Variant::WordSubstitution => "word_substitution",
            Variant::Paraphrase => "paraphrase",
            Variant::BackTranslation => "back_translation",
            Variant::Augmented => "augmented",
        }
    }

    /// Suffix appended to the origin qid by reformulation methods.
    pub fn qid_suffix(self) -> Option<&'static str> {
        match self {
            Variant::WordSubstitution => Some("#ws"),
            Variant::Paraphrase => Some("#pp"),
            Variant::BackTranslation => Some("#bt"),
            _ => None,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Contract(format!("unknown dataset variant {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub origin_qid: String,
    pub method: Variant,
}

impl Provenance {
    pub fn original(qid: &str) -> Self {
        Provenance {
            origin_qid: qid.to_string(),
            method: Variant::Original,
        }
    }
}

/// A label set plus the per-record provenance linking each record back to
/// the expert-annotated label it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub variant: Variant,
    records: Vec<QALabel>,
    provenance: Vec<Provenance>,
    store_fingerprint: String,
}

impl Dataset {
    /// Checks qid uniqueness and the `original` provenance rule. Record
    /// contents are assumed to have been validated against the store.
    pub fn new(
        name: impl Into<String>,
        variant: Variant,
        records: Vec<QALabel>,
        provenance: Vec<Provenance>,
        store_fingerprint: impl Into<String>,
    ) -> Result<Self> {
        if records.len() != provenance.len() {
            return Err(Error::Contract(format!(
                "{} records but {} provenance entries",
                records.len(),
                provenance.len()
            )));
        }
        let mut seen = HashSet::with_capacity(records.len());
        for (r, p) in records.iter().zip(&provenance) {
            if !seen.insert(r.qid.as_str()) {
                return Err(Error::DuplicateQid(r.qid.clone()));
            }
            if variant == Variant::Original
                && (p.method != Variant::Original || p.origin_qid != r.qid)
            {
                return Err(Error::Contract(format!(
                    "original dataset record {} has non-self provenance",
                    r.qid
                )));
            }
        }
        Ok(Dataset {
            name: name.into(),
            variant,
            records,
            provenance,
            store_fingerprint: store_fingerprint.into(),
        })
    }

    pub fn original(
        name: impl Into<String>,
        records: Vec<QALabel>,
        store_fingerprint: impl Into<String>,
    ) -> Result<Self> {
        let provenance = records.iter().map(|r| Provenance::original(&r.qid)).collect();
        Dataset::new(name, Variant::Original, records, provenance, store_fingerprint)
    }

    pub fn records(&self) -> &[QALabel] {
        &self.records
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn iter(&self) -> impl Iterator<Item = (&QALabel, &Provenance)> {
        self.records.iter().zip(&self.provenance)
    }

    pub fn get(&self, qid: &str) -> Option<&QALabel> {
        self.records.iter().find(|r| r.qid == qid)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn store_fingerprint(&self) -> &str {
        &self.store_fingerprint
    }
}

/// One line of the external fine-tuning hand-off file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub question: String,
    pub positive_ctx: String,
    pub negative_ctxs: Vec<String>,
    pub answers: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct PassageLine {
    id: String,
    text: String,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    url: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelLine {
    qid: String,
    question: String,
    gold_passage_id: String,
    answers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    answer_span: Option<CharSpan>,
    // Extension fields written for enhanced datasets; plain label files omit them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin_qid: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    method: Option<Variant>,
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = (usize, Result<String>)> + '_> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(move |(i, line)| (i + 1, line.map_err(|e| Error::io(path, e)))))
}

pub fn load_passages(path: impl AsRef<Path>) -> Result<PassageStore> {
    let path = path.as_ref();
    let mut passages = Vec::new();
    let mut ids = HashSet::new();
    for (line_no, line) in open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: PassageLine = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        if !ids.insert(raw.id.clone()) {
            return Err(Error::DuplicatePassage(raw.id));
        }
        let mut passage = Passage::new(raw.id, &raw.text).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        passage.title = raw.title;
        passage.source_url = raw.url;
        passages.push(passage);
    }
    PassageStore::new(passages)
}

pub fn save_passages(store: &PassageStore, path: impl AsRef<Path>) -> Result<()> {
    write_jsonl(path.as_ref(), store.iter())
}

/// Normalizes the free-text fields of a label in place.
pub fn normalize_label(label: &mut QALabel) {
    label.question = normalize_text(&label.question);
    for a in &mut label.answers {
        *a = normalize_text(a);
    }
}

/// Checks one label against the store: non-empty question and answers,
/// resolvable gold passage, and span text equal to `answers[0]`.
pub fn validate_label(label: &QALabel, store: &PassageStore) -> Result<()> {
    let invalid = |message: &str| Error::InvalidLabel {
        qid: label.qid.clone(),
        message: message.to_string(),
    };
    if label.qid.is_empty() {
        return Err(invalid("empty qid"));
    }
    if label.question.trim().is_empty() {
        return Err(invalid("empty question"));
    }
    if label.answers.is_empty() {
        return Err(invalid("no answers"));
    }
    if label.answers.iter().any(|a| a.trim().is_empty()) {
        return Err(invalid("empty answer string"));
    }
    let passage = store
        .get(&label.gold_passage_id)
        .ok_or_else(|| Error::UnresolvedGold(vec![label.qid.clone()]))?;
    if let Some(span) = label.answer_span {
        if span.start >= span.end || span.end > char_len(&passage.text) {
            return Err(invalid(&format!(
                "answer span [{}, {}) is outside the gold passage",
                span.start, span.end
            )));
        }
        let text = char_slice(&passage.text, span.start, span.end).unwrap_or_default();
        if text != label.answers[0] {
            return Err(Error::SpanMismatch {
                qid: label.qid.clone(),
                span: text.to_string(),
                answer: label.answers[0].clone(),
            });
        }
    }
    Ok(())
}

/// Loads a label file as an `original` dataset, or as an enhanced dataset
/// when the lines carry provenance fields.
pub fn load_labels(path: impl AsRef<Path>, store: &PassageStore) -> Result<Dataset> {
    let path = path.as_ref();
    let mut records = Vec::new();
    let mut provenance = Vec::new();
    for (line_no, line) in open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: LabelLine = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        let mut label = QALabel {
            qid: raw.qid,
            question: raw.question,
            gold_passage_id: raw.gold_passage_id,
            answers: raw.answers,
            answer_span: raw.answer_span,
        };
        normalize_label(&mut label);
        provenance.push(Provenance {
            origin_qid: raw.origin_qid.unwrap_or_else(|| label.qid.clone()),
            method: raw.method.unwrap_or(Variant::Original),
        });
        records.push(label);
    }

    let unresolved: Vec<String> = records
        .iter()
        .filter(|r| !store.contains(&r.gold_passage_id))
        .map(|r| r.qid.clone())
        .collect();
    if !unresolved.is_empty() {
        return Err(Error::UnresolvedGold(unresolved));
    }
    for r in &records {
        validate_label(r, store)?;
    }

    let variant = infer_variant(&records, &provenance);
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    Dataset::new(name, variant, records, provenance, store.fingerprint())
}

fn infer_variant(records: &[QALabel], provenance: &[Provenance]) -> Variant {
    let self_referential = records
        .iter()
        .zip(provenance)
        .all(|(r, p)| p.method == Variant::Original && p.origin_qid == r.qid);
    if self_referential {
        return Variant::Original;
    }
    let methods: HashSet<Variant> = provenance.iter().map(|p| p.method).collect();
    match methods.len() {
        1 => *methods.iter().next().unwrap(),
        _ => Variant::Augmented,
    }
}

/// Writes a dataset in the label format. Provenance fields are only emitted
/// for non-original datasets so original label files stay byte-compatible.
pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let with_provenance = dataset.variant != Variant::Original;
    let lines = dataset.iter().map(|(r, p)| LabelLine {
        qid: r.qid.clone(),
        question: r.question.clone(),
        gold_passage_id: r.gold_passage_id.clone(),
        answers: r.answers.clone(),
        answer_span: r.answer_span,
        origin_qid: with_provenance.then(|| p.origin_qid.clone()),
        method: with_provenance.then_some(p.method),
    });
    write_jsonl(path.as_ref(), lines)
}

/// Writes one [`TrainingRecord`] per label. Labels absent from `negatives`
/// get an empty negative list.
pub fn export_training_file(
    dataset: &Dataset,
    negatives: &BTreeMap<String, Vec<String>>,
    path: impl AsRef<Path>,
) -> Result<usize> {
    let records = training_records(dataset, negatives)?;
    write_jsonl(path.as_ref(), records.iter())?;
    Ok(records.len())
}

pub fn training_records(
    dataset: &Dataset,
    negatives: &BTreeMap<String, Vec<String>>,
) -> Result<Vec<TrainingRecord>> {
    let qids: HashSet<&str> = dataset.records().iter().map(|r| r.qid.as_str()).collect();
    if let Some(unknown) = negatives.keys().find(|q| !qids.contains(q.as_str())) {
        return Err(Error::UnknownQid(unknown.clone()));
    }
    dataset
        .records()
        .iter()
        .map(|label| {
            let negs = negatives.get(&label.qid).cloned().unwrap_or_default();
            if negs.contains(&label.gold_passage_id) {
                return Err(Error::InvalidNegatives {
                    qid: label.qid.clone(),
                    message: format!("gold passage {} listed as negative", label.gold_passage_id),
                });
            }
            let mut seen = HashSet::new();
            if let Some(dup) = negs.iter().find(|n| !seen.insert(n.as_str())) {
                return Err(Error::InvalidNegatives {
                    qid: label.qid.clone(),
                    message: format!("duplicate negative {dup}"),
                });
            }
            Ok(TrainingRecord {
                question: label.question.clone(),
                positive_ctx: label.gold_passage_id.clone(),
                negative_ctxs: negs,
                answers: label.answers.clone(),
            })
        })
        .collect()
}

pub fn read_training_file(path: impl AsRef<Path>) -> Result<Vec<TrainingRecord>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (line_no, line) in open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub(crate) fn write_jsonl<T: Serialize>(
    path: &Path,
    items: impl IntoIterator<Item = T>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
