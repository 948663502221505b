//! Inverted index with BM25 ranking.
//!
//! Scores use the non-negative idf form
//! `idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))` and the usual saturating
//! term-frequency part `tf * (k1 + 1) / (tf + k1 * (1 - b + b * |d| / avgdl))`.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{Analyzer, AnalyzerConfig};
use crate::corpus::PassageStore;
use crate::error::{Error, Result};
use crate::retrieve::{top_k, ScoredHit};
use crate::snapshot::{SnapshotReader, SnapshotWriter};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 0.9, b: 0.4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Posting {
    doc: u32,
    tf: u32,
}

#[derive(Debug, Clone)]
pub struct InvertedIndex {
    analyzer: Analyzer,
    params: Bm25Params,
    doc_ids: Vec<String>,
    doc_slot: HashMap<String, u32>,
    doc_lengths: Vec<u32>,
    total_len: u64,
    avg_doc_len: f64,
    postings: BTreeMap<String, Vec<Posting>>,
    store_fingerprint: String,
}

pub fn idf(doc_count: usize, doc_freq: usize) -> f64 {
    let n = doc_count as f64;
    let df = doc_freq as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

impl InvertedIndex {
    pub fn build(store: &PassageStore, config: AnalyzerConfig, params: Bm25Params) -> Result<Self> {
        if store.is_empty() {
            return Err(Error::EmptyStore);
        }
        let analyzer = Analyzer::new(config);
        let mut doc_ids = Vec::with_capacity(store.len());
        let mut doc_slot = HashMap::with_capacity(store.len());
        let mut doc_lengths = Vec::with_capacity(store.len());
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut total_len = 0u64;

        for (slot, passage) in store.iter().enumerate() {
            let slot = slot as u32;
            let terms = analyzer.analyze(&passage.text);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in &terms {
                *tf.entry(t.clone()).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push(Posting { doc: slot, tf: count });
            }
            doc_ids.push(passage.id.clone());
            doc_slot.insert(passage.id.clone(), slot);
            doc_lengths.push(terms.len() as u32);
            total_len += terms.len() as u64;
        }

        let avg_doc_len = total_len as f64 / doc_ids.len() as f64;
        Ok(InvertedIndex {
            analyzer,
            params,
            doc_ids,
            doc_slot,
            doc_lengths,
            total_len,
            avg_doc_len,
            postings,
            store_fingerprint: store.fingerprint().to_string(),
        })
    }

    pub fn analyzer(&self) -> &Analyzer {
        &self.analyzer
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn analyze(&self, text: &str) -> Vec<String> {
        self.analyzer.analyze(text)
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn total_len(&self) -> u64 {
        self.total_len
    }

    pub fn doc_length(&self, passage_id: &str) -> Option<u32> {
        self.doc_slot
            .get(passage_id)
            .map(|&s| self.doc_lengths[s as usize])
    }

    pub fn passage_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn store_fingerprint(&self) -> &str {
        &self.store_fingerprint
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    pub fn vocabulary_size(&self) -> usize {
        self.postings.len()
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    /// `(passage id, term frequency)` pairs in store order.
    pub fn postings(&self, term: &str) -> impl Iterator<Item = (&str, u32)> {
        self.postings
            .get(term)
            .into_iter()
            .flatten()
            .map(|p| (self.doc_ids[p.doc as usize].as_str(), p.tf))
    }

    pub fn idf(&self, term: &str) -> f64 {
        idf(self.doc_count(), self.doc_freq(term))
    }

    /// Mean idf over the indexed vocabulary; 0 for an empty vocabulary.
    pub fn mean_idf(&self) -> f64 {
        if self.postings.is_empty() {
            return 0.0;
        }
        let n = self.doc_count();
        let sum: f64 = self.postings.values().map(|p| idf(n, p.len())).sum();
        sum / self.postings.len() as f64
    }

    fn term_weight(&self, idf: f64, tf: u32, doc_len: u32) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = tf as f64;
        let norm = 1.0 - b + b * doc_len as f64 / self.avg_doc_len;
        idf * (tf * (k1 + 1.0)) / (tf + k1 * norm)
    }

    /// BM25 of one passage for already-analyzed query terms. Repeated query
    /// terms contribute once per occurrence.
    pub fn bm25_score(&self, query_terms: &[String], passage_id: &str) -> Result<f64> {
        let slot = *self
            .doc_slot
            .get(passage_id)
            .ok_or_else(|| Error::UnknownPassage(passage_id.to_string()))?;
        let doc_len = self.doc_lengths[slot as usize];
        let mut score = 0.0;
        for term in query_terms {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            if let Ok(pos) = list.binary_search_by_key(&slot, |p| p.doc) {
                let w = self.term_weight(idf(self.doc_count(), list.len()), list[pos].tf, doc_len);
                score += w;
            }
        }
        Ok(score)
    }

    pub fn search(&self, query_text: &str, k: usize) -> Result<Vec<ScoredHit>> {
        let terms = self.analyze(query_text);
        self.search_terms(&terms, k)
    }

    /// Top-`k` passages with positive score, ties broken by ascending id.
    pub fn search_terms(&self, query_terms: &[String], k: usize) -> Result<Vec<ScoredHit>> {
        if k < 1 {
            return Err(Error::InvalidK);
        }
        let n = self.doc_count();
        let mut scores = vec![0.0f64; n];
        let mut touched = Vec::new();
        for term in query_terms {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let term_idf = idf(n, list.len());
            for p in list {
                let slot = p.doc as usize;
                if scores[slot] == 0.0 {
                    touched.push(slot);
                }
                scores[slot] += self.term_weight(term_idf, p.tf, self.doc_lengths[slot]);
            }
        }
        touched.sort_unstable();
        touched.dedup();
        let candidates = touched
            .into_iter()
            .filter(|&s| scores[s] > 0.0)
            .map(|s| (self.doc_ids[s].as_str(), scores[s]))
            .collect();
        Ok(top_k(candidates, k))
    }

    const MAGIC: &'static [u8; 8] = b"CQBM25IX";
    const VERSION: u32 = 1;

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = SnapshotWriter::create(path.as_ref(), Self::MAGIC, Self::VERSION)?;
        w.str(&self.store_fingerprint)?;
        w.str(&serde_json::to_string(self.analyzer.config())?)?;
        w.f64(self.params.k1)?;
        w.f64(self.params.b)?;
        w.u32(self.doc_ids.len() as u32)?;
        for (id, len) in self.doc_ids.iter().zip(&self.doc_lengths) {
            w.str(id)?;
            w.u32(*len)?;
        }
        w.u64(self.postings.len() as u64)?;
        for (term, list) in &self.postings {
            w.str(term)?;
            w.u32(list.len() as u32)?;
            for p in list {
                w.u32(p.doc)?;
                w.u32(p.tf)?;
            }
        }
        w.finish()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = SnapshotReader::open(path.as_ref(), Self::MAGIC, Self::VERSION)?;
        let store_fingerprint = r.str()?;
        let config: AnalyzerConfig = serde_json::from_str(&r.str()?)
            .map_err(|e| r.bad(&format!("analyzer config: {e}")))?;
        let params = Bm25Params {
            k1: r.f64()?,
            b: r.f64()?,
        };
        let n = r.u32()? as usize;
        if n == 0 {
            return Err(r.bad("empty index"));
        }
        let mut doc_ids = Vec::with_capacity(n);
        let mut doc_slot = HashMap::with_capacity(n);
        let mut doc_lengths = Vec::with_capacity(n);
        let mut total_len = 0u64;
        for slot in 0..n {
            let id = r.str()?;
            let len = r.u32()?;
            if doc_slot.insert(id.clone(), slot as u32).is_some() {
                return Err(r.bad(&format!("duplicate passage id {id}")));
            }
            doc_ids.push(id);
            doc_lengths.push(len);
            total_len += len as u64;
        }
        let terms = r.u64()?;
        let mut postings = BTreeMap::new();
        for _ in 0..terms {
            let term = r.str()?;
            let count = r.u32()? as usize;
            let mut list = Vec::with_capacity(count);
            for _ in 0..count {
                let doc = r.u32()?;
                let tf = r.u32()?;
                if doc as usize >= n {
                    return Err(r.bad("posting references unknown document"));
                }
                list.push(Posting { doc, tf });
            }
            postings.insert(term, list);
        }
        r.expect_eof()?;
        Ok(InvertedIndex {
            analyzer: Analyzer::new(config),
            params,
            doc_ids,
            doc_slot,
            doc_lengths,
            total_len,
            avg_doc_len: total_len as f64 / n as f64,
            postings,
            store_fingerprint,
        })
    }

    /// Structural equality, used to check that rebuilds are bit-identical.
    pub fn same_contents(&self, other: &InvertedIndex) -> bool {
        self.analyzer.config() == other.analyzer.config()
            && self.params.k1.to_bits() == other.params.k1.to_bits()
            && self.params.b.to_bits() == other.params.b.to_bits()
            && self.doc_ids == other.doc_ids
            && self.doc_lengths == other.doc_lengths
            && self.avg_doc_len.to_bits() == other.avg_doc_len.to_bits()
            && self.postings == other.postings
            && self.store_fingerprint == other.store_fingerprint
    }
}
