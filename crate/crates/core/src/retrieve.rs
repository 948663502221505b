//! The retriever phase: ranked hits and the retriever abstraction shared by
//! the sparse and dense indexes.

use std::cmp::Ordering;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dense::{DenseIndex, Embedder};
use crate::error::Result;
use crate::sparse::InvertedIndex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredHit {
    pub passage_id: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

/// Descending score, then ascending passage id.
pub(crate) fn rank_order(a: (&str, f64), b: (&str, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

/// Sorts `(id, score)` candidates into ranked hits, keeping the best `k`.
pub(crate) fn top_k(mut candidates: Vec<(&str, f64)>, k: usize) -> Vec<ScoredHit> {
    if candidates.len() > k {
        candidates.select_nth_unstable_by(k - 1, |a, b| rank_order(*a, *b));
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(|a, b| rank_order(*a, *b));
    candidates
        .into_iter()
        .enumerate()
        .map(|(i, (id, score))| ScoredHit {
            passage_id: id.to_string(),
            score,
            rank: i + 1,
        })
        .collect()
}

pub trait Retriever: Send + Sync {
    fn name(&self) -> &str;

    fn retrieve(&self, question: &str, k: usize) -> Result<Vec<ScoredHit>>;
}

#[derive(Debug, Clone)]
pub struct Bm25Retriever {
    index: Arc<InvertedIndex>,
}

impl Bm25Retriever {
    pub fn new(index: Arc<InvertedIndex>) -> Self {
        Bm25Retriever { index }
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }
}

impl Retriever for Bm25Retriever {
    fn name(&self) -> &str {
        "bm25"
    }

    fn retrieve(&self, question: &str, k: usize) -> Result<Vec<ScoredHit>> {
        self.index.search(question, k)
    }
}

pub struct DenseRetriever {
    index: Arc<DenseIndex>,
    embedder: Arc<dyn Embedder>,
    name: String,
}

impl DenseRetriever {
    pub fn new(index: Arc<DenseIndex>, embedder: Arc<dyn Embedder>) -> Self {
        let name = format!("dense:{}", embedder.name());
        DenseRetriever {
            index,
            embedder,
            name,
        }
    }
}

impl Retriever for DenseRetriever {
    fn name(&self) -> &str {
        &self.name
    }

    fn retrieve(&self, question: &str, k: usize) -> Result<Vec<ScoredHit>> {
        let query = self.embedder.embed(question)?;
        self.index.search(&query, k)
    }
}
