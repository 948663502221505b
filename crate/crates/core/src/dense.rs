//! Embedding retrieval by exact maximum-inner-product scan.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::Analyzer;
use crate::corpus::PassageStore;
use crate::error::{Error, Result};
use crate::retrieve::{top_k, ScoredHit};
use crate::snapshot::{SnapshotReader, SnapshotWriter};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEmbedding);
        }
        Ok(EmbeddingVector(values))
    }

    pub fn zeros(dimension: usize) -> Self {
        EmbeddingVector(vec![0.0; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f32 {
        dot(&self.0, &other.0)
    }

    pub fn norm(&self) -> f32 {
        self.dot(self).sqrt()
    }
}

fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Text-to-vector model. Neural embedders live behind remote adapters; the
/// crate ships [`ReferenceEmbedder`] so the dense path runs without one.
pub trait Embedder: Send + Sync {
    fn name(&self) -> &str;

    fn dimension(&self) -> usize;

    /// Whether equal inputs always produce equal vectors.
    fn deterministic(&self) -> bool;

    fn embed(&self, text: &str) -> Result<EmbeddingVector>;
}

/// Feature-hashed term frequencies, projected to `dimension` by a seeded
/// random ±1 matrix and L2-normalized. Empty text maps to the zero vector.
#[derive(Debug, Clone)]
pub struct ReferenceEmbedder {
    dimension: usize,
    seed: u64,
    analyzer: Analyzer,
    name: String,
}

const HASH_BUCKETS: u64 = 1 << 20;

impl ReferenceEmbedder {
    pub fn new(dimension: usize, seed: u64) -> Result<Self> {
        if dimension < 8 {
            return Err(Error::Contract(format!(
                "reference embedder needs dimension >= 8, got {dimension}"
            )));
        }
        Ok(ReferenceEmbedder {
            dimension,
            seed,
            analyzer: Analyzer::default(),
            name: format!("reference-d{dimension}-s{seed}"),
        })
    }

    fn bucket(term: &str) -> u64 {
        // FNV-1a; stable across platforms and releases.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in term.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h % HASH_BUCKETS
    }

    fn add_projection_row(&self, bucket: u64, weight: f32, out: &mut [f32]) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(bucket);
        let mut bits = 0u64;
        for (j, slot) in out.iter_mut().enumerate() {
            if j % 64 == 0 {
                bits = rng.gen();
            }
            let sign = if bits & (1 << (j % 64)) != 0 { 1.0 } else { -1.0 };
            *slot += sign * weight;
        }
    }
}

impl Embedder for ReferenceEmbedder {
    fn name(&self) -> &str {
        &self.name
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        let mut tf: BTreeMap<u64, f32> = BTreeMap::new();
        for term in self.analyzer.analyze(text) {
            *tf.entry(Self::bucket(&term)).or_default() += 1.0;
        }
        let mut out = vec![0.0f32; self.dimension];
        for (bucket, weight) in tf {
            self.add_projection_row(bucket, weight, &mut out);
        }
        let norm = dot(&out, &out).sqrt();
        if norm > 0.0 {
            out.iter_mut().for_each(|v| *v /= norm);
        }
        EmbeddingVector::new(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseIndex {
    dimension: usize,
    embedder_name: String,
    ids: Vec<String>,
    // Row-major, `ids.len() * dimension`.
    vectors: Vec<f32>,
}

impl DenseIndex {
    pub fn new(dimension: usize, embedder_name: impl Into<String>) -> Self {
        DenseIndex {
            dimension,
            embedder_name: embedder_name.into(),
            ids: Vec::new(),
            vectors: Vec::new(),
        }
    }

    pub fn insert(&mut self, passage_id: impl Into<String>, vector: &EmbeddingVector) -> Result<()> {
        if vector.dimension() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: vector.dimension(),
            });
        }
        let id = passage_id.into();
        if self.ids.contains(&id) {
            return Err(Error::DuplicatePassage(id));
        }
        self.ids.push(id);
        self.vectors.extend_from_slice(vector.values());
        Ok(())
    }

    /// Embeds every passage of the store in order.
    pub fn build(store: &PassageStore, embedder: &dyn Embedder) -> Result<Self> {
        let mut index = DenseIndex::new(embedder.dimension(), embedder.name());
        for passage in store.iter() {
            let v = embedder.embed(&passage.text).map_err(|e| Error::Embedding {
                passage_id: passage.id.clone(),
                message: e.to_string(),
            })?;
            if v.dimension() != embedder.dimension() {
                return Err(Error::Embedding {
                    passage_id: passage.id.clone(),
                    message: format!(
                        "embedder returned dimension {} (declared {})",
                        v.dimension(),
                        embedder.dimension()
                    ),
                });
            }
            index.ids.push(passage.id.clone());
            index.vectors.extend_from_slice(v.values());
        }
        Ok(index)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn embedder_name(&self) -> &str {
        &self.embedder_name
    }

    pub fn passage_ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, passage_id: &str) -> Option<&[f32]> {
        let i = self.ids.iter().position(|id| id == passage_id)?;
        Some(self.row(i))
    }

    fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn search(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<ScoredHit>> {
        if query.dimension() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: query.dimension(),
            });
        }
        if k < 1 {
            return Err(Error::InvalidK);
        }
        let candidates = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), dot(query.values(), self.row(i)) as f64))
            .collect();
        Ok(top_k(candidates, k))
    }

    const MAGIC: &'static [u8; 8] = b"CQDENSE\0";
    const VERSION: u32 = 1;

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = SnapshotWriter::create(path.as_ref(), Self::MAGIC, Self::VERSION)?;
        w.u32(self.dimension as u32)?;
        w.u32(self.ids.len() as u32)?;
        w.str(&self.embedder_name)?;
        for (i, id) in self.ids.iter().enumerate() {
            w.str(id)?;
            for v in self.row(i) {
                w.f32(*v)?;
            }
        }
        w.finish()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = SnapshotReader::open(path.as_ref(), Self::MAGIC, Self::VERSION)?;
        let dimension = r.u32()? as usize;
        let count = r.u32()? as usize;
        let mut index = DenseIndex::new(dimension, r.str()?);
        for _ in 0..count {
            let id = r.str()?;
            let mut values = Vec::with_capacity(dimension);
            for _ in 0..dimension {
                values.push(r.f32()?);
            }
            let v = EmbeddingVector::new(values).map_err(|e| r.bad(&e.to_string()))?;
            index.insert(id, &v).map_err(|e| r.bad(&e.to_string()))?;
        }
        r.expect_eof()?;
        Ok(index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Passage;

    fn store() -> PassageStore {
        PassageStore::new(vec![
            Passage::new("a", "Melatonin regulates the sleep cycle.").unwrap(),
            Passage::new("b", "Caffeine blocks adenosine receptors.").unwrap(),
            Passage::new("c", "Naps improve afternoon alertness.").unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn embedding_is_deterministic_and_normalized() {
        let e = ReferenceEmbedder::new(64, 7).unwrap();
        let a = e.embed("deep sleep stages").unwrap();
        let b = e.embed("deep sleep stages").unwrap();
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-5);
        let other_seed = ReferenceEmbedder::new(64, 8).unwrap().embed("deep sleep stages").unwrap();
        assert_ne!(a, other_seed);
    }

    #[test]
    fn empty_text_is_the_zero_vector() {
        let e = ReferenceEmbedder::new(16, 1).unwrap();
        assert_eq!(e.embed("").unwrap(), EmbeddingVector::zeros(16));
        assert_eq!(e.embed("the a an").unwrap(), EmbeddingVector::zeros(16));
    }

    #[test]
    fn small_dimension_is_rejected() {
        assert!(ReferenceEmbedder::new(7, 0).is_err());
    }

    #[test]
    fn non_finite_values_rejected() {
        assert!(matches!(
            EmbeddingVector::new(vec![1.0, f32::NAN]),
            Err(Error::NonFiniteEmbedding)
        ));
    }

    #[test]
    fn builds_one_vector_per_passage() {
        let e = ReferenceEmbedder::new(32, 3).unwrap();
        let idx = DenseIndex::build(&store(), &e).unwrap();
        assert_eq!(idx.len(), 3);
        assert_eq!(idx.dimension(), 32);
        assert_eq!(idx, DenseIndex::build(&store(), &e).unwrap());
    }

    #[test]
    fn stored_vector_query_ranks_itself_first() {
        let e = ReferenceEmbedder::new(128, 3).unwrap();
        let idx = DenseIndex::build(&store(), &e).unwrap();
        let q = EmbeddingVector::new(idx.get("b").unwrap().to_vec()).unwrap();
        let hits = idx.search(&q, 10).unwrap();
        assert_eq!(hits.len(), 3);
        assert_eq!(hits[0].passage_id, "b");
        assert!(hits.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let e = ReferenceEmbedder::new(32, 3).unwrap();
        let idx = DenseIndex::build(&store(), &e).unwrap();
        assert!(matches!(
            idx.search(&EmbeddingVector::zeros(16), 1),
            Err(Error::DimensionMismatch { expected: 32, actual: 16 })
        ));
    }

    struct Failing;

    impl Embedder for Failing {
        fn name(&self) -> &str {
            "failing"
        }
        fn dimension(&self) -> usize {
            8
        }
        fn deterministic(&self) -> bool {
            true
        }
        fn embed(&self, text: &str) -> Result<EmbeddingVector> {
            if text.contains("Caffeine") {
                Err(Error::Contract("boom".into()))
            } else {
                Ok(EmbeddingVector::zeros(8))
            }
        }
    }

    #[test]
    fn embedder_failure_names_passage() {
        match DenseIndex::build(&store(), &Failing) {
            Err(Error::Embedding { passage_id, .. }) => assert_eq!(passage_id, "b"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn snapshot_round_trip_is_exact() {
        let e = ReferenceEmbedder::new(24, 11).unwrap();
        let idx = DenseIndex::build(&store(), &e).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dense.idx");
        idx.save(&path).unwrap();
        let back = DenseIndex::load(&path).unwrap();
        assert_eq!(idx, back);
        assert_eq!(back.embedder_name(), "reference-d24-s11");
    }
}
