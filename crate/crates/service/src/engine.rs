//! A loaded, immutable retrieval + reading stack.

use std::sync::Arc;
use std::time::Instant;

use coachqa_core::analysis::AnalyzerConfig;
use coachqa_core::corpus::{load_passages, PassageStore};
use coachqa_core::dense::{DenseIndex, Embedder, ReferenceEmbedder};
use coachqa_core::reader::{pipeline_answer, AnswerSpan, Reader, ReferenceReader};
use coachqa_core::remote::{RemoteEmbedder, RemoteReader};
use coachqa_core::sparse::InvertedIndex;
use coachqa_core::{Bm25Retriever, DenseRetriever, Retriever};
use serde::{Deserialize, Serialize};

use crate::config::{Config, ReaderKind, RetrieverKind};
use crate::ServiceError;

/// One retrieved passage as shown to a coach.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitView {
    pub passage_id: String,
    pub title: Option<String>,
    pub text: String,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answered {
    pub answer: Option<AnswerSpan>,
    pub hits: Vec<HitView>,
    pub latency_ms: u64,
    pub system_version: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub struct Engine {
    version: String,
    store: Arc<PassageStore>,
    retriever: Box<dyn Retriever>,
    reader: Box<dyn Reader>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("version", &self.version)
            .field("retriever", &self.retriever.name())
            .field("reader", &self.reader.name())
            .finish()
    }
}

impl Engine {
    pub fn new(store: Arc<PassageStore>, retriever: Box<dyn Retriever>, reader: Box<dyn Reader>) -> Self {
        let version = format!(
            "{}/{}/{}",
            store.fingerprint(),
            retriever.name(),
            reader.name()
        );
        Engine {
            version,
            store,
            retriever,
            reader,
        }
    }

    /// Loads the passages named by `config` and the index snapshots in
    /// `index_dir` when they still match, rebuilding whatever does not.
    pub fn from_config(config: &Config) -> Result<Self, ServiceError> {
        let store = Arc::new(load_passages(&config.passages)?);
        Self::with_store(config, store)
    }

    pub fn with_store(config: &Config, store: Arc<PassageStore>) -> Result<Self, ServiceError> {
        let sparse = Arc::new(sparse_index(config, &store)?);
        let reader: Box<dyn Reader> = match config.reader {
            ReaderKind::Reference => Box::new(ReferenceReader::from_index(&sparse, config.max_answer_tokens)),
            ReaderKind::Remote => {
                let url = config.reader_url.as_deref().unwrap_or_default();
                Box::new(RemoteReader::new("remote-reader", config.adapter(url)).with_max_answer_tokens(config.max_answer_tokens))
            }
        };
        let retriever: Box<dyn Retriever> = match config.retriever {
            RetrieverKind::Sparse => Box::new(Bm25Retriever::new(sparse)),
            RetrieverKind::Dense => {
                let embedder = embedder(config)?;
                let dense = Arc::new(dense_index(config, &store, embedder.as_ref())?);
                Box::new(DenseRetriever::new(dense, embedder))
            }
        };
        Ok(Engine::new(store, retriever, reader))
    }

    /// Identifies the corpus and models serving a response.
    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn store(&self) -> &Arc<PassageStore> {
        &self.store
    }

    pub fn retriever(&self) -> &dyn Retriever {
        self.retriever.as_ref()
    }

    pub fn reader(&self) -> &dyn Reader {
        self.reader.as_ref()
    }

    /// Retrieval followed by reading; the one code path behind both the
    /// HTTP `ask` endpoint and the `ask` subcommand.
    pub fn ask(&self, question: &str, k: usize) -> Result<Answered, ServiceError> {
        if question.trim().is_empty() {
            return Err(ServiceError::BadRequest("question must not be empty".into()));
        }
        if !(1..=50).contains(&k) {
            return Err(ServiceError::BadRequest(format!("k must be within 1..=50, got {k}")));
        }
        let started = Instant::now();
        let hits = self.retriever.retrieve(question, k)?;
        let result = pipeline_answer(question, &hits, self.reader.as_ref(), &self.store)?;
        let hits = hits
            .into_iter()
            .map(|h| {
                let p = self.store.get(&h.passage_id).ok_or_else(|| {
                    ServiceError::Internal(format!("retriever returned unknown passage {}", h.passage_id))
                })?;
                Ok(HitView {
                    passage_id: h.passage_id,
                    title: p.title.clone(),
                    text: p.text.clone(),
                    score: h.score,
                    rank: h.rank,
                })
            })
            .collect::<Result<Vec<_>, ServiceError>>()?;
        Ok(Answered {
            answer: result.answer,
            hits,
            latency_ms: started.elapsed().as_millis() as u64,
            system_version: self.version.clone(),
            warnings: result.warnings,
        })
    }
}

fn embedder(config: &Config) -> Result<Arc<dyn Embedder>, ServiceError> {
    Ok(match &config.embedder_url {
        Some(url) => Arc::new(RemoteEmbedder::new("remote-embedder", config.adapter(url), config.dense_dim)),
        None => Arc::new(ReferenceEmbedder::new(config.dense_dim, config.dense_seed)?),
    })
}

/// Reuses the snapshot when it was built from this corpus with these
/// parameters.
pub fn sparse_index(config: &Config, store: &PassageStore) -> Result<InvertedIndex, ServiceError> {
    let path = config.sparse_snapshot_path();
    if path.exists() {
        match InvertedIndex::load(&path) {
            Ok(index)
                if index.store_fingerprint() == store.fingerprint()
                    && index.params() == config.bm25_params()
                    && index.analyzer().config() == &AnalyzerConfig::default() =>
            {
                return Ok(index)
            }
            Ok(_) => tracing::info!(path = %path.display(), "sparse snapshot is stale, rebuilding"),
            Err(e) => tracing::warn!(path = %path.display(), "ignoring unreadable sparse snapshot: {e}"),
        }
    }
    Ok(InvertedIndex::build(store, AnalyzerConfig::default(), config.bm25_params())?)
}

pub fn dense_index(config: &Config, store: &PassageStore, embedder: &dyn Embedder) -> Result<DenseIndex, ServiceError> {
    let path = config.dense_snapshot_path();
    if path.exists() && embedder.deterministic() {
        match DenseIndex::load(&path) {
            Ok(index)
                if index.embedder_name() == embedder.name()
                    && index.dimension() == embedder.dimension()
                    && index.passage_ids().iter().eq(store.iter().map(|p| &p.id)) =>
            {
                return Ok(index)
            }
            Ok(_) => tracing::info!(path = %path.display(), "dense snapshot is stale, rebuilding"),
            Err(e) => tracing::warn!(path = %path.display(), "ignoring unreadable dense snapshot: {e}"),
        }
    }
    Ok(DenseIndex::build(store, embedder)?)
}

/// Builds the configured indexes and writes their snapshots.
pub fn build_snapshots(config: &Config) -> Result<Vec<std::path::PathBuf>, ServiceError> {
    let store = load_passages(&config.passages)?;
    std::fs::create_dir_all(&config.index_dir)
        .map_err(|e| ServiceError::Internal(format!("{}: {e}", config.index_dir.display())))?;
    let mut written = Vec::new();
    let sparse = InvertedIndex::build(&store, AnalyzerConfig::default(), config.bm25_params())?;
    sparse.save(config.sparse_snapshot_path())?;
    written.push(config.sparse_snapshot_path());
    if config.retriever == RetrieverKind::Dense {
        let embedder = embedder(config)?;
        let dense = DenseIndex::build(&store, embedder.as_ref())?;
        dense.save(config.dense_snapshot_path())?;
        written.push(config.dense_snapshot_path());
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use coachqa_core::fixtures::planted;

    #[test]
    fn snapshots_are_reused_only_when_fresh() {
        let dir = tempfile::tempdir().unwrap();
        let f = planted(5, 3);
        let (passages, _) = f.write_to(dir.path()).unwrap();
        let config = Config {
            passages,
            index_dir: dir.path().join("index"),
            retriever: RetrieverKind::Dense,
            dense_dim: 32,
            ..Config::default()
        };
        let written = build_snapshots(&config).unwrap();
        assert_eq!(written.len(), 2);
        let engine = Engine::from_config(&config).unwrap();
        assert_eq!(engine.retriever().name(), "dense:reference-d32-s0");

        let other = Config {
            bm25_k1: 1.2,
            ..config.clone()
        };
        let fresh = sparse_index(&other, &f.store).unwrap();
        assert_eq!(fresh.params().k1, 1.2);
    }

    #[test]
    fn ask_validates_input() {
        let f = planted(3, 2);
        let engine = Engine::with_store(&Config::default(), Arc::new(f.store.clone())).unwrap();
        assert!(matches!(engine.ask("  ", 5), Err(ServiceError::BadRequest(_))));
        assert!(matches!(engine.ask("what", 0), Err(ServiceError::BadRequest(_))));
        assert!(matches!(engine.ask("what", 51), Err(ServiceError::BadRequest(_))));
        let label = &f.dataset.records()[1];
        let a = engine.ask(&label.question, 3).unwrap();
        assert_eq!(a.answer.unwrap().text, label.answers[0]);
        assert!(a.hits.len() <= 3);
    }
}
