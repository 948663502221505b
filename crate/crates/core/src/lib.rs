//! Extractive question answering over a domain passage corpus.
//!
//! A question is answered in two phases: a retriever ranks passages (BM25 over
//! an inverted index, or exact inner-product search over embeddings) and a
//! reader extracts an answer span from the top hits. Around that pipeline the
//! crate provides dataset loading and validation, training-file export,
//! dataset enhancement (hard negatives, question reformulation, augmentation
//! merges, continuous fine-tuning plans) and EM / token-F1 / recall metrics.

pub mod analysis;
pub mod corpus;
pub mod dense;
pub mod enhance;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod reader;
pub mod remote;
pub mod retrieve;
mod snapshot;
pub mod sparse;
pub mod text;

pub use analysis::{Analyzer, AnalyzerConfig};
pub use corpus::{
    export_training_file, load_labels, load_passages, CharSpan, Dataset, Passage, PassageStore,
    Provenance, QALabel, TrainingRecord, Variant,
};
pub use dense::{DenseIndex, Embedder, EmbeddingVector, ReferenceEmbedder};
pub use error::{Error, Result};
pub use eval::{exact_match, normalize_answer, relative_improvement, token_f1, MetricsReport};
pub use reader::{pipeline_answer, AnswerSpan, Reader, ReferenceReader};
pub use retrieve::{Bm25Retriever, DenseRetriever, Retriever, ScoredHit};
pub use sparse::{Bm25Params, InvertedIndex};
