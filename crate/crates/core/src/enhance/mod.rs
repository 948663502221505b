//! Data-centric enhancement of QA label sets: hard-negative mining, question
//! reformulation, augmentation merges and continuous fine-tuning plans.
//!
//! No enhancement ever touches a record's gold passage or answers.

mod merge;
mod negatives;
mod plan;
mod reformulate;
mod substitute;

pub use merge::{merge_augment, question_key};
pub use negatives::{mine_hard_negatives, HARD_NEGATIVE_MARGIN};
pub use plan::{plan_continuous_finetune, Stage, TrainingPlan};
pub use reformulate::{
    apply_back_translation, apply_paraphrase, back_translate_question, paraphrase_question,
    question_similarity, FnRewriter, RewriteClient, RewriteKind, RewriteOutcome, SkipReason,
    Skipped, TableRewriter, MAX_SIMILARITY, MIN_SIMILARITY,
};
pub use substitute::{apply_word_substitution, substitute_words, Substitution, SynonymLexicon};

use crate::corpus::{Dataset, Provenance, QALabel, Variant};
use crate::error::Result;

/// Builds a single-method dataset from enhanced records.
pub(crate) fn variant_dataset(
    origin: &Dataset,
    variant: Variant,
    items: Vec<(QALabel, Provenance)>,
) -> Result<Dataset> {
    let (records, provenance) = items.into_iter().unzip();
    Dataset::new(
        format!("{}-{}", origin.name, variant),
        variant,
        records,
        provenance,
        origin.store_fingerprint(),
    )
}
