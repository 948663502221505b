use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Provenance, QALabel, Variant};
use crate::error::{Error, Result};
use crate::eval::token_f1;
use crate::text::normalize_text;

use super::variant_dataset;

/// Rewrites closer than this to the original are near-copies.
pub const MAX_SIMILARITY: f64 = 0.95;
/// Rewrites further than this from the original are off topic.
pub const MIN_SIMILARITY: f64 = 0.20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewriteKind {
    Paraphrase,
    Translate,
}

/// External text rewriter (paraphraser or translator). Returns non-empty
/// text or an error.
pub trait RewriteClient: Send + Sync {
    fn name(&self) -> &str;

    fn kind(&self) -> RewriteKind;

    fn rewrite(&self, text: &str) -> Result<String>;
}

/// Fixed lookup table; unknown inputs fail.
#[derive(Debug, Clone)]
pub struct TableRewriter {
    name: String,
    kind: RewriteKind,
    table: HashMap<String, String>,
}

impl TableRewriter {
    pub fn new(name: impl Into<String>, kind: RewriteKind, table: HashMap<String, String>) -> Self {
        TableRewriter {
            name: name.into(),
            kind,
            table,
        }
    }
}

impl RewriteClient for TableRewriter {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> RewriteKind {
        self.kind
    }

    fn rewrite(&self, text: &str) -> Result<String> {
        self.table.get(text).cloned().ok_or_else(|| Error::Adapter {
            adapter: self.name.clone(),
            message: format!("no rewrite for {text:?}"),
        })
    }
}

/// Closure-backed client, handy for stubs.
pub struct FnRewriter<F> {
    name: String,
    kind: RewriteKind,
    f: F,
}

impl<F> FnRewriter<F>
where
    F: Fn(&str) -> Result<String> + Send + Sync,
{
    pub fn new(name: impl Into<String>, kind: RewriteKind, f: F) -> Self {
        FnRewriter {
            name: name.into(),
            kind,
            f,
        }
    }
}

impl<F> RewriteClient for FnRewriter<F>
where
    F: Fn(&str) -> Result<String> + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> RewriteKind {
        self.kind
    }

    fn rewrite(&self, text: &str) -> Result<String> {
        (self.f)(text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum SkipReason {
    ClientFailed { message: String },
    ForwardFailed { message: String },
    BackwardFailed { message: String },
    EmptyOutput,
    TooSimilar { similarity: f64 },
    OffTopic { similarity: f64 },
}

impl SkipReason {
    pub fn code(&self) -> &'static str {
        match self {
            SkipReason::ClientFailed { .. } => "client_failed",
            SkipReason::ForwardFailed { .. } => "forward_failed",
            SkipReason::BackwardFailed { .. } => "backward_failed",
            SkipReason::EmptyOutput => "empty_output",
            SkipReason::TooSimilar { .. } => "too_similar",
            SkipReason::OffTopic { .. } => "off_topic",
        }
    }
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SkipReason::ClientFailed { message }
            | SkipReason::ForwardFailed { message }
            | SkipReason::BackwardFailed { message } => write!(f, "{}: {message}", self.code()),
            SkipReason::TooSimilar { similarity } | SkipReason::OffTopic { similarity } => {
                write!(f, "{} (similarity {similarity:.3})", self.code())
            }
            SkipReason::EmptyOutput => f.write_str(self.code()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RewriteOutcome {
    Accepted {
        label: QALabel,
        provenance: Provenance,
    },
    Skipped(SkipReason),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Skipped {
    pub qid: String,
    #[serde(flatten)]
    pub reason: SkipReason,
}

/// Token F1 between two questions under answer normalization.
pub fn question_similarity(original: &str, rewrite: &str) -> f64 {
    token_f1(rewrite, &[original]).expect("one gold is present")
}

fn guard(
    label: &QALabel,
    origin: &Provenance,
    rewrite: &str,
    method: Variant,
) -> RewriteOutcome {
    let rewrite = normalize_text(rewrite);
    if rewrite.is_empty() {
        return RewriteOutcome::Skipped(SkipReason::EmptyOutput);
    }
    let similarity = question_similarity(&label.question, &rewrite);
    if similarity > MAX_SIMILARITY {
        return RewriteOutcome::Skipped(SkipReason::TooSimilar { similarity });
    }
    if similarity < MIN_SIMILARITY {
        return RewriteOutcome::Skipped(SkipReason::OffTopic { similarity });
    }
    let mut out = label.clone();
    out.question = rewrite;
    out.qid = format!("{}{}", label.qid, method.qid_suffix().unwrap_or_default());
    RewriteOutcome::Accepted {
        label: out,
        provenance: Provenance {
            origin_qid: origin.origin_qid.clone(),
            method,
        },
    }
}

fn require_kind(client: &dyn RewriteClient, kind: RewriteKind) -> Result<()> {
    if client.kind() != kind {
        return Err(Error::Contract(format!(
            "client {} is a {:?} client, expected {:?}",
            client.name(),
            client.kind(),
            kind
        )));
    }
    Ok(())
}

pub fn paraphrase_question(
    label: &QALabel,
    origin: &Provenance,
    client: &dyn RewriteClient,
) -> Result<RewriteOutcome> {
    require_kind(client, RewriteKind::Paraphrase)?;
    Ok(match client.rewrite(&label.question) {
        Ok(text) => guard(label, origin, &text, Variant::Paraphrase),
        Err(e) => RewriteOutcome::Skipped(SkipReason::ClientFailed {
            message: e.to_string(),
        }),
    })
}

/// Question -> pivot language -> back, then the same acceptance guard as
/// paraphrasing.
pub fn back_translate_question(
    label: &QALabel,
    origin: &Provenance,
    forward: &dyn RewriteClient,
    backward: &dyn RewriteClient,
) -> Result<RewriteOutcome> {
    require_kind(forward, RewriteKind::Translate)?;
    require_kind(backward, RewriteKind::Translate)?;
    let pivot = match forward.rewrite(&label.question) {
        Ok(t) => t,
        Err(e) => {
            return Ok(RewriteOutcome::Skipped(SkipReason::ForwardFailed {
                message: e.to_string(),
            }))
        }
    };
    Ok(match backward.rewrite(&pivot) {
        Ok(text) => guard(label, origin, &text, Variant::BackTranslation),
        Err(e) => RewriteOutcome::Skipped(SkipReason::BackwardFailed {
            message: e.to_string(),
        }),
    })
}

fn collect(
    dataset: &Dataset,
    variant: Variant,
    mut step: impl FnMut(&QALabel, &Provenance) -> Result<RewriteOutcome>,
) -> Result<(Dataset, Vec<Skipped>)> {
    let mut items = Vec::new();
    let mut skipped = Vec::new();
    for (label, prov) in dataset.iter() {
        match step(label, prov)? {
            RewriteOutcome::Accepted { label, provenance } => items.push((label, provenance)),
            RewriteOutcome::Skipped(reason) => {
                tracing::info!(qid = %label.qid, "skipped: {reason}");
                skipped.push(Skipped {
                    qid: label.qid.clone(),
                    reason,
                });
            }
        }
    }
    Ok((variant_dataset(dataset, variant, items)?, skipped))
}

pub fn apply_paraphrase(
    dataset: &Dataset,
    client: &dyn RewriteClient,
) -> Result<(Dataset, Vec<Skipped>)> {
    collect(dataset, Variant::Paraphrase, |l, p| paraphrase_question(l, p, client))
}

pub fn apply_back_translation(
    dataset: &Dataset,
    forward: &dyn RewriteClient,
    backward: &dyn RewriteClient,
) -> Result<(Dataset, Vec<Skipped>)> {
    collect(dataset, Variant::BackTranslation, |l, p| {
        back_translate_question(l, p, forward, backward)
    })
}
