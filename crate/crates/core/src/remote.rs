//! HTTP JSON adapters for externally hosted models.
//!
//! Wire formats:
//!
//! * reader: `{"question", "passage"}` -> `{"start", "end", "score"}` or
//!   `{"no_answer": true}`; offsets are characters into the given passage.
//! * embedder: `{"text"}` -> `{"embedding": [f32, ...]}`
//! * rewriter: `{"text", "task": "paraphrase"|"translate", "target_lang"?}`
//!   -> `{"text"}`
//!
//! Transport errors and 5xx responses are retried; 4xx responses are not.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corpus::Passage;
use crate::dense::{Embedder, EmbeddingVector};
use crate::enhance::{RewriteClient, RewriteKind};
use crate::error::{Error, Result};
use crate::reader::{Reader, SpanPrediction, DEFAULT_MAX_ANSWER_TOKENS};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterConfig {
    pub url: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
}

fn default_timeout_ms() -> u64 {
    10_000
}

fn default_retries() -> u32 {
    2
}

impl AdapterConfig {
    pub fn new(url: impl Into<String>) -> Self {
        AdapterConfig {
            url: url.into(),
            timeout_ms: default_timeout_ms(),
            retries: default_retries(),
        }
    }
}

#[derive(Debug, Clone)]
struct HttpJson {
    name: String,
    config: AdapterConfig,
    agent: ureq::Agent,
}

impl HttpJson {
    fn new(name: String, config: AdapterConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build();
        HttpJson {
            name,
            config,
            agent,
        }
    }

    fn fail(&self, message: impl Into<String>) -> Error {
        Error::Adapter {
            adapter: self.name.clone(),
            message: message.into(),
        }
    }

    fn post(&self, body: &Value) -> Result<Value> {
        let mut last = None;
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(50 * u64::from(attempt)));
            }
            match self.agent.post(&self.config.url).send_json(body) {
                Ok(resp) => {
                    return resp
                        .into_json::<Value>()
                        .map_err(|e| self.fail(format!("invalid response body: {e}")))
                }
                Err(ureq::Error::Status(code, resp)) if code < 500 => {
                    let text = resp.into_string().unwrap_or_default();
                    return Err(self.fail(format!("HTTP {code}: {text}")));
                }
                Err(e) => last = Some(e.to_string()),
            }
        }
        Err(self.fail(format!(
            "gave up after {} attempts: {}",
            self.config.retries + 1,
            last.unwrap_or_default()
        )))
    }
}

#[derive(Debug, Clone)]
pub struct RemoteReader {
    http: HttpJson,
    max_answer_tokens: usize,
}

impl RemoteReader {
    pub fn new(name: impl Into<String>, config: AdapterConfig) -> Self {
        RemoteReader {
            http: HttpJson::new(name.into(), config),
            max_answer_tokens: DEFAULT_MAX_ANSWER_TOKENS,
        }
    }

    pub fn with_max_answer_tokens(mut self, n: usize) -> Self {
        self.max_answer_tokens = n;
        self
    }
}

#[derive(Deserialize)]
struct ReaderResponse {
    #[serde(default)]
    no_answer: bool,
    start: Option<usize>,
    end: Option<usize>,
    score: Option<f64>,
}

impl Reader for RemoteReader {
    fn name(&self) -> &str {
        &self.http.name
    }

    fn max_answer_tokens(&self) -> usize {
        self.max_answer_tokens
    }

    fn read(&self, question: &str, passage: &Passage) -> Result<Option<SpanPrediction>> {
        let body = json!({ "question": question, "passage": passage.text });
        let resp: ReaderResponse = serde_json::from_value(self.http.post(&body)?)
            .map_err(|e| self.http.fail(format!("unexpected reader response: {e}")))?;
        if resp.no_answer {
            return Ok(None);
        }
        match (resp.start, resp.end, resp.score) {
            (Some(start_char), Some(end_char), Some(score)) => Ok(Some(SpanPrediction {
                start_char,
                end_char,
                score,
            })),
            _ => Err(self.http.fail("reader response lacks start/end/score")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    http: HttpJson,
    dimension: usize,
    deterministic: bool,
}

impl RemoteEmbedder {
    pub fn new(name: impl Into<String>, config: AdapterConfig, dimension: usize) -> Self {
        RemoteEmbedder {
            http: HttpJson::new(name.into(), config),
            dimension,
            deterministic: true,
        }
    }

    pub fn nondeterministic(mut self) -> Self {
        self.deterministic = false;
        self
    }
}

#[derive(Deserialize)]
struct EmbedResponse {
    embedding: Vec<f32>,
}

impl Embedder for RemoteEmbedder {
    fn name(&self) -> &str {
        &self.http.name
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn deterministic(&self) -> bool {
        self.deterministic
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        let resp: EmbedResponse = serde_json::from_value(self.http.post(&json!({ "text": text }))?)
            .map_err(|e| self.http.fail(format!("unexpected embedder response: {e}")))?;
        if resp.embedding.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: resp.embedding.len(),
            });
        }
        EmbeddingVector::new(resp.embedding)
    }
}

#[derive(Debug, Clone)]
pub struct RemoteRewriter {
    http: HttpJson,
    kind: RewriteKind,
    target_lang: Option<String>,
}

impl RemoteRewriter {
    pub fn paraphraser(name: impl Into<String>, config: AdapterConfig) -> Self {
        RemoteRewriter {
            http: HttpJson::new(name.into(), config),
            kind: RewriteKind::Paraphrase,
            target_lang: None,
        }
    }

    pub fn translator(
        name: impl Into<String>,
        config: AdapterConfig,
        target_lang: impl Into<String>,
    ) -> Self {
        RemoteRewriter {
            http: HttpJson::new(name.into(), config),
            kind: RewriteKind::Translate,
            target_lang: Some(target_lang.into()),
        }
    }
}

#[derive(Deserialize)]
struct RewriteResponse {
    text: String,
}

impl RewriteClient for RemoteRewriter {
    fn name(&self) -> &str {
        &self.http.name
    }

    fn kind(&self) -> RewriteKind {
        self.kind
    }

    fn rewrite(&self, text: &str) -> Result<String> {
        let mut body = json!({
            "text": text,
            "task": match self.kind {
                RewriteKind::Paraphrase => "paraphrase",
                RewriteKind::Translate => "translate",
            },
        });
        if let Some(lang) = &self.target_lang {
            body["target_lang"] = json!(lang);
        }
        let resp: RewriteResponse = serde_json::from_value(self.http.post(&body)?)
            .map_err(|e| self.http.fail(format!("unexpected rewrite response: {e}")))?;
        if resp.text.trim().is_empty() {
            return Err(self.http.fail("empty rewrite"));
        }
        Ok(resp.text)
    }
}
