//! Service and CLI configuration.
//!
//! Values are resolved in this order, later sources winning: built-in
//! defaults, the TOML config file, `COACHQA_*` environment variables, and
//! finally explicit command-line flags applied by the caller.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use coachqa_core::remote::AdapterConfig;
use coachqa_core::sparse::Bm25Params;
use serde::{Deserialize, Serialize};

use crate::ServiceError;

pub const ENV_PREFIX: &str = "COACHQA_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrieverKind {
    Sparse,
    Dense,
}

impl FromStr for RetrieverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sparse" | "bm25" => Ok(RetrieverKind::Sparse),
            "dense" => Ok(RetrieverKind::Dense),
            other => Err(format!("unknown retriever {other:?} (expected sparse or dense)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReaderKind {
    Reference,
    Remote,
}

impl FromStr for ReaderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "reference" => Ok(ReaderKind::Reference),
            "remote" => Ok(ReaderKind::Remote),
            other => Err(format!("unknown reader {other:?} (expected reference or remote)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub passages: PathBuf,
    pub labels: Option<PathBuf>,
    pub index_dir: PathBuf,
    pub log_dir: PathBuf,

    pub retriever: RetrieverKind,
    pub k: usize,
    pub bm25_k1: f64,
    pub bm25_b: f64,
    pub dense_dim: usize,
    pub dense_seed: u64,
    pub embedder_url: Option<String>,

    pub reader: ReaderKind,
    pub reader_url: Option<String>,
    pub max_answer_tokens: usize,

    pub paraphrase_url: Option<String>,
    pub translate_url: Option<String>,
    pub pivot_lang: String,

    pub adapter_timeout_ms: u64,
    pub adapter_retries: u32,

    pub host: String,
    pub port: u16,
    pub api_token: Option<String>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            passages: PathBuf::from("data/passages.jsonl"),
            labels: None,
            index_dir: PathBuf::from("index"),
            log_dir: PathBuf::from("logs"),
            retriever: RetrieverKind::Sparse,
            k: 5,
            bm25_k1: 0.9,
            bm25_b: 0.4,
            dense_dim: 256,
            dense_seed: 0,
            embedder_url: None,
            reader: ReaderKind::Reference,
            reader_url: None,
            max_answer_tokens: coachqa_core::reader::DEFAULT_MAX_ANSWER_TOKENS,
            paraphrase_url: None,
            translate_url: None,
            pivot_lang: "de".to_string(),
            adapter_timeout_ms: 10_000,
            adapter_retries: 2,
            host: "127.0.0.1".to_string(),
            port: 8080,
            api_token: None,
        }
    }
}

impl Config {
    /// Defaults, then `path` (when given), then the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ServiceError> {
        let mut config = match path {
            Some(p) => Self::from_file(p)?,
            None => Config::default(),
        };
        config.apply_env(std::env::vars())?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, ServiceError> {
        let body = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let mut config: Config =
            toml::from_str(&body).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        // Relative paths in a config file are relative to the file itself.
        if let Some(base) = path.parent() {
            config.rebase(base);
        }
        Ok(config)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.passages);
        fix(&mut self.index_dir);
        fix(&mut self.log_dir);
        if let Some(l) = &mut self.labels {
            fix(l);
        }
    }

    /// Applies every `COACHQA_<KEY>` pair; unknown keys are errors so typos
    /// do not go unnoticed.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), ServiceError> {
        for (name, value) in vars {
            if let Some(key) = name.strip_prefix(ENV_PREFIX) {
                if key == "CONFIG" || key == "LOG" {
                    continue;
                }
                self.set(&key.to_ascii_lowercase(), &value)
                    .map_err(|e| ServiceError::Config(format!("{name}: {e}")))?;
            }
        }
        Ok(())
    }

    /// Sets one field from its string form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: FromStr>(v: &str) -> Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            v.trim().parse().map_err(|e| format!("invalid value {v:?}: {e}"))
        }
        let opt = |v: &str| (!v.is_empty()).then(|| v.to_string());
        match key {
            "passages" => self.passages = value.into(),
            "labels" => self.labels = opt(value).map(PathBuf::from),
            "index_dir" => self.index_dir = value.into(),
            "log_dir" => self.log_dir = value.into(),
            "retriever" => self.retriever = value.parse()?,
            "k" => self.k = num(value)?,
            "bm25_k1" => self.bm25_k1 = num(value)?,
            "bm25_b" => self.bm25_b = num(value)?,
            "dense_dim" => self.dense_dim = num(value)?,
            "dense_seed" => self.dense_seed = num(value)?,
            "embedder_url" => self.embedder_url = opt(value),
            "reader" => self.reader = value.parse()?,
            "reader_url" => self.reader_url = opt(value),
            "max_answer_tokens" => self.max_answer_tokens = num(value)?,
            "paraphrase_url" => self.paraphrase_url = opt(value),
            "translate_url" => self.translate_url = opt(value),
            "pivot_lang" => self.pivot_lang = value.to_string(),
            "adapter_timeout_ms" => self.adapter_timeout_ms = num(value)?,
            "adapter_retries" => self.adapter_retries = num(value)?,
            "host" => self.host = value.to_string(),
            "port" => self.port = num(value)?,
            "api_token" => self.api_token = opt(value),
            other => return Err(format!("unknown setting {other:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        let bad = |m: &str| Err(ServiceError::Config(m.to_string()));
        if !(1..=50).contains(&self.k) {
            return bad("k must be within 1..=50");
        }
        if !(self.bm25_k1.is_finite() && self.bm25_k1 >= 0.0) {
            return bad("bm25_k1 must be a non-negative number");
        }
        if !(0.0..=1.0).contains(&self.bm25_b) {
            return bad("bm25_b must be within [0, 1]");
        }
        if self.max_answer_tokens == 0 {
            return bad("max_answer_tokens must be positive");
        }
        if self.reader == ReaderKind::Remote && self.reader_url.is_none() {
            return bad("reader = \"remote\" requires reader_url");
        }
        Ok(())
    }

    pub fn bm25_params(&self) -> Bm25Params {
        Bm25Params {
            k1: self.bm25_k1,
            b: self.bm25_b,
        }
    }

    pub fn adapter(&self, url: &str) -> AdapterConfig {
        AdapterConfig {
            url: url.to_string(),
            timeout_ms: self.adapter_timeout_ms,
            retries: self.adapter_retries,
        }
    }

    pub fn ask_log_path(&self) -> PathBuf {
        self.log_dir.join("asks.jsonl")
    }

    pub fn feedback_log_path(&self) -> PathBuf {
        self.log_dir.join("feedback.jsonl")
    }

    pub fn sparse_snapshot_path(&self) -> PathBuf {
        self.index_dir.join("bm25.idx")
    }

    pub fn dense_snapshot_path(&self) -> PathBuf {
        self.index_dir.join("dense.idx")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_overrides_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("coachqa.toml");
        std::fs::write(&path, "k = 7\nport = 9000\npassages = \"p.jsonl\"\nretriever = \"dense\"\n").unwrap();
        let mut c = Config::from_file(&path).unwrap();
        assert_eq!(c.k, 7);
        assert_eq!(c.retriever, RetrieverKind::Dense);
        assert_eq!(c.passages, dir.path().join("p.jsonl"));
        c.apply_env([
            ("COACHQA_K".to_string(), "3".to_string()),
            ("COACHQA_BM25_B".to_string(), "0.75".to_string()),
            ("OTHER".to_string(), "x".to_string()),
        ])
        .unwrap();
        assert_eq!((c.k, c.bm25_b, c.port), (3, 0.75, 9000));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut c = Config::default();
        assert!(c.apply_env([("COACHQA_NOPE".to_string(), "1".to_string())]).is_err());
        assert!(c.apply_env([("COACHQA_K".to_string(), "many".to_string())]).is_err());
        assert!(toml::from_str::<Config>("kk = 1").is_err());
    }

    #[test]
    fn validation() {
        let mut c = Config::default();
        c.validate().unwrap();
        c.k = 51;
        assert!(c.validate().is_err());
        let c = Config {
            reader: ReaderKind::Remote,
            ..Config::default()
        };
        assert!(c.validate().is_err());
    }
}
