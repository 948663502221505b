//! Append-only JSON-lines logs of served answers and coach feedback.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use coachqa_core::reader::AnswerSpan;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::ServiceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoachAction {
    Accepted,
    Edited,
    Rejected,
}

impl FromStr for CoachAction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "accepted" => Ok(CoachAction::Accepted),
            "edited" => Ok(CoachAction::Edited),
            "rejected" => Ok(CoachAction::Rejected),
            other => Err(format!("invalid coach_action {other:?} (expected accepted, edited or rejected)")),
        }
    }
}

/// Compact hit as recorded in the ask log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedHit {
    pub passage_id: String,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AskRecord {
    pub question_id: String,
    pub timestamp: DateTime<Utc>,
    pub question: String,
    pub k: usize,
    pub system_version: String,
    pub answer: Option<AnswerSpan>,
    pub hits: Vec<LoggedHit>,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub question_id: String,
    pub coach_action: CoachAction,
    pub final_answer_text: String,
    /// The final text differs from the served answer.
    pub edited: bool,
    pub timestamp: DateTime<Utc>,
}

/// Appends records one line at a time. Every append is flushed and synced
/// before it returns, and the mutex makes this the only writer.
#[derive(Debug)]
pub struct JsonlLog<T> {
    path: PathBuf,
    file: Mutex<File>,
    _record: PhantomData<fn(T)>,
}

impl<T: Serialize> JsonlLog<T> {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let path = path.into();
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| io_err(&path, e))?;
        Ok(JsonlLog {
            path,
            file: Mutex::new(file),
            _record: PhantomData,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, record: &T) -> Result<(), ServiceError> {
        let mut line = serde_json::to_vec(record).map_err(|e| ServiceError::Internal(e.to_string()))?;
        line.push(b'\n');
        let mut file = self.file.lock().unwrap_or_else(|p| p.into_inner());
        file.write_all(&line).map_err(|e| io_err(&self.path, e))?;
        file.sync_data().map_err(|e| io_err(&self.path, e))
    }
}

fn io_err(path: &Path, e: std::io::Error) -> ServiceError {
    ServiceError::Internal(format!("{}: {e}", path.display()))
}

/// Reads every record of a log; a missing file is an empty log.
pub fn read_log<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, ServiceError> {
    let path = path.as_ref();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path, e)),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| ServiceError::Internal(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(record);
    }
    Ok(out)
}

/// Joins feedback to the asks it refers to. Fails if any feedback record
/// has no matching ask or if a question id was served twice.
pub fn replay(
    ask_log: impl AsRef<Path>,
    feedback_log: impl AsRef<Path>,
) -> Result<Vec<(AskRecord, FeedbackRecord)>, ServiceError> {
    let asks: Vec<AskRecord> = read_log(ask_log)?;
    let feedback: Vec<FeedbackRecord> = read_log(feedback_log)?;
    let mut by_id: HashMap<&str, &AskRecord> = HashMap::with_capacity(asks.len());
    for a in &asks {
        if by_id.insert(&a.question_id, a).is_some() {
            return Err(ServiceError::Internal(format!("question id {} served twice", a.question_id)));
        }
    }
    feedback
        .into_iter()
        .map(|f| match by_id.get(f.question_id.as_str()) {
            Some(a) => Ok(((*a).clone(), f)),
            None => Err(ServiceError::Internal(format!(
                "feedback for unknown question id {}",
                f.question_id
            ))),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ask(id: &str) -> AskRecord {
        AskRecord {
            question_id: id.into(),
            timestamp: Utc::now(),
            question: "q".into(),
            k: 5,
            system_version: "v".into(),
            answer: None,
            hits: vec![],
            latency_ms: 1,
        }
    }

    fn fb(id: &str) -> FeedbackRecord {
        FeedbackRecord {
            question_id: id.into(),
            coach_action: CoachAction::Rejected,
            final_answer_text: String::new(),
            edited: false,
            timestamp: Utc::now(),
        }
    }

    #[test]
    fn replay_joins_and_detects_orphans() {
        let dir = tempfile::tempdir().unwrap();
        let asks = JsonlLog::open(dir.path().join("a.jsonl")).unwrap();
        let feedback = JsonlLog::open(dir.path().join("f.jsonl")).unwrap();
        for id in ["1", "2", "3"] {
            asks.append(&ask(id)).unwrap();
        }
        feedback.append(&fb("2")).unwrap();
        feedback.append(&fb("3")).unwrap();
        let joined = replay(asks.path(), feedback.path()).unwrap();
        assert_eq!(joined.len(), 2);
        assert!(joined.iter().all(|(a, f)| a.question_id == f.question_id));

        feedback.append(&fb("9")).unwrap();
        assert!(replay(asks.path(), feedback.path()).is_err());
    }

    #[test]
    fn reopening_appends() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("logs").join("a.jsonl");
        JsonlLog::open(&path).unwrap().append(&ask("1")).unwrap();
        JsonlLog::open(&path).unwrap().append(&ask("2")).unwrap();
        let all: Vec<AskRecord> = read_log(&path).unwrap();
        assert_eq!(all.len(), 2);
        assert!(read_log::<AskRecord>(dir.path().join("missing")).unwrap().is_empty());
    }

    #[test]
    fn timestamps_are_utc() {
        let line = serde_json::to_string(&fb("x")).unwrap();
        assert!(line.contains("Z\""), "{line}");
        assert_eq!("edited".parse::<CoachAction>().unwrap(), CoachAction::Edited);
        assert!("maybe".parse::<CoachAction>().is_err());
    }
}
