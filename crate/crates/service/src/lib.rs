//! HTTP service and shared plumbing for the `coachqa` command-line tool.

pub mod config;
pub mod engine;
pub mod logs;
pub mod server;

pub use config::{Config, ReaderKind, RetrieverKind};
pub use engine::{Answered, Engine, HitView};
pub use logs::{replay, AskRecord, CoachAction, FeedbackRecord};
pub use server::{router, serve, AppState, AskResponse, FeedbackRequest, MetricsView};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    BadRequest(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("no index is loaded")]
    NotReady,
    #[error("missing or invalid bearer token")]
    Unauthorized,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Core(#[from] coachqa_core::Error),
}
