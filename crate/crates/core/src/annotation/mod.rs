//! Annotation rounds: assignment, context, durable label storage, agreement
//! and adjudication.

pub mod assign;
pub mod journal;
pub mod kappa;
pub mod round;
pub mod sanity;

pub use assign::{attach_context, find_context, pair_id, sample_context, split_and_assign, AnnotationPair, AnnotationTask, CONTEXT_LIMIT};
pub use journal::{LabelAck, RoundStore};
pub use kappa::{cohen_kappa, kappa_from_pairs, weighted_mean, KappaResult, NoOverlap};
pub use round::{adjudicate, Disagreement, Event, FinalLabel, Progress, Resolution, RoundKappa, RoundState, SetKappa};
pub use sanity::{format_accuracy, sanity_accuracy, sanity_sample, write_sanity_packet, SanityItem};

#[derive(Debug, thiserror::Error)]
pub enum AnnotationError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("not authorized: {0}")]
    Unauthorized(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("unresolved disagreements: {}", .0.join(", "))]
    IncompleteAdjudication(Vec<String>),
    #[error("pairs without two labels: {}", .0.join(", "))]
    Unlabeled(Vec<String>),
    #[error("round {0} is closed")]
    Closed(u32),
    #[error("journal {path}: {message}")]
    Journal { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
