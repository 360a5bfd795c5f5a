//! Dictionary application, concept merging and frequency reports.

pub mod matching;
pub mod merge;
pub mod report;

pub use matching::{match_corpus, ConceptCount, DictionaryMatcher, MatchCounts};
pub use merge::{merge, MergeMap, BUNDLED_MERGE_MAP};
pub use report::{compare, format_cell, format_percent, report, CompareRow, Comparison, FrequencyReport, ReportRow, DEFAULT_MIN_COUNT};

#[derive(Debug, thiserror::Error)]
pub enum AnalyticsError {
    #[error("the dictionary is empty")]
    EmptyDictionary,
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("{what} line {line}: {message}")]
    Parse { what: &'static str, line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
