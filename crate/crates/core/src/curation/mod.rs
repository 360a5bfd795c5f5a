//! The iterative validation loop: sampling, exit check, partition,
//! hard-negative triplets and dictionary accumulation.

pub mod dictionary;
pub mod labels;
pub mod partition;
pub mod rounds;
pub mod sampling;
pub mod triplets;

use crate::mapping::MappingError;

pub use dictionary::{accumulate, DictEntry, Dictionary};
pub use labels::{read_labels, write_labels, Label, LabeledPair, LabelsError};
pub use partition::{partition_annotations, Partition};
pub use rounds::{close_round, propose, Conservation, IterationState, LoopConfig, LoopStatus, RoundOutcome, RoundProposal, RoundSummary};
pub use sampling::{evaluate_exit, sample_for_validation, Decision, ExitCheck};
pub use triplets::{build_triplets, write_triplets, TrainingTriplet, TripletOutput};

#[derive(Debug, thiserror::Error)]
pub enum CurationError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("accuracy undefined: every sampled pair is labeled 2")]
    UndefinedAccuracy,
    #[error("conflicting final labels for ({lemma}, {concept_id})")]
    Adjudication { lemma: String, concept_id: String },
    #[error("lemma {lemma:?} already adopted under {existing}, proposed {proposed}")]
    Conflict { lemma: String, existing: String, proposed: String },
    #[error("unknown concept {0}")]
    UnknownConcept(String),
    #[error("lemma {0:?} not in the lemma table")]
    MissingLemma(String),
    #[error("labels missing for {} pair(s): {}", .0.len(), .0.join(", "))]
    IncompleteRound(Vec<String>),
    #[error("the loop is closed")]
    Closed,
    #[error("proposal is for round {got}, state is at round {expected}")]
    RoundMismatch { expected: u32, got: u32 },
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{what} line {line}: {message}")]
    Parse { what: &'static str, line: usize, message: String },
}
