//! Round state machine: propose candidates, then close the round with labels.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use serde::{Deserialize, Serialize};

use super::dictionary::{accumulate, Dictionary};
use super::labels::{Label, LabeledPair};
use super::partition::{partition_annotations, Partition};
use super::sampling::{evaluate_exit, sample_for_validation, Decision, ExitCheck};
use super::triplets::{build_triplets, TripletOutput, DEFAULT_NEGATIVES};
use super::CurationError;
use crate::mapping::{ensemble_from, top1_all, ConceptInventory, MappingCandidate, ThresholdConfig, Vectors};
use crate::normalize::LemmaTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub sample_size: usize,
    pub exit_accuracy: f64,
    pub max_rounds: u32,
    pub negatives: usize,
    pub seed: u64,
    pub thresholds: ThresholdConfig,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            sample_size: 50,
            exit_accuracy: 0.10,
            max_rounds: 10,
            negatives: DEFAULT_NEGATIVES,
            seed: 0,
            thresholds: ThresholdConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LoopStatus {
    Open,
    /// No lemmas left to map.
    Complete,
    /// Sample accuracy fell below the exit threshold.
    Stopped { accuracy: f64 },
    /// Round limit reached.
    MaxRounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: u32,
    pub lemmas: usize,
    pub candidates: usize,
    pub below_tau: usize,
    pub sample: usize,
    pub accuracy: f64,
    pub decision: Decision,
    pub adopted: usize,
    pub rejected: usize,
    pub removed: usize,
    pub triplets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationState {
    pub round: u32,
    pub initial: usize,
    pub pending: BTreeSet<String>,
    pub dictionary: Dictionary,
    pub removed: BTreeSet<String>,
    pub abandoned: BTreeSet<String>,
    pub status: LoopStatus,
    pub config: LoopConfig,
    pub history: Vec<RoundSummary>,
}

/// Counts behind the conservation audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Conservation {
    pub initial: usize,
    pub adopted: usize,
    pub abandoned: usize,
    pub removed: usize,
    pub pending: usize,
}

impl Conservation {
    pub fn holds(&self) -> bool {
        self.adopted + self.abandoned + self.removed + self.pending == self.initial
    }
}

impl IterationState {
    /// Round 1 over the filtered lemma table.
    pub fn new(table: &LemmaTable, config: LoopConfig) -> Self {
        let pending: BTreeSet<String> = table.lemmas().map(str::to_string).collect();
        Self {
            round: 1,
            initial: pending.len(),
            status: if pending.is_empty() { LoopStatus::Complete } else { LoopStatus::Open },
            pending,
            dictionary: Dictionary::new(),
            removed: BTreeSet::new(),
            abandoned: BTreeSet::new(),
            config,
            history: Vec::new(),
        }
    }

    pub fn conservation(&self) -> Conservation {
        Conservation {
            initial: self.initial,
            adopted: self.dictionary.lemma_count(),
            abandoned: self.abandoned.len(),
            removed: self.removed.len(),
            pending: self.pending.len(),
        }
    }

    pub fn is_open(&self) -> bool {
        self.status == LoopStatus::Open
    }
}

/// Candidates and validation sample for the current round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundProposal {
    pub round: u32,
    pub candidates: Vec<MappingCandidate>,
    /// Pending lemmas with no candidate above threshold.
    pub below_tau: BTreeSet<String>,
    pub sample: Vec<MappingCandidate>,
}

pub fn propose(state: &IterationState, inventory: &ConceptInventory, vectors: &Vectors) -> Result<RoundProposal, CurationError> {
    if !state.is_open() {
        return Err(CurationError::Closed);
    }
    if state.pending.is_empty() {
        return Err(CurationError::EmptyInput("pending lemmas"));
    }
    state.config.thresholds.validate()?;
    let lemmas: Vec<String> = state.pending.iter().cloned().collect();
    let tops = top1_all(&lemmas, inventory, vectors)?;
    let mut candidates = Vec::new();
    let mut below_tau = BTreeSet::new();
    for t in &tops {
        let c = ensemble_from(t, &state.config.thresholds);
        if c.is_empty() {
            below_tau.insert(t.lemma.clone());
        }
        candidates.extend(c);
    }
    let sample = if candidates.is_empty() {
        Vec::new()
    } else {
        sample_for_validation(&candidates, state.config.sample_size, state.config.seed ^ u64::from(state.round))?
    };
    Ok(RoundProposal {
        round: state.round,
        candidates,
        below_tau,
        sample,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub exit: Option<ExitCheck>,
    pub partition: Partition,
    pub triplets: TripletOutput,
}

fn label_map(labels: &[LabeledPair]) -> Result<BTreeMap<(&str, &str), Label>, CurationError> {
    let mut m = BTreeMap::new();
    for l in labels {
        if let Some(prev) = m.insert((l.lemma.as_str(), l.concept_id.as_str()), l.label) {
            if prev != l.label {
                return Err(CurationError::Adjudication {
                    lemma: l.lemma.clone(),
                    concept_id: l.concept_id.clone(),
                });
            }
        }
    }
    Ok(m)
}

fn missing<'a>(pairs: impl Iterator<Item = &'a MappingCandidate>, labels: &BTreeMap<(&str, &str), Label>) -> Vec<String> {
    let mut out: Vec<String> = pairs
        .filter(|c| !labels.contains_key(&(c.lemma.as_str(), c.concept_id.as_str())))
        .map(|c| format!("{}\t{}", c.lemma, c.concept_id))
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Applies final labels to a proposal. The sample decides whether to
/// continue; on continue every candidate pair needs a label.
pub fn close_round(
    state: &IterationState,
    proposal: &RoundProposal,
    labels: &[LabeledPair],
    table: &LemmaTable,
    inventory: &ConceptInventory,
) -> Result<(IterationState, RoundOutcome), CurationError> {
    if !state.is_open() {
        return Err(CurationError::Closed);
    }
    if proposal.round != state.round {
        return Err(CurationError::RoundMismatch {
            expected: state.round,
            got: proposal.round,
        });
    }
    let labels = label_map(labels)?;
    let mut next = state.clone();
    let mut summary = RoundSummary {
        round: state.round,
        lemmas: state.pending.len(),
        candidates: proposal.candidates.len(),
        below_tau: proposal.below_tau.len(),
        sample: proposal.sample.len(),
        accuracy: 0.0,
        decision: Decision::Stop,
        adopted: 0,
        rejected: 0,
        removed: 0,
        triplets: 0,
    };

    if proposal.candidates.is_empty() {
        // nothing cleared the thresholds: the remaining lemmas are abandoned
        next.abandoned.extend(std::mem::take(&mut next.pending));
        next.status = LoopStatus::Complete;
        next.history.push(summary);
        return Ok((
            next,
            RoundOutcome {
                exit: None,
                partition: Partition::default(),
                triplets: TripletOutput::default(),
            },
        ));
    }

    let absent = missing(proposal.sample.iter(), &labels);
    if !absent.is_empty() {
        return Err(CurationError::IncompleteRound(absent));
    }
    let sample_labels: Vec<Label> = proposal.sample.iter().map(|c| labels[&(c.lemma.as_str(), c.concept_id.as_str())]).collect();
    let exit = evaluate_exit(&sample_labels, state.config.exit_accuracy)?;
    summary.accuracy = exit.accuracy;
    summary.decision = exit.decision;

    if exit.decision == Decision::Stop {
        next.abandoned.extend(std::mem::take(&mut next.pending));
        next.status = LoopStatus::Stopped { accuracy: exit.accuracy };
        next.history.push(summary);
        return Ok((
            next,
            RoundOutcome {
                exit: Some(exit),
                partition: Partition::default(),
                triplets: TripletOutput::default(),
            },
        ));
    }

    let absent = missing(proposal.candidates.iter(), &labels);
    if !absent.is_empty() {
        return Err(CurationError::IncompleteRound(absent));
    }
    let round_labels: Vec<LabeledPair> = proposal
        .candidates
        .iter()
        .map(|c| LabeledPair::new(&c.lemma, &c.concept_id, labels[&(c.lemma.as_str(), c.concept_id.as_str())]))
        .collect();
    let (partition, removed) = partition_annotations(&round_labels)?;
    next.dictionary = accumulate(&state.dictionary, &partition, table, &proposal.candidates, inventory, state.round)?;
    let adopted: BTreeSet<String> = partition.adopted_lemmas().into_iter().map(str::to_string).collect();
    let triplets = build_triplets(&partition, inventory, state.config.negatives, state.config.seed ^ u64::from(state.round))?;

    let mut carried = BTreeSet::new();
    for lemma in &state.pending {
        if removed.contains(lemma) {
            next.removed.insert(lemma.clone());
        } else if adopted.contains(lemma) {
            // already in the dictionary
        } else if proposal.below_tau.contains(lemma) {
            next.abandoned.insert(lemma.clone());
        } else {
            carried.insert(lemma.clone());
        }
    }
    summary.adopted = adopted.len();
    summary.removed = removed.len();
    summary.rejected = carried.len();
    summary.triplets = triplets.triplets.len();
    next.pending = carried;
    next.round += 1;
    next.status = if next.pending.is_empty() {
        LoopStatus::Complete
    } else if next.round > state.config.max_rounds {
        warn!("round limit {} reached; {} lemmas abandoned", state.config.max_rounds, next.pending.len());
        next.abandoned.extend(std::mem::take(&mut next.pending));
        LoopStatus::MaxRounds
    } else {
        LoopStatus::Open
    };
    next.history.push(summary);
    Ok((next, RoundOutcome { exit: Some(exit), partition, triplets }))
}
