//! Validation sampling and the loop exit check.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::labels::Label;
use super::CurationError;
use crate::mapping::MappingCandidate;
use crate::util::seeded_rng;

fn sort_key(c: &MappingCandidate) -> (&str, &str) {
    (&c.lemma, &c.concept_id)
}

/// Uniform sample of `n` candidates without replacement. The input is put in
/// (lemma, concept_id) order first, so the result depends only on the set of
/// candidates and the seed. Output keeps that order.
pub fn sample_for_validation(candidates: &[MappingCandidate], n: usize, seed: u64) -> Result<Vec<MappingCandidate>, CurationError> {
    if candidates.is_empty() {
        return Err(CurationError::EmptyInput("candidate list"));
    }
    let mut sorted: Vec<&MappingCandidate> = candidates.iter().collect();
    sorted.sort_by(|a, b| sort_key(a).cmp(&sort_key(b)).then(a.channel.cmp(&b.channel)));
    if sorted.len() <= n {
        return Ok(sorted.into_iter().cloned().collect());
    }
    let mut rng = seeded_rng(seed, "validation-sample");
    let mut idx = sample(&mut rng, sorted.len(), n).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| sorted[i].clone()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitCheck {
    pub decision: Decision,
    pub accuracy: f64,
    pub correct: usize,
    pub judged: usize,
}

/// Accuracy over labels 0 and 1; stop when it falls below `exit_accuracy`.
pub fn evaluate_exit(labels: &[Label], exit_accuracy: f64) -> Result<ExitCheck, CurationError> {
    if labels.is_empty() {
        return Err(CurationError::EmptyInput("sample labels"));
    }
    let correct = labels.iter().filter(|&&l| l == Label::Correct).count();
    let judged = labels.iter().filter(|&&l| l != Label::NotSymptom).count();
    if judged == 0 {
        return Err(CurationError::UndefinedAccuracy);
    }
    let accuracy = correct as f64 / judged as f64;
    Ok(ExitCheck {
        decision: if accuracy < exit_accuracy { Decision::Stop } else { Decision::Continue },
        accuracy,
        correct,
        judged,
    })
}
