//! Per-concept split of adjudicated pairs into correct and incorrect lemmas.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::labels::{Label, LabeledPair};
use super::CurationError;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    /// concept_id to lemmas labeled correct.
    pub positives: BTreeMap<String, BTreeSet<String>>,
    /// concept_id to lemmas labeled incorrect.
    pub negatives: BTreeMap<String, BTreeSet<String>>,
}

impl Partition {
    pub fn p(&self, concept_id: &str) -> Option<&BTreeSet<String>> {
        self.positives.get(concept_id)
    }

    pub fn n(&self, concept_id: &str) -> Option<&BTreeSet<String>> {
        self.negatives.get(concept_id)
    }

    /// Concepts with at least one labeled lemma, ascending.
    pub fn concepts(&self) -> BTreeSet<&str> {
        self.positives.keys().chain(self.negatives.keys()).map(String::as_str).collect()
    }

    pub fn adopted_lemmas(&self) -> BTreeSet<&str> {
        self.positives.values().flatten().map(String::as_str).collect()
    }
}

/// Splits final labels into P(u), N(u) and the set of lemmas to remove.
/// A lemma labeled 2 on any pair is removed and appears in neither P nor N.
pub fn partition_annotations(records: &[LabeledPair]) -> Result<(Partition, BTreeSet<String>), CurationError> {
    let mut finals: BTreeMap<(&str, &str), Label> = BTreeMap::new();
    for r in records {
        if let Some(prev) = finals.insert((&r.lemma, &r.concept_id), r.label) {
            if prev != r.label {
                return Err(CurationError::Adjudication {
                    lemma: r.lemma.clone(),
                    concept_id: r.concept_id.clone(),
                });
            }
        }
    }
    let removed: BTreeSet<String> = finals
        .iter()
        .filter(|(_, &l)| l == Label::NotSymptom)
        .map(|((lemma, _), _)| lemma.to_string())
        .collect();
    let mut part = Partition::default();
    for ((lemma, concept), label) in finals {
        if removed.contains(lemma) {
            continue;
        }
        let side = match label {
            Label::Correct => &mut part.positives,
            Label::Incorrect => &mut part.negatives,
            Label::NotSymptom => continue,
        };
        side.entry(concept.to_string()).or_default().insert(lemma.to_string());
    }
    Ok((part, removed))
}
