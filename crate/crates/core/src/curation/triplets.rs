//! Hard-negative training tuples for contrastive fine-tuning.

use std::collections::BTreeSet;
use std::io::{self, Write};

use log::warn;
use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use super::partition::Partition;
use super::CurationError;
use crate::mapping::ConceptInventory;
use crate::util::seeded_rng;

pub const DEFAULT_NEGATIVES: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingTriplet {
    pub query: String,
    pub positives: Vec<String>,
    pub negatives: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TripletOutput {
    pub triplets: Vec<TrainingTriplet>,
    /// Concepts skipped because no negative could be found.
    pub skipped: Vec<String>,
}

/// One tuple per concept with any labeled lemma. Empty P falls back to the
/// concept's own name, empty N to `k` lemmas drawn from other concepts' P.
pub fn build_triplets(partition: &Partition, inventory: &ConceptInventory, k: usize, seed: u64) -> Result<TripletOutput, CurationError> {
    let mut out = TripletOutput::default();
    for cid in partition.concepts() {
        let concept = inventory.get(cid).ok_or_else(|| CurationError::UnknownConcept(cid.to_string()))?;
        let query = concept.preferred_name.clone();
        let positives: BTreeSet<String> = match partition.p(cid) {
            Some(p) if !p.is_empty() => p.clone(),
            _ => BTreeSet::from([query.clone()]),
        };
        let negatives: Vec<String> = match partition.n(cid) {
            Some(n) if !n.is_empty() => n.iter().filter(|l| !positives.contains(*l)).cloned().collect(),
            _ => {
                let pool: BTreeSet<&String> = partition
                    .positives
                    .iter()
                    .filter(|(other, _)| other.as_str() != cid)
                    .flat_map(|(_, p)| p)
                    .filter(|l| !positives.contains(*l))
                    .collect();
                let pool: Vec<&String> = pool.into_iter().collect();
                let mut rng = seeded_rng(seed, &format!("negatives\t{cid}"));
                let mut drawn: Vec<String> = pool.choose_multiple(&mut rng, k.min(pool.len())).map(|s| s.to_string()).collect();
                drawn.sort();
                drawn
            }
        };
        if negatives.is_empty() {
            warn!("no negatives available for concept {cid}; skipped");
            out.skipped.push(cid.to_string());
            continue;
        }
        out.triplets.push(TrainingTriplet {
            query,
            positives: positives.into_iter().collect(),
            negatives,
        });
    }
    Ok(out)
}

/// One JSON object per line.
pub fn write_triplets<W: Write>(mut w: W, triplets: &[TrainingTriplet]) -> io::Result<()> {
    for t in triplets {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}
