//! Random review packet for a final physician check of the dictionary.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use rand::seq::index::sample;
use serde::Serialize;

use super::assign::{find_context, sample_context};
use crate::corpus::ContextIndex;
use crate::curation::Dictionary;
use crate::util::seeded_rng;

pub const DEFAULT_SANITY_SIZE: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SanityItem {
    pub lemma: String,
    pub concept_id: String,
    pub concept_name: String,
    pub context_tweets: Vec<String>,
}

/// `n` dictionary entries drawn uniformly, each with up to ten context
/// tweets. Returns the whole dictionary when `n` exceeds its size.
pub fn sanity_sample(dict: &Dictionary, n: usize, index: &ContextIndex, seed: u64) -> Vec<SanityItem> {
    let entries: Vec<_> = dict.iter().collect();
    let mut picked: Vec<usize> = if n >= entries.len() {
        (0..entries.len()).collect()
    } else {
        sample(&mut seeded_rng(seed, "sanity"), entries.len(), n).into_vec()
    };
    picked.sort_unstable();
    let surfaces: BTreeMap<String, BTreeSet<String>> = picked.iter().map(|&i| (entries[i].1.lemma.clone(), entries[i].1.surfaces.clone())).collect();
    let hits = find_context(&surfaces, index);
    picked
        .into_iter()
        .map(|i| {
            let (cid, e) = entries[i];
            SanityItem {
                lemma: e.lemma.clone(),
                concept_id: cid.to_string(),
                concept_name: dict.concept_name(cid).unwrap_or_default().to_string(),
                context_tweets: sample_context(&e.lemma, &hits[&e.lemma], index, seed),
            }
        })
        .collect()
}

/// One JSON object per line.
pub fn write_sanity_packet<W: Write>(mut w: W, items: &[SanityItem]) -> io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Fraction of entries marked correct.
pub fn sanity_accuracy(marks: &[bool]) -> Option<f64> {
    (!marks.is_empty()).then(|| marks.iter().filter(|&&m| m).count() as f64 / marks.len() as f64)
}

/// Whole percentages print without decimals ("95%"), others with one.
pub fn format_accuracy(accuracy: f64) -> String {
    let pct = accuracy * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("{:.0}%", pct)
    } else {
        format!("{:.1}%", pct)
    }
}
