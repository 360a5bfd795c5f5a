//! The accumulating concept to lemma to surface-form lexicon.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::partition::Partition;
use super::CurationError;
use crate::mapping::{ConceptInventory, MappingCandidate};
use crate::normalize::LemmaTable;
use crate::util::{escape_field, escape_item, fmt_score, split_items, unescape_field};

pub const DICTIONARY_HEADER: &str = "concept_id\tconcept_name\tlemma\tsurfaces\tround\tscore";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictEntry {
    pub lemma: String,
    pub surfaces: BTreeSet<String>,
    pub round: u32,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    entries: BTreeMap<String, BTreeMap<String, DictEntry>>,
    /// Concept names as known at adoption time, for export.
    names: BTreeMap<String, String>,
    by_lemma: BTreeMap<String, String>,
}

impl Dictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn concept_of(&self, lemma: &str) -> Option<&str> {
        self.by_lemma.get(lemma).map(String::as_str)
    }

    pub fn lemma_count(&self) -> usize {
        self.by_lemma.len()
    }

    pub fn concept_count(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_lemma.is_empty()
    }

    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.by_lemma.keys().map(String::as_str)
    }

    pub fn concept_name(&self, concept_id: &str) -> Option<&str> {
        self.names.get(concept_id).map(String::as_str)
    }

    /// `(concept_id, entry)` in concept then lemma order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &DictEntry)> {
        self.entries.iter().flat_map(|(c, m)| m.values().map(move |e| (c.as_str(), e)))
    }

    /// Every `(surface, concept_id)` pair.
    pub fn surfaces(&self) -> impl Iterator<Item = (&str, &str)> {
        self.iter().flat_map(|(c, e)| e.surfaces.iter().map(move |s| (s.as_str(), c)))
    }

    /// Adds one entry; re-adding under the same concept is a no-op.
    pub fn insert(&mut self, concept_id: &str, concept_name: &str, entry: DictEntry) -> Result<bool, CurationError> {
        if let Some(existing) = self.by_lemma.get(&entry.lemma) {
            if existing != concept_id {
                return Err(CurationError::Conflict {
                    lemma: entry.lemma,
                    existing: existing.clone(),
                    proposed: concept_id.to_string(),
                });
            }
            return Ok(false);
        }
        if entry.surfaces.is_empty() {
            return Err(CurationError::MissingLemma(entry.lemma));
        }
        self.by_lemma.insert(entry.lemma.clone(), concept_id.to_string());
        self.names.entry(concept_id.to_string()).or_insert_with(|| concept_name.to_string());
        self.entries.entry(concept_id.to_string()).or_default().insert(entry.lemma.clone(), entry);
        Ok(true)
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{DICTIONARY_HEADER}")?;
        for (cid, e) in self.iter() {
            let surfaces: Vec<String> = e.surfaces.iter().map(|s| escape_item(s)).collect();
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}",
                escape_field(cid),
                escape_field(self.concept_name(cid).unwrap_or("")),
                escape_field(&e.lemma),
                escape_field(&surfaces.join(";")),
                e.round,
                fmt_score(e.score)
            )?;
        }
        w.flush()
    }

    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self, CurationError> {
        let mut d = Self::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let bad = |message: String| CurationError::Parse {
                what: "dictionary",
                line: i + 1,
                message,
            };
            if i == 0 {
                if line != DICTIONARY_HEADER {
                    return Err(bad("unexpected header".into()));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split('\t').collect();
            if cells.len() != 6 {
                return Err(bad(format!("expected 6 columns, got {}", cells.len())));
            }
            let entry = DictEntry {
                lemma: unescape_field(cells[2]),
                surfaces: split_items(&unescape_field(cells[3]), ';').into_iter().collect(),
                round: cells[4].parse().map_err(|_| bad("bad round".into()))?,
                score: cells[5].parse().map_err(|_| bad("bad score".into()))?,
            };
            d.insert(&unescape_field(cells[0]), &unescape_field(cells[1]), entry)?;
        }
        Ok(d)
    }
}

/// Adds every lemma in P(u) under u, with its raw surface forms and the best
/// candidate score for the pair. Fails without changes on a conflict.
pub fn accumulate(
    dictionary: &Dictionary,
    partition: &Partition,
    table: &LemmaTable,
    candidates: &[MappingCandidate],
    inventory: &ConceptInventory,
    round: u32,
) -> Result<Dictionary, CurationError> {
    let mut scores: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for c in candidates {
        let s = scores.entry((&c.lemma, &c.concept_id)).or_insert(c.score);
        *s = s.max(c.score);
    }
    let mut next = dictionary.clone();
    for (cid, lemmas) in &partition.positives {
        let name = inventory.get(cid).map(|c| c.preferred_name.clone()).ok_or_else(|| CurationError::UnknownConcept(cid.clone()))?;
        for lemma in lemmas {
            let rec = table.get(lemma).ok_or_else(|| CurationError::MissingLemma(lemma.clone()))?;
            let entry = DictEntry {
                lemma: lemma.clone(),
                surfaces: rec.surface_forms.keys().cloned().collect(),
                round,
                score: scores.get(&(lemma.as_str(), cid.as_str())).copied().unwrap_or(0.0),
            };
            next.insert(cid, &name, entry)?;
        }
    }
    Ok(next)
}
