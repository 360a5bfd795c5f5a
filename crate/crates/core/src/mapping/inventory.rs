//! Canonical concept inventory.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{self, BufRead};

use serde::Serialize;

pub const INVENTORY_HEADER: &str = "concept_id\tname\tis_preferred";

#[derive(Debug, thiserror::Error)]
pub enum InventoryError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("inventory line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("concept {0} has no preferred name")]
    NoPreferred(String),
    #[error("concept {0} has more than one preferred name")]
    DuplicatePreferred(String),
    #[error("inventory is empty")]
    Empty,
}

/// Lowercased, single-spaced comparison key for names and lemmas.
pub fn match_key(s: &str) -> String {
    crate::text::normalize_phrase(s)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Concept {
    pub concept_id: String,
    pub preferred_name: String,
    pub synonyms: BTreeSet<String>,
}

impl Concept {
    /// Preferred name first, then synonyms in order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.preferred_name.as_str()).chain(self.synonyms.iter().map(String::as_str))
    }
}

/// A name as seen by the matchers: its key and owning concept.
#[derive(Debug, Clone)]
pub struct NameEntry {
    pub concept: usize,
    pub key: String,
    pub chars: Vec<char>,
}

#[derive(Debug, Clone)]
pub struct ConceptInventory {
    /// Sorted by concept_id.
    concepts: Vec<Concept>,
    by_id: HashMap<String, usize>,
    /// Name key to concept positions, ascending.
    name_index: HashMap<String, Vec<usize>>,
    /// Unique (concept, key) pairs in concept order.
    names: Vec<NameEntry>,
}

impl ConceptInventory {
    pub fn new(concepts: Vec<Concept>) -> Result<Self, InventoryError> {
        if concepts.is_empty() {
            return Err(InventoryError::Empty);
        }
        let mut concepts = concepts;
        concepts.sort_by(|a, b| a.concept_id.cmp(&b.concept_id));
        let mut by_id = HashMap::new();
        let mut name_index: HashMap<String, Vec<usize>> = HashMap::new();
        let mut names = Vec::new();
        for (i, c) in concepts.iter().enumerate() {
            if c.preferred_name.trim().is_empty() {
                return Err(InventoryError::NoPreferred(c.concept_id.clone()));
            }
            if by_id.insert(c.concept_id.clone(), i).is_some() {
                return Err(InventoryError::Parse {
                    line: 0,
                    message: format!("duplicate concept id {}", c.concept_id),
                });
            }
            let mut seen = BTreeSet::new();
            for name in c.names() {
                let key = match_key(name);
                if key.is_empty() || !seen.insert(key.clone()) {
                    continue;
                }
                name_index.entry(key.clone()).or_default().push(i);
                names.push(NameEntry {
                    concept: i,
                    chars: key.chars().collect(),
                    key,
                });
            }
        }
        Ok(Self {
            concepts,
            by_id,
            name_index,
            names,
        })
    }

    /// Reads the `concept_id TAB name TAB is_preferred` file. The header row
    /// is optional.
    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self, InventoryError> {
        let mut preferred: BTreeMap<String, String> = BTreeMap::new();
        let mut synonyms: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') || (i == 0 && line == INVENTORY_HEADER) {
                continue;
            }
            let bad = |message: &str| InventoryError::Parse {
                line: i + 1,
                message: message.to_string(),
            };
            let cells: Vec<&str> = line.split('\t').collect();
            if cells.len() != 3 {
                return Err(bad("expected concept_id, name, is_preferred"));
            }
            let (id, name) = (cells[0].trim(), cells[1].trim());
            if id.is_empty() || name.is_empty() {
                return Err(bad("empty concept id or name"));
            }
            match cells[2].trim() {
                "1" => {
                    if preferred.insert(id.to_string(), name.to_string()).is_some() {
                        return Err(InventoryError::DuplicatePreferred(id.to_string()));
                    }
                    synonyms.entry(id.to_string()).or_default();
                }
                "0" => {
                    synonyms.entry(id.to_string()).or_default().insert(name.to_string());
                }
                _ => return Err(bad("is_preferred must be 0 or 1")),
            }
        }
        let mut concepts = Vec::new();
        for (id, mut syns) in synonyms {
            let pref = preferred.remove(&id).ok_or_else(|| InventoryError::NoPreferred(id.clone()))?;
            syns.remove(&pref);
            concepts.push(Concept {
                concept_id: id,
                preferred_name: pref,
                synonyms: syns,
            });
        }
        Self::new(concepts)
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn get(&self, concept_id: &str) -> Option<&Concept> {
        self.by_id.get(concept_id).map(|&i| &self.concepts[i])
    }

    pub fn concept_at(&self, i: usize) -> &Concept {
        &self.concepts[i]
    }

    pub fn names(&self) -> &[NameEntry] {
        &self.names
    }

    /// Concepts that carry `name` (compared by [`match_key`]), ascending by id.
    pub fn lookup_name(&self, name: &str) -> Vec<&str> {
        self.name_index
            .get(&match_key(name))
            .map(|v| v.iter().map(|&i| self.concepts[i].concept_id.as_str()).collect())
            .unwrap_or_default()
    }

    pub(crate) fn exact_concept(&self, key: &str) -> Option<usize> {
        self.name_index.get(key).and_then(|v| v.first().copied())
    }

    /// Every distinct name key.
    pub fn name_keys(&self) -> impl Iterator<Item = &str> {
        self.name_index.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SRC: &str = "concept_id\tname\tis_preferred\n\
C0002\tCough\t1\n\
C0001\tFever\t1\n\
C0001\tpyrexia\t0\n\
C0001\tFEVER\t0\n\
C0003\tfever\t0\n\
C0003\tChills\t1\n";

    #[test]
    fn parse_and_index() {
        let inv = ConceptInventory::read_tsv(SRC.as_bytes()).unwrap();
        assert_eq!(inv.len(), 3);
        assert_eq!(inv.concepts()[0].concept_id, "C0001");
        assert_eq!(inv.lookup_name("fever"), vec!["C0001", "C0003"]);
        assert_eq!(inv.lookup_name("Pyrexia"), vec!["C0001"]);
        assert!(inv.lookup_name("nausea").is_empty());
        assert_eq!(inv.get("C0003").unwrap().preferred_name, "Chills");
        // every name is indexed and points at an existing concept
        for c in inv.concepts() {
            for n in c.names() {
                assert!(inv.lookup_name(n).contains(&c.concept_id.as_str()));
            }
        }
        // FEVER collapses onto Fever for C0001
        assert_eq!(inv.names().iter().filter(|n| n.concept == 0).count(), 2);
    }

    #[test]
    fn errors() {
        assert!(matches!(ConceptInventory::read_tsv("C1\tx\t0\n".as_bytes()), Err(InventoryError::NoPreferred(_))));
        assert!(matches!(
            ConceptInventory::read_tsv("C1\tx\t1\nC1\ty\t1\n".as_bytes()),
            Err(InventoryError::DuplicatePreferred(_))
        ));
        assert!(matches!(ConceptInventory::read_tsv("C1\tx\t2\n".as_bytes()), Err(InventoryError::Parse { line: 1, .. })));
        assert!(matches!(ConceptInventory::read_tsv("".as_bytes()), Err(InventoryError::Empty)));
    }
}
