//! Merging concept counts into a reporting scheme of symptom names.

use std::collections::BTreeMap;
use std::io::BufRead;

use super::AnalyticsError;
use crate::text::normalize_phrase;
use crate::util::unescape_field;

pub const MERGE_HEADER: &str = "concept_name\tmerged_name";

/// The bundled concept-to-symptom merge table.
pub const BUNDLED_MERGE_MAP: &str = include_str!("../../assets/merge-map.tsv");

/// Concept name to merged symptom name. Lookups ignore case and spacing;
/// unmapped names pass through unchanged.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergeMap {
    map: BTreeMap<String, String>,
}

impl MergeMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bundled() -> Self {
        Self::read_tsv(BUNDLED_MERGE_MAP.as_bytes()).expect("bundled merge map parses")
    }

    pub fn insert(&mut self, concept_name: &str, merged: &str) -> Result<(), AnalyticsError> {
        let key = normalize_phrase(concept_name);
        match self.map.get(&key) {
            Some(existing) if existing != merged => Err(AnalyticsError::Parse {
                what: "merge map",
                line: 0,
                message: format!("{concept_name:?} maps to both {existing:?} and {merged:?}"),
            }),
            _ => {
                self.map.insert(key, merged.to_string());
                Ok(())
            }
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn merged_name<'a>(&'a self, concept_name: &'a str) -> &'a str {
        self.map.get(&normalize_phrase(concept_name)).map(String::as_str).unwrap_or(concept_name)
    }

    /// Two-column TSV; `#` lines and a leading header are skipped. A name
    /// mapped to two different targets is an error.
    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self, AnalyticsError> {
        let mut m = Self::new();
        let mut seen_data = false;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            if !seen_data && line == MERGE_HEADER {
                seen_data = true;
                continue;
            }
            seen_data = true;
            let mut parts = line.split('\t');
            let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(AnalyticsError::Parse {
                    what: "merge map",
                    line: lineno,
                    message: "expected 2 columns".into(),
                });
            };
            m.insert(&unescape_field(a), &unescape_field(b)).map_err(|e| match e {
                AnalyticsError::Parse { what, message, .. } => AnalyticsError::Parse { what, line: lineno, message },
                other => other,
            })?;
        }
        Ok(m)
    }
}

/// Sums counts under merged names.
pub fn merge(counts: &BTreeMap<String, u64>, map: &MergeMap) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    for (name, &c) in counts {
        *out.entry(map.merged_name(name).to_string()).or_insert(0) += c;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counts(rows: &[(&str, u64)]) -> BTreeMap<String, u64> {
        rows.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn bundled_rows() {
        let m = MergeMap::bundled();
        assert_eq!(m.merged_name("Tired"), "Fatigue");
        assert_eq!(m.merged_name("Dry cough"), "Cough");
        assert_eq!(m.merged_name("Unable to breathe"), "Shortness of breath");
        assert_eq!(m.merged_name("Poor balance"), "Poor balance");
        assert_eq!(m.merged_name("Not in the table"), "Not in the table");
        assert_eq!(merge(&counts(&[("Tired", 5), ("Fatigue", 7)]), &m), counts(&[("Fatigue", 12)]));
        assert_eq!(merge(&counts(&[("Dry cough", 2), ("Cough", 3)]), &m), counts(&[("Cough", 5)]));
    }

    #[test]
    fn identity_and_conflicts() {
        let c = counts(&[("A", 1), ("B", 2)]);
        assert_eq!(merge(&c, &MergeMap::new()), c);
        let bad = "a\tX\na\tY\n";
        assert!(matches!(MergeMap::read_tsv(bad.as_bytes()), Err(AnalyticsError::Parse { line: 2, .. })));
        assert!(MergeMap::read_tsv("a\tX\tZ\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn conserves_mass(rows in proptest::collection::btree_map("[a-e]{1,2}", 0u64..1000, 0..20),
                          targets in proptest::collection::btree_map("[a-e]{1,2}", "[x-z]", 0..10)) {
            let mut m = MergeMap::new();
            for (k, v) in &targets {
                m.insert(k, v).unwrap();
            }
            let merged = merge(&rows, &m);
            prop_assert_eq!(merged.values().sum::<u64>(), rows.values().sum::<u64>());
        }
    }
}
