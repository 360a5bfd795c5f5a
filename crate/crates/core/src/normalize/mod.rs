//! Surface form to lemma reduction and lemma aggregation.

pub mod lemma;
pub mod rules;
pub mod stats;
pub mod table;

use std::collections::HashMap;

use rayon::prelude::*;

use crate::extract::EntityMention;
pub use lemma::{IdentityLemmatizer, Lemmatizer, SuffixLemmatizer};
pub use rules::{apply_rules, RewriteRule, RuleError, RuleSet, MAX_PASSES};
pub use stats::{summarize, EmptyInput, FrequencyStats};
pub use table::{aggregate, frequency_filter, LemmaRecord, LemmaTable, TableError, DEFAULT_SAMPLE_CAP};

/// Token the lemmatizer emits for numerals; always removed.
pub const NUMBER_TOKEN: &str = "number";

/// Lemmatizes each token, drops `number`, and re-applies the rules.
pub fn lemmatize(phrase: &str, lemmatizer: &dyn Lemmatizer, rules: &RuleSet) -> Result<String, RuleError> {
    let tokens: Vec<String> = phrase
        .split_whitespace()
        .map(|t| lemmatizer.lemma(t))
        .filter(|t| t != NUMBER_TOKEN)
        .collect();
    rules.apply(&tokens.join(" "))
}

pub struct Normalizer {
    rules: RuleSet,
    lemmatizer: Box<dyn Lemmatizer>,
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct NormalizeStats {
    pub mentions: u64,
    /// Mentions that normalized to nothing.
    pub degenerate: u64,
    /// Lemma occurrences added to the table.
    pub lemma_occurrences: u64,
    pub unique_surfaces: u64,
}

impl Default for Normalizer {
    fn default() -> Self {
        Self::new(RuleSet::default(), Box::new(SuffixLemmatizer::new()))
    }
}

impl Normalizer {
    pub fn new(rules: RuleSet, lemmatizer: Box<dyn Lemmatizer>) -> Self {
        Self { rules, lemmatizer }
    }

    pub fn rules(&self) -> &RuleSet {
        &self.rules
    }

    /// Lemmas for one raw surface, in order of appearance without repeats.
    /// Commas separate symptoms; an empty result means the mention is dropped.
    pub fn normalize_surface(&self, surface: &str) -> Result<Vec<String>, RuleError> {
        let rewritten = self.rules.apply(surface)?;
        let mut out: Vec<String> = Vec::new();
        for piece in rewritten.split(',') {
            let piece = self.rules.apply(piece)?;
            if piece.is_empty() {
                continue;
            }
            let lemma = lemmatize(&piece, self.lemmatizer.as_ref(), &self.rules)?;
            // a comma can only come back through a rule target; drop it
            let lemma = lemma.replace(',', " ").split_whitespace().collect::<Vec<_>>().join(" ");
            if !lemma.is_empty() && !out.contains(&lemma) {
                out.push(lemma);
            }
        }
        Ok(out)
    }

    /// Normalizes every distinct surface once, in parallel.
    pub fn normalize_unique<'a, I>(&self, surfaces: I) -> Result<HashMap<String, Vec<String>>, RuleError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut uniq: Vec<&str> = surfaces.into_iter().collect();
        uniq.sort_unstable();
        uniq.dedup();
        uniq.par_iter()
            .map(|s| self.normalize_surface(s).map(|l| (s.to_string(), l)))
            .collect()
    }

    /// Normalizes mentions and aggregates them into a lemma table.
    pub fn build_table(&self, mentions: &[EntityMention], cap: usize, seed: u64) -> Result<(LemmaTable, NormalizeStats), RuleError> {
        let lemmas = self.normalize_unique(mentions.iter().map(|m| m.surface.as_str()))?;
        let mut stats = NormalizeStats {
            mentions: mentions.len() as u64,
            unique_surfaces: lemmas.len() as u64,
            ..Default::default()
        };
        let chunk = (mentions.len() / rayon::current_num_threads().max(1)).max(4096);
        let table = mentions
            .par_chunks(chunk)
            .map(|ms| {
                let mut t = LemmaTable::new(cap, seed);
                let (mut degenerate, mut occ) = (0u64, 0u64);
                for m in ms {
                    let ls = &lemmas[m.surface.as_str()];
                    if ls.is_empty() {
                        degenerate += 1;
                    }
                    for l in ls {
                        t.add(&m.tweet_id, &m.surface, l);
                        occ += 1;
                    }
                }
                (t, degenerate, occ)
            })
            .reduce(
                || (LemmaTable::new(cap, seed), 0, 0),
                |a, b| (a.0.merge(b.0), a.1 + b.1, a.2 + b.2),
            );
        stats.degenerate = table.1;
        stats.lemma_occurrences = table.2;
        Ok((table.0, stats))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::EntityType;

    fn m(id: &str, s: &str) -> EntityMention {
        EntityMention {
            tweet_id: id.into(),
            surface: s.into(),
            start: 0,
            end: s.chars().count(),
            entity_type: EntityType::Symptom,
        }
    }

    #[test]
    fn lemmatize_examples() {
        let l = SuffixLemmatizer::new();
        let r = RuleSet::default();
        assert_eq!(lemmatize("headaches", &l, &r).unwrap(), "headache");
        assert_eq!(lemmatize("fever", &l, &r).unwrap(), "fever");
        assert_eq!(lemmatize("lost 5 number taste", &l, &r).unwrap(), "lost taste");
    }

    #[test]
    fn commas_split_symptoms() {
        let n = Normalizer::default();
        assert_eq!(n.normalize_surface("Fever, chills").unwrap(), vec!["fever", "chill"]);
        assert_eq!(n.normalize_surface("fever, fevers").unwrap(), vec!["fever"]);
        assert_eq!(n.normalize_surface("my head hurts").unwrap(), vec!["head hurt"]);
        assert_eq!(n.normalize_surface("having no taste").unwrap(), vec!["loss of taste"]);
        assert!(n.normalize_surface("it is").unwrap().is_empty());
    }

    #[test]
    fn table_counts_and_degenerates() {
        let n = Normalizer::default();
        let ms = [m("1", "headaches"), m("2", "Headache"), m("3", "it is"), m("4", "fever, chills")];
        let (t, s) = n.build_table(&ms, 50, 0).unwrap();
        assert_eq!(t.get("headache").unwrap().count, 2);
        assert_eq!(t.get("headache").unwrap().surface_forms.len(), 2);
        assert_eq!(s.degenerate, 1);
        assert_eq!(s.lemma_occurrences, t.total_count());
        assert_eq!(t.len(), 3);
    }
}
