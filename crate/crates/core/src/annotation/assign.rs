//! Three-set split with rotating annotator pairs, and context lookup.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};

use super::AnnotationError;
use crate::corpus::ContextIndex;
use crate::text::PhraseMatcher;
use crate::util::{seeded_rng, stable_hash};

pub const CONTEXT_LIMIT: usize = 10;

/// Stable identifier of a (lemma, concept) pair.
pub fn pair_id(lemma: &str, concept_id: &str) -> String {
    format!("{:016x}", stable_hash(0x7061_6972, format!("{lemma}\t{concept_id}").as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationPair {
    pub pair_id: String,
    pub lemma: String,
    pub concept_id: String,
    pub concept_name: String,
}

impl AnnotationPair {
    pub fn new(lemma: &str, concept_id: &str, concept_name: &str) -> Self {
        Self {
            pair_id: pair_id(lemma, concept_id),
            lemma: lemma.to_string(),
            concept_id: concept_id.to_string(),
            concept_name: concept_name.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub pair_id: String,
    pub lemma: String,
    pub concept_id: String,
    pub concept_name: String,
    pub context_tweets: Vec<String>,
    pub low_context: bool,
    pub set_index: u8,
    pub assigned_annotators: [String; 2],
}

/// Shuffles pairs, cuts them into three sets whose sizes differ by at most
/// one, and gives set `i` to annotators `i` and `i + 1 mod 3`.
pub fn split_and_assign(pairs: &[AnnotationPair], annotators: &[String], seed: u64) -> Result<Vec<AnnotationTask>, AnnotationError> {
    if annotators.len() != 3 {
        return Err(AnnotationError::Config(format!("exactly 3 annotators required, got {}", annotators.len())));
    }
    let distinct: BTreeSet<&String> = annotators.iter().collect();
    if distinct.len() != 3 {
        return Err(AnnotationError::Config("annotator ids must be distinct".into()));
    }
    if pairs.len() < 3 {
        return Err(AnnotationError::Config(format!("at least 3 pairs required, got {}", pairs.len())));
    }
    let mut order: Vec<&AnnotationPair> = pairs.iter().collect();
    order.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
    let before = order.len();
    order.dedup_by(|a, b| a.pair_id == b.pair_id);
    if order.len() != before {
        return Err(AnnotationError::Config("duplicate pairs".into()));
    }
    order.shuffle(&mut seeded_rng(seed, "assignment"));
    let n = order.len();
    let mut tasks = Vec::with_capacity(n);
    let mut offset = 0;
    for set in 0..3usize {
        let size = n / 3 + usize::from(set < n % 3);
        for p in &order[offset..offset + size] {
            tasks.push(AnnotationTask {
                pair_id: p.pair_id.clone(),
                lemma: p.lemma.clone(),
                concept_id: p.concept_id.clone(),
                concept_name: p.concept_name.clone(),
                context_tweets: Vec::new(),
                low_context: true,
                set_index: set as u8,
                assigned_annotators: [annotators[set].clone(), annotators[(set + 1) % 3].clone()],
            });
        }
        offset += size;
    }
    Ok(tasks)
}

/// Tweet ids whose text contains any of a key's surface forms, found in one
/// pass over the index. Occurrences may overlap.
pub fn find_context(surfaces: &BTreeMap<String, BTreeSet<String>>, index: &ContextIndex) -> BTreeMap<String, BTreeSet<String>> {
    let mut matcher = PhraseMatcher::new(true);
    let mut owners: Vec<Vec<&str>> = Vec::new();
    for (key, forms) in surfaces {
        for s in forms {
            if let Some(id) = matcher.insert(&crate::text::normalize_phrase(s)) {
                if id == owners.len() {
                    owners.push(Vec::new());
                }
                owners[id].push(key);
            }
        }
    }
    let mut out: BTreeMap<String, BTreeSet<String>> = surfaces.keys().map(|k| (k.clone(), BTreeSet::new())).collect();
    if matcher.is_empty() {
        return out;
    }
    let mut chars = Vec::new();
    for (id, text) in index.iter() {
        chars.clear();
        chars.extend(text.chars());
        matcher.for_each_occurrence(&chars, |m| {
            for key in &owners[m.pattern] {
                out.get_mut(*key).expect("key present").insert(id.to_string());
            }
        });
    }
    out
}

/// Up to [`CONTEXT_LIMIT`] texts drawn deterministically from `ids`, in id
/// order.
pub fn sample_context(key: &str, ids: &BTreeSet<String>, index: &ContextIndex, seed: u64) -> Vec<String> {
    let all: Vec<&String> = ids.iter().collect();
    let mut picked: Vec<&String> = if all.len() <= CONTEXT_LIMIT {
        all
    } else {
        all.choose_multiple(&mut seeded_rng(seed, &format!("context\t{key}")), CONTEXT_LIMIT).copied().collect()
    };
    picked.sort();
    picked.into_iter().filter_map(|id| index.get(id)).map(str::to_string).collect()
}

/// Fills `context_tweets` for every task from the lemmas' surface forms.
pub fn attach_context(tasks: &mut [AnnotationTask], surfaces: &BTreeMap<String, BTreeSet<String>>, index: &ContextIndex, seed: u64) {
    let wanted: BTreeMap<String, BTreeSet<String>> = tasks
        .iter()
        .map(|t| (t.lemma.clone(), surfaces.get(&t.lemma).cloned().unwrap_or_default()))
        .collect();
    let hits = find_context(&wanted, index);
    for t in tasks {
        t.context_tweets = sample_context(&t.lemma, &hits[&t.lemma], index, seed);
        t.low_context = t.context_tweets.is_empty();
    }
}
