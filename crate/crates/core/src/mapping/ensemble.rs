//! Semantic and lexical top-1 search and their merge into candidates.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::embed::{cosine_with_norms, norm, EmbedError, Vectors};
use super::inventory::{match_key, ConceptInventory};
use super::levenshtein::{length_bound, similarity_chars};
use crate::util::{escape_field, fmt_score, unescape_field};

pub const CANDIDATES_HEADER: &str = "lemma\tconcept_id\tconcept_name\tscore\tchannel\tround";

#[derive(Debug, thiserror::Error)]
pub enum MappingError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("threshold {name} = {value} outside [0, 1]")]
    Threshold { name: &'static str, value: f64 },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("candidates line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Semantic,
    Lexical,
    Both,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::Semantic => "semantic",
            Channel::Lexical => "lexical",
            Channel::Both => "both",
        })
    }
}

impl FromStr for Channel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "semantic" => Ok(Channel::Semantic),
            "lexical" => Ok(Channel::Lexical),
            "both" => Ok(Channel::Both),
            other => Err(format!("unknown channel {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingCandidate {
    pub lemma: String,
    pub concept_id: String,
    pub score: f64,
    pub channel: Channel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub tau_semantic: f64,
    pub tau_lexical: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            tau_semantic: 0.8,
            tau_lexical: 0.8,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<(), MappingError> {
        for (name, value) in [("tau_semantic", self.tau_semantic), ("tau_lexical", self.tau_lexical)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(MappingError::Threshold { name, value });
            }
        }
        Ok(())
    }
}

/// Name vectors with cached norms, aligned with `inventory.names()`.
pub struct SemanticIndex {
    vectors: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

impl SemanticIndex {
    pub fn build(inventory: &ConceptInventory, vectors: &Vectors) -> Result<Self, EmbedError> {
        let vecs = vectors.resolve(inventory.names().iter().map(|n| n.key.as_str()))?;
        let norms = vecs.iter().map(|v| norm(v)).collect();
        Ok(Self { vectors: vecs, norms })
    }
}

/// Index of the winning concept and its clamped score. Names are stored in
/// concept-id order, so keeping the first strict maximum breaks ties toward
/// the smaller id.
fn semantic_best(v: &[f64], inventory: &ConceptInventory, index: &SemanticIndex) -> Result<(usize, f64), EmbedError> {
    let nv = norm(v);
    if nv == 0.0 {
        return Err(EmbedError::Degenerate(String::new()));
    }
    let mut best = (usize::MAX, f64::NEG_INFINITY);
    for (i, name) in inventory.names().iter().enumerate() {
        if index.vectors[i].len() != v.len() {
            return Err(EmbedError::Dimension {
                expected: v.len(),
                got: index.vectors[i].len(),
            });
        }
        let s = cosine_with_norms(v, nv, &index.vectors[i], index.norms[i]).clamp(0.0, 1.0);
        if s > best.1 {
            best = (name.concept, s);
        }
    }
    Ok(best)
}

fn lexical_best(lemma_key: &str, inventory: &ConceptInventory, row: &mut Vec<usize>) -> (usize, f64) {
    if let Some(c) = inventory.exact_concept(lemma_key) {
        return (c, 1.0);
    }
    let lc: Vec<char> = lemma_key.chars().collect();
    let mut best = (usize::MAX, f64::NEG_INFINITY);
    for name in inventory.names() {
        if length_bound(lc.len(), name.chars.len()) < best.1 {
            continue;
        }
        let s = similarity_chars(&lc, &name.chars, row);
        if s > best.1 {
            best = (name.concept, s);
        }
    }
    best
}

fn candidate(lemma: &str, inventory: &ConceptInventory, (c, score): (usize, f64), channel: Channel) -> MappingCandidate {
    MappingCandidate {
        lemma: lemma.to_string(),
        concept_id: inventory.concept_at(c).concept_id.clone(),
        score,
        channel,
    }
}

/// Concept whose best name is closest in embedding space.
pub fn semantic_top1(lemma: &str, inventory: &ConceptInventory, vectors: &Vectors) -> Result<MappingCandidate, MappingError> {
    let key = match_key(lemma);
    let all = vectors.resolve(std::iter::once(key.as_str()).chain(inventory.names().iter().map(|n| n.key.as_str())))?;
    let index = SemanticIndex {
        norms: all[1..].iter().map(|v| norm(v)).collect(),
        vectors: all[1..].to_vec(),
    };
    let best = semantic_best(&all[0], inventory, &index)?;
    Ok(candidate(lemma, inventory, best, Channel::Semantic))
}

/// Concept with the most similar name by normalized edit distance.
pub fn lexical_top1(lemma: &str, inventory: &ConceptInventory) -> MappingCandidate {
    let best = lexical_best(&match_key(lemma), inventory, &mut Vec::new());
    candidate(lemma, inventory, best, Channel::Lexical)
}

/// Both channels' unthresholded top-1 for one lemma.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaTop1 {
    pub lemma: String,
    pub semantic: MappingCandidate,
    pub lexical: MappingCandidate,
}

/// Top-1 per channel for every lemma, in input order.
pub fn top1_all(lemmas: &[String], inventory: &ConceptInventory, vectors: &Vectors) -> Result<Vec<LemmaTop1>, MappingError> {
    let keys: Vec<String> = lemmas.iter().map(|l| match_key(l)).collect();
    // resolve names and lemmas together so a failure lists every absent term
    let names = inventory.names().iter().map(|n| n.key.as_str());
    let all = vectors.resolve(names.chain(keys.iter().map(String::as_str)))?;
    let n_names = inventory.names().len();
    let index = SemanticIndex {
        norms: all[..n_names].iter().map(|v| norm(v)).collect(),
        vectors: all[..n_names].to_vec(),
    };
    let lemma_vecs = &all[n_names..];
    lemmas
        .par_iter()
        .zip(keys.par_iter())
        .zip(lemma_vecs.par_iter())
        .map_init(Vec::new, |row, ((lemma, key), v)| {
            let sem = semantic_best(v, inventory, &index)?;
            let lex = lexical_best(key, inventory, row);
            Ok(LemmaTop1 {
                lemma: lemma.clone(),
                semantic: candidate(lemma, inventory, sem, Channel::Semantic),
                lexical: candidate(lemma, inventory, lex, Channel::Lexical),
            })
        })
        .collect::<Result<Vec<_>, EmbedError>>()
        .map_err(MappingError::from)
}

/// Applies the per-channel thresholds and the agreement rule.
pub fn ensemble_from(top: &LemmaTop1, cfg: &ThresholdConfig) -> Vec<MappingCandidate> {
    let sem = (top.semantic.score >= cfg.tau_semantic).then(|| top.semantic.clone());
    let lex = (top.lexical.score >= cfg.tau_lexical).then(|| top.lexical.clone());
    match (sem, lex) {
        (Some(s), Some(l)) if s.concept_id == l.concept_id => vec![MappingCandidate {
            score: s.score.max(l.score),
            channel: Channel::Both,
            ..s
        }],
        (s, l) => s.into_iter().chain(l).collect(),
    }
}

pub fn ensemble_map(lemma: &str, inventory: &ConceptInventory, vectors: &Vectors, cfg: &ThresholdConfig) -> Result<Vec<MappingCandidate>, MappingError> {
    cfg.validate()?;
    let top = LemmaTop1 {
        lemma: lemma.to_string(),
        semantic: semantic_top1(lemma, inventory, vectors)?,
        lexical: lexical_top1(lemma, inventory),
    };
    Ok(ensemble_from(&top, cfg))
}

pub fn write_candidates<W: Write>(mut w: W, candidates: &[MappingCandidate], inventory: &ConceptInventory, round: u32) -> io::Result<()> {
    writeln!(w, "{CANDIDATES_HEADER}")?;
    for c in candidates {
        let name = inventory.get(&c.concept_id).map(|c| c.preferred_name.as_str()).unwrap_or("");
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{round}",
            escape_field(&c.lemma),
            escape_field(&c.concept_id),
            escape_field(name),
            fmt_score(c.score),
            c.channel
        )?;
    }
    w.flush()
}

/// Reads a candidates file back; returns candidates with their round.
pub fn read_candidates<R: BufRead>(r: R) -> Result<Vec<(MappingCandidate, u32)>, MappingError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let bad = |message: String| MappingError::Parse { line: i + 1, message };
        if i == 0 {
            if line != CANDIDATES_HEADER {
                return Err(bad("unexpected header".into()));
            }
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != 6 {
            return Err(bad(format!("expected 6 columns, got {}", cells.len())));
        }
        let score: f64 = cells[3].parse().map_err(|_| bad("bad score".into()))?;
        let channel: Channel = cells[4].parse().map_err(bad)?;
        let round: u32 = cells[5].parse().map_err(|_| bad("bad round".into()))?;
        out.push((
            MappingCandidate {
                lemma: unescape_field(cells[0]),
                concept_id: unescape_field(cells[1]),
                score,
                channel,
            },
            round,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::embed::{EmbeddingStore, TrigramEmbedder};
    use crate::mapping::inventory::Concept;
    use std::collections::BTreeSet;

    fn concept(id: &str, pref: &str, syns: &[&str]) -> Concept {
        Concept {
            concept_id: id.into(),
            preferred_name: pref.into(),
            synonyms: syns.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>(),
        }
    }

    fn store(entries: &[(&str, &[f64])]) -> EmbeddingStore {
        let mut s = EmbeddingStore::new(entries[0].1.len());
        for (t, v) in entries {
            s.insert(t, v.to_vec()).unwrap();
        }
        s
    }

    #[test]
    fn semantic_exact_and_angles() {
        let inv = ConceptInventory::new(vec![
            concept("A", "alpha", &[]),
            concept("B", "beta", &[]),
            concept("C", "gamma", &["gamma ray"]),
        ])
        .unwrap();
        let s = store(&[
            ("alpha", &[1.0, 0.0]),
            ("beta", &[0.0, 1.0]),
            ("gamma", &[-1.0, 0.0]),
            ("gamma ray", &[0.6, 0.8]),
            ("query", &[0.8, 0.6]),
            ("a twin", &[1.0, 0.0]),
        ]);
        let v = Vectors::store_only(&s);
        let c = semantic_top1("a twin", &inv, &v).unwrap();
        assert_eq!((c.concept_id.as_str(), c.score, c.channel), ("A", 1.0, Channel::Semantic));
        // query at 36.87 deg from alpha; gamma ray at 16.26 deg
        let c = semantic_top1("query", &inv, &v).unwrap();
        assert_eq!(c.concept_id, "C");
        assert!((c.score - 0.96).abs() < 1e-12);
    }

    #[test]
    fn semantic_tie_and_missing() {
        let inv = ConceptInventory::new(vec![concept("Z9", "zed", &[]), concept("A1", "ay", &[])]).unwrap();
        let s = store(&[("zed", &[1.0, 1.0]), ("ay", &[1.0, 1.0]), ("q", &[1.0, 0.0])]);
        let v = Vectors::store_only(&s);
        assert_eq!(semantic_top1("q", &inv, &v).unwrap().concept_id, "A1");
        match semantic_top1("absent", &inv, &v) {
            Err(MappingError::Embed(EmbedError::Missing(m))) => assert_eq!(m, vec!["absent"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_cosine_clamps() {
        let inv = ConceptInventory::new(vec![concept("A", "alpha", &[])]).unwrap();
        let s = store(&[("alpha", &[1.0, 0.0]), ("anti", &[-1.0, 0.0])]);
        assert_eq!(semantic_top1("anti", &inv, &Vectors::store_only(&s)).unwrap().score, 0.0);
    }

    #[test]
    fn lexical_examples() {
        let inv = ConceptInventory::new(vec![
            concept("C1", "Abdominal cramp", &[]),
            concept("C2", "Cough", &["tussis"]),
        ])
        .unwrap();
        let c = lexical_top1("abdominal cramps", &inv);
        assert_eq!((c.concept_id.as_str(), c.score), ("C1", 0.9375));
        assert_eq!(lexical_top1("tussis", &inv).score, 1.0);
        let single = ConceptInventory::new(vec![concept("X", "zzzz", &[])]).unwrap();
        assert_eq!(lexical_top1("a", &single).concept_id, "X");
    }

    fn top(sem: (&str, f64), lex: (&str, f64)) -> LemmaTop1 {
        let mk = |(c, s): (&str, f64), channel| MappingCandidate {
            lemma: "l".into(),
            concept_id: c.into(),
            score: s,
            channel,
        };
        LemmaTop1 {
            lemma: "l".into(),
            semantic: mk(sem, Channel::Semantic),
            lexical: mk(lex, Channel::Lexical),
        }
    }

    #[test]
    fn ensemble_rules() {
        let cfg = ThresholdConfig::default();
        let both = ensemble_from(&top(("A", 0.9), ("A", 0.95)), &cfg);
        assert_eq!(both.len(), 1);
        assert_eq!((both[0].channel, both[0].score), (Channel::Both, 0.95));
        let split = ensemble_from(&top(("A", 0.9), ("B", 0.85)), &cfg);
        assert_eq!(split.iter().map(|c| (c.concept_id.as_str(), c.channel)).collect::<Vec<_>>(), vec![("A", Channel::Semantic), ("B", Channel::Lexical)]);
        assert!(ensemble_from(&top(("A", 0.5), ("A", 0.5)), &cfg).is_empty());
        let one = ensemble_from(&top(("A", 0.5), ("A", 0.8)), &cfg);
        assert_eq!(one[0].channel, Channel::Lexical);
        assert!(ThresholdConfig { tau_semantic: 1.5, tau_lexical: 0.1 }.validate().is_err());
    }

    #[test]
    fn batch_matches_single_and_round_trips() {
        let inv = ConceptInventory::new(vec![
            concept("C1", "Fever", &["pyrexia"]),
            concept("C2", "Cough", &["dry cough"]),
            concept("C3", "Headache", &["head pain"]),
        ])
        .unwrap();
        let s = EmbeddingStore::new(32);
        let tri = TrigramEmbedder { dim: 32 };
        let v = Vectors {
            store: &s,
            fallback: Some(&tri),
        };
        let lemmas: Vec<String> = ["fever", "coughs", "head hurt", "pyrexia"].iter().map(|s| s.to_string()).collect();
        let tops = top1_all(&lemmas, &inv, &v).unwrap();
        for t in &tops {
            assert_eq!(t.semantic, semantic_top1(&t.lemma, &inv, &v).unwrap());
            assert_eq!(t.lexical, lexical_top1(&t.lemma, &inv));
        }
        let cands: Vec<MappingCandidate> = tops.iter().flat_map(|t| ensemble_from(t, &ThresholdConfig::default())).collect();
        let mut buf = Vec::new();
        write_candidates(&mut buf, &cands, &inv, 1).unwrap();
        let back = read_candidates(&buf[..]).unwrap();
        assert_eq!(back.len(), cands.len());
        for ((c, r), orig) in back.iter().zip(&cands) {
            assert_eq!(*r, 1);
            assert_eq!((&c.lemma, &c.concept_id, c.channel), (&orig.lemma, &orig.concept_id, orig.channel));
            assert!((c.score - orig.score).abs() < 1e-6);
        }
    }
}
