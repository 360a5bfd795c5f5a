//! Applies a finished dictionary to a corpus.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::AnalyticsError;
use crate::curation::Dictionary;
use crate::text::{normalize_phrase, PhraseMatcher};

/// Multi-pattern matcher over every surface form in a dictionary.
#[derive(Debug, Clone)]
pub struct DictionaryMatcher {
    matcher: PhraseMatcher,
    // pattern id -> concept indices
    owners: Vec<Vec<u32>>,
    concept_ids: Vec<String>,
    concept_names: Vec<String>,
}

impl DictionaryMatcher {
    pub fn new(dict: &Dictionary) -> Result<Self, AnalyticsError> {
        if dict.is_empty() {
            return Err(AnalyticsError::EmptyDictionary);
        }
        let mut concept_ids: Vec<String> = Vec::new();
        let mut index: BTreeMap<&str, u32> = BTreeMap::new();
        let mut matcher = PhraseMatcher::new(true);
        let mut owners: Vec<Vec<u32>> = Vec::new();
        for (surface, cid) in dict.surfaces() {
            let ci = *index.entry(cid).or_insert_with(|| {
                concept_ids.push(cid.to_string());
                (concept_ids.len() - 1) as u32
            });
            if let Some(p) = matcher.insert(&normalize_phrase(surface)) {
                if p == owners.len() {
                    owners.push(Vec::new());
                }
                if !owners[p].contains(&ci) {
                    owners[p].push(ci);
                }
            }
        }
        let concept_names = concept_ids.iter().map(|c| dict.concept_name(c).unwrap_or(c).to_string()).collect();
        Ok(Self {
            matcher,
            owners,
            concept_ids,
            concept_names,
        })
    }

    pub fn concept_count(&self) -> usize {
        self.concept_ids.len()
    }

    /// Concept indices hit by one pre-cleaned text, each at most once,
    /// written into `hits` (cleared first). `chars` is scratch space.
    pub fn hits_into(&self, text: &str, chars: &mut Vec<char>, hits: &mut Vec<u32>) {
        chars.clear();
        chars.extend(text.chars());
        hits.clear();
        self.matcher.for_each_match(chars, |m| hits.extend_from_slice(&self.owners[m.pattern]));
        hits.sort_unstable();
        hits.dedup();
    }

    /// Concept ids hit by one pre-cleaned text, sorted.
    pub fn concepts_in(&self, text: &str) -> Vec<&str> {
        let mut hits = Vec::new();
        self.hits_into(text, &mut Vec::new(), &mut hits);
        let mut ids: Vec<&str> = hits.iter().map(|&i| self.concept_ids[i as usize].as_str()).collect();
        ids.sort_unstable();
        ids
    }

    /// Aggregate counts over pre-cleaned texts, in parallel.
    pub fn match_texts<S: AsRef<str> + Sync>(&self, texts: &[S]) -> MatchCounts {
        let k = self.concept_ids.len();
        let (tweets, matched, counts) = texts
            .par_chunks(4096)
            .map(|chunk| {
                let mut counts = vec![0u64; k];
                let mut matched = 0u64;
                let mut chars = Vec::new();
                let mut hits = Vec::new();
                for t in chunk {
                    self.hits_into(t.as_ref(), &mut chars, &mut hits);
                    matched += u64::from(!hits.is_empty());
                    for &h in &hits {
                        counts[h as usize] += 1;
                    }
                }
                (chunk.len() as u64, matched, counts)
            })
            .reduce(
                || (0, 0, vec![0u64; k]),
                |mut a, b| {
                    a.0 += b.0;
                    a.1 += b.1;
                    a.2.iter_mut().zip(&b.2).for_each(|(x, y)| *x += y);
                    a
                },
            );
        MatchCounts {
            tweets,
            matched_tweets: matched,
            by_concept: (0..k)
                .filter(|&i| counts[i] > 0)
                .map(|i| {
                    (
                        self.concept_ids[i].clone(),
                        ConceptCount {
                            concept_name: self.concept_names[i].clone(),
                            count: counts[i],
                        },
                    )
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConceptCount {
    pub concept_name: String,
    pub count: u64,
}

/// Tweets seen, tweets with at least one hit (the report denominator), and
/// per-concept tweet counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MatchCounts {
    pub tweets: u64,
    pub matched_tweets: u64,
    pub by_concept: BTreeMap<String, ConceptCount>,
}

impl MatchCounts {
    pub fn merge(mut self, other: MatchCounts) -> MatchCounts {
        self.tweets += other.tweets;
        self.matched_tweets += other.matched_tweets;
        for (cid, c) in other.by_concept {
            self.by_concept
                .entry(cid)
                .and_modify(|e| e.count += c.count)
                .or_insert(c);
        }
        self
    }

    /// Counts keyed by concept name. Distinct concepts sharing a name are
    /// summed.
    pub fn by_name(&self) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        for c in self.by_concept.values() {
            *out.entry(c.concept_name.clone()).or_insert(0) += c.count;
        }
        out
    }

    pub const HEADER: &'static str = "concept_id\tconcept_name\tcount";

    pub fn write_tsv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# tweets={} matched={}", self.tweets, self.matched_tweets)?;
        writeln!(w, "{}", Self::HEADER)?;
        for (cid, c) in &self.by_concept {
            writeln!(w, "{}\t{}\t{}", crate::util::escape_field(cid), crate::util::escape_field(&c.concept_name), c.count)?;
        }
        Ok(())
    }
}

impl MatchCounts {
    /// Reads what [`write_tsv`](Self::write_tsv) wrote.
    pub fn read_tsv<R: std::io::BufRead>(r: R) -> Result<Self, AnalyticsError> {
        let perr = |line: usize, message: String| AnalyticsError::Parse { what: "match counts", line, message };
        let mut out = MatchCounts::default();
        let mut saw_meta = false;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if let Some(meta) = line.strip_prefix('#') {
                for kv in meta.split_whitespace() {
                    let parse = |v: &str| v.parse::<u64>().map_err(|_| perr(lineno, format!("bad number {v:?}")));
                    match kv.split_once('=') {
                        Some(("tweets", v)) => out.tweets = parse(v)?,
                        Some(("matched", v)) => {
                            out.matched_tweets = parse(v)?;
                            saw_meta = true;
                        }
                        _ => {}
                    }
                }
                continue;
            }
            if line.is_empty() || line == Self::HEADER {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(perr(lineno, format!("expected 3 columns, got {}", cols.len())));
            }
            let count = cols[2].parse().map_err(|_| perr(lineno, format!("bad count {:?}", cols[2])))?;
            out.by_concept.insert(
                crate::util::unescape_field(cols[0]),
                ConceptCount {
                    concept_name: crate::util::unescape_field(cols[1]),
                    count,
                },
            );
        }
        if !saw_meta {
            return Err(perr(0, "missing '# tweets=.. matched=..' line".into()));
        }
        Ok(out)
    }
}

/// Convenience wrapper: build the matcher and count.
pub fn match_corpus<S: AsRef<str> + Sync>(texts: &[S], dict: &Dictionary) -> Result<MatchCounts, AnalyticsError> {
    Ok(DictionaryMatcher::new(dict)?.match_texts(texts))
}
