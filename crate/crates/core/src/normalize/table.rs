//! Lemma aggregation: counts, surface multiplicities and a capped,
//! deterministic sample of tweet ids per lemma.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::extract::EntityMention;
use crate::util::{escape_field, escape_item, rsplit_unescaped, split_items, stable_hash, unescape_field};

pub const DEFAULT_SAMPLE_CAP: usize = 50;
pub const LEMMA_TABLE_HEADER: &str = "lemma\tcount\tsurfaces\tsample_ids";

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("lemma table line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaRecord {
    pub lemma: String,
    pub count: u64,
    pub surface_forms: BTreeMap<String, u64>,
    /// Bottom-k tweet ids by seeded hash, ascending by (hash, id).
    samples: Vec<(u64, String)>,
}

impl LemmaRecord {
    fn new(lemma: &str) -> Self {
        Self {
            lemma: lemma.to_string(),
            count: 0,
            surface_forms: BTreeMap::new(),
            samples: Vec::new(),
        }
    }

    pub fn sample_tweet_ids(&self) -> impl Iterator<Item = &str> {
        self.samples.iter().map(|(_, id)| id.as_str())
    }

    fn add_sample(&mut self, hash: u64, id: &str, cap: usize) {
        let key = (hash, id);
        let pos = match self.samples.binary_search_by(|(h, i)| (*h, i.as_str()).cmp(&key)) {
            Ok(_) => return,
            Err(p) => p,
        };
        if pos >= cap {
            return;
        }
        self.samples.insert(pos, (hash, id.to_string()));
        self.samples.truncate(cap);
    }

    fn merge(&mut self, other: LemmaRecord, cap: usize) {
        self.count += other.count;
        for (s, c) in other.surface_forms {
            *self.surface_forms.entry(s).or_insert(0) += c;
        }
        for (h, id) in other.samples {
            self.add_sample(h, &id, cap);
        }
    }
}

/// Map lemma to record. The sample cap and seed travel with the table so that
/// merges of partial tables stay deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LemmaTable {
    records: BTreeMap<String, LemmaRecord>,
    cap: usize,
    seed: u64,
}

impl LemmaTable {
    pub fn new(cap: usize, seed: u64) -> Self {
        Self {
            records: BTreeMap::new(),
            cap,
            seed,
        }
    }

    pub fn add(&mut self, tweet_id: &str, surface: &str, lemma: &str) {
        let cap = self.cap;
        let hash = stable_hash(self.seed, tweet_id.as_bytes());
        let rec = self.records.entry(lemma.to_string()).or_insert_with(|| LemmaRecord::new(lemma));
        rec.count += 1;
        *rec.surface_forms.entry(surface.to_string()).or_insert(0) += 1;
        rec.add_sample(hash, tweet_id, cap);
    }

    /// Commutative, associative merge.
    pub fn merge(mut self, other: LemmaTable) -> LemmaTable {
        let (mut big, small) = if self.records.len() >= other.records.len() {
            (std::mem::take(&mut self.records), other.records)
        } else {
            (other.records, std::mem::take(&mut self.records))
        };
        for (lemma, rec) in small {
            match big.get_mut(&lemma) {
                Some(existing) => existing.merge(rec, self.cap),
                None => {
                    big.insert(lemma, rec);
                }
            }
        }
        self.records = big;
        self
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, lemma: &str) -> Option<&LemmaRecord> {
        self.records.get(lemma)
    }

    pub fn records(&self) -> impl Iterator<Item = &LemmaRecord> {
        self.records.values()
    }

    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.records.keys().map(String::as_str)
    }

    pub fn total_count(&self) -> u64 {
        self.records.values().map(|r| r.count).sum()
    }

    pub fn counts(&self) -> Vec<u64> {
        self.records.values().map(|r| r.count).collect()
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{LEMMA_TABLE_HEADER}")?;
        for r in self.records.values() {
            let surfaces: Vec<String> = r.surface_forms.iter().map(|(s, c)| format!("{}:{c}", escape_item(s))).collect();
            let ids: Vec<String> = r.samples.iter().map(|(_, id)| escape_item(id)).collect();
            writeln!(w, "{}\t{}\t{}\t{}", escape_field(&r.lemma), r.count, escape_field(&surfaces.join(";")), escape_field(&ids.join(",")))?;
        }
        w.flush()
    }

    pub fn read_tsv<R: BufRead>(r: R, cap: usize, seed: u64) -> Result<Self, TableError> {
        let mut table = Self::new(cap, seed);
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let bad = |message: &str| TableError::Parse {
                line: i + 1,
                message: message.to_string(),
            };
            if i == 0 {
                if line != LEMMA_TABLE_HEADER {
                    return Err(bad("unexpected header"));
                }
                continue;
            }
            let cells: Vec<&str> = line.split('\t').collect();
            if cells.len() != 4 {
                return Err(bad("expected 4 columns"));
            }
            let lemma = unescape_field(cells[0]);
            let mut rec = LemmaRecord::new(&lemma);
            rec.count = cells[1].parse().map_err(|_| bad("bad count"))?;
            let surfaces = unescape_field(cells[2]);
            for pair in split_raw(&surfaces, ';') {
                let (item, count) = rsplit_unescaped(pair, ':').ok_or_else(|| bad("surface without count"))?;
                let surface = split_items(item, ';').pop().unwrap_or_default();
                rec.surface_forms.insert(surface, count.parse().map_err(|_| bad("bad surface count"))?);
            }
            for id in split_items(&unescape_field(cells[3]), ',') {
                rec.samples.push((stable_hash(seed, id.as_bytes()), id));
            }
            rec.samples.sort();
            if rec.surface_forms.values().sum::<u64>() != rec.count {
                return Err(bad("count differs from the sum of surface counts"));
            }
            table.records.insert(lemma, rec);
        }
        Ok(table)
    }

    fn retain(&mut self, keep: impl Fn(&LemmaRecord) -> bool) {
        self.records.retain(|_, r| keep(r));
    }
}

/// Splits on unescaped `sep` without unescaping.
fn split_raw(s: &str, sep: char) -> Vec<&str> {
    if s.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut start = 0;
    let mut escaped = false;
    for (i, c) in s.char_indices() {
        if escaped {
            escaped = false;
        } else if c == '\\' {
            escaped = true;
        } else if c == sep {
            out.push(&s[start..i]);
            start = i + 1;
        }
    }
    out.push(&s[start..]);
    out
}

/// Sums (mention, lemma) pairs into a table.
pub fn aggregate<'a, I>(pairs: I, cap: usize, seed: u64) -> LemmaTable
where
    I: IntoIterator<Item = (&'a EntityMention, &'a str)>,
{
    let mut table = LemmaTable::new(cap, seed);
    for (m, lemma) in pairs {
        table.add(&m.tweet_id, &m.surface, lemma);
    }
    table
}

/// Keeps records with `count >= min_count`.
pub fn frequency_filter(table: &LemmaTable, min_count: u64) -> LemmaTable {
    let mut out = table.clone();
    out.retain(|r| r.count >= min_count.max(1));
    out
}
