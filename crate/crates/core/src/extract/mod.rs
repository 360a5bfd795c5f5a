//! Tweet pre-cleaning and symptom mention extraction.
//!
//! Extraction goes through the [`Extractor`] trait so that an external neural
//! tagger ([`RemoteExtractor`]) and the deterministic [`Gazetteer`] reference
//! implementation are interchangeable. Every extractor's output is validated
//! against the [`EntityMention`] invariants before it enters the pipeline.

mod remote;

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{normalize_phrase, PhraseMatcher};
use crate::util::{escape_field, unescape_field};

pub use remote::{RemoteConfig, RemoteExtractor};

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("extractor unavailable for tweet {tweet_id}: {message}")]
    Unavailable { tweet_id: String, message: String },
    #[error("invalid extractor response for tweet {tweet_id}: {message}")]
    InvalidResponse { tweet_id: String, message: String },
}

impl ExtractError {
    pub fn tweet_id(&self) -> &str {
        match self {
            ExtractError::Unavailable { tweet_id, .. } | ExtractError::InvalidResponse { tweet_id, .. } => tweet_id,
        }
    }
}

#[derive(Debug, Error)]
pub enum AssetError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("gazetteer is empty")]
    EmptyGazetteer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EntityType {
    Symptom,
}

/// A symptom span in pre-cleaned tweet text; offsets are in chars.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub tweet_id: String,
    pub surface: String,
    pub start: usize,
    pub end: usize,
    pub entity_type: EntityType,
}

/// A raw span as produced by an extractor, before validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

pub trait Extractor: Send + Sync {
    /// Returns SYMPTOM spans in char offsets of `text`.
    fn spans(&self, tweet_id: &str, text: &str) -> Result<Vec<Span>, ExtractError>;
}

/// Emoji sequence to textual alias, e.g. `😷` to `:face_with_medical_mask:`.
#[derive(Debug, Clone)]
pub struct EmojiMap {
    matcher: PhraseMatcher,
    aliases: Vec<String>,
}

impl Default for EmojiMap {
    fn default() -> Self {
        Self::parse(include_str!("../../assets/emoji.tsv")).expect("bundled emoji table parses")
    }
}

impl EmojiMap {
    pub fn empty() -> Self {
        Self {
            matcher: PhraseMatcher::new(false),
            aliases: Vec::new(),
        }
    }

    /// Parses `emoji TAB alias` lines. The emoji column is either the literal
    /// sequence or space-separated `U+XXXX` code points. `#` starts a comment.
    pub fn parse(src: &str) -> Result<Self, AssetError> {
        let mut map = Self::empty();
        for (i, line) in src.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, alias) = line.split_once('\t').ok_or_else(|| AssetError::Parse {
                line: line_no,
                message: "expected emoji<TAB>alias".into(),
            })?;
            let key = parse_codepoints(key.trim()).ok_or_else(|| AssetError::Parse {
                line: line_no,
                message: format!("bad emoji column {key:?}"),
            })?;
            let alias = alias.trim();
            if alias.is_empty() || !alias.chars().all(|c| c.is_ascii_graphic() && c != '<' && c != '>') {
                return Err(AssetError::Parse {
                    line: line_no,
                    message: format!("alias {alias:?} must be non-empty printable ASCII without spaces or angle brackets"),
                });
            }
            map.insert(&key, alias);
        }
        Ok(map)
    }

    pub fn insert(&mut self, emoji: &str, alias: &str) {
        if let Some(id) = self.matcher.insert(emoji) {
            if id == self.aliases.len() {
                self.aliases.push(alias.to_string());
            } else {
                self.aliases[id] = alias.to_string();
            }
        }
    }

    pub fn len(&self) -> usize {
        self.aliases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aliases.is_empty()
    }
}

fn parse_codepoints(s: &str) -> Option<String> {
    if !s.starts_with("U+") && !s.starts_with("u+") {
        return (!s.is_empty()).then(|| s.to_string());
    }
    s.split_whitespace()
        .map(|cp| {
            let hex = cp.strip_prefix("U+").or_else(|| cp.strip_prefix("u+"))?;
            char::from_u32(u32::from_str_radix(hex, 16).ok()?)
        })
        .collect()
}

fn strip_tags(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('<') {
        match rest[open..].find('>') {
            Some(close) => {
                out.push_str(&rest[..open]);
                rest = &rest[open + close + 1..];
            }
            None => break,
        }
    }
    out.push_str(rest);
    out
}

/// Strips HTML tags (`<` up to the next `>`), replaces mapped emoji with their
/// alias padded by spaces, collapses whitespace and trims. Entities such as
/// `&amp;` are left alone. Idempotent.
pub fn preclean_text(text: &str, emoji: &EmojiMap) -> String {
    let stripped = strip_tags(text);
    let replaced = if emoji.is_empty() {
        stripped
    } else {
        let chars: Vec<char> = stripped.chars().collect();
        let mut out = String::with_capacity(stripped.len() + 16);
        let mut at = 0;
        emoji.matcher.for_each_match(&chars, |m| {
            out.extend(&chars[at..m.start]);
            out.push(' ');
            out.push_str(&emoji.aliases[m.pattern]);
            out.push(' ');
            at = m.end;
        });
        out.extend(&chars[at..]);
        out
    };
    let mut out = String::with_capacity(replaced.len());
    for word in replaced.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Phrase list used by the reference extractor. Terms are lowercased and
/// single-spaced on insertion.
#[derive(Debug, Clone)]
pub struct Gazetteer {
    matcher: PhraseMatcher,
}

impl Gazetteer {
    pub fn new<I, S>(terms: I) -> Result<Self, AssetError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut matcher = PhraseMatcher::new(true);
        for t in terms {
            matcher.insert(&normalize_phrase(t.as_ref()));
        }
        if matcher.is_empty() {
            return Err(AssetError::EmptyGazetteer);
        }
        Ok(Self { matcher })
    }

    /// One phrase per line; blank lines are skipped.
    pub fn parse(src: &str) -> Result<Self, AssetError> {
        Self::new(src.lines().filter(|l| !l.trim().is_empty()))
    }

    pub fn len(&self) -> usize {
        self.matcher.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matcher.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        (0..self.matcher.len()).map(|i| self.matcher.pattern(i))
    }
}

impl Extractor for Gazetteer {
    fn spans(&self, _tweet_id: &str, text: &str) -> Result<Vec<Span>, ExtractError> {
        Ok(self
            .matcher
            .find_iter(text)
            .into_iter()
            .map(|m| Span { start: m.start, end: m.end })
            .collect())
    }
}

/// Case-insensitive, token-boundary, leftmost-longest gazetteer matching.
pub fn gazetteer_extract(tweet_id: &str, text: &str, gazetteer: &Gazetteer) -> Vec<EntityMention> {
    extract_entities(tweet_id, text, gazetteer).expect("gazetteer spans are valid by construction")
}

/// Runs an extractor on pre-cleaned text and validates what it returns:
/// offsets in range, non-empty, non-overlapping. Output is sorted by start.
pub fn extract_entities(tweet_id: &str, text: &str, extractor: &dyn Extractor) -> Result<Vec<EntityMention>, ExtractError> {
    let mut spans = extractor.spans(tweet_id, text)?;
    let chars: Vec<char> = text.chars().collect();
    validate_spans(tweet_id, &chars, &mut spans)?;
    Ok(spans
        .into_iter()
        .map(|s| EntityMention {
            tweet_id: tweet_id.to_string(),
            surface: chars[s.start..s.end].iter().collect(),
            start: s.start,
            end: s.end,
            entity_type: EntityType::Symptom,
        })
        .collect())
}

pub(crate) fn validate_spans(tweet_id: &str, chars: &[char], spans: &mut [Span]) -> Result<(), ExtractError> {
    let invalid = |message: String| ExtractError::InvalidResponse {
        tweet_id: tweet_id.to_string(),
        message,
    };
    for s in spans.iter() {
        if s.start >= s.end || s.end > chars.len() {
            return Err(invalid(format!("span [{}, {}) outside text of length {}", s.start, s.end, chars.len())));
        }
    }
    spans.sort_by_key(|s| (s.start, s.end));
    if let Some(w) = spans.windows(2).find(|w| w[1].start < w[0].end) {
        return Err(invalid(format!(
            "overlapping spans [{}, {}) and [{}, {})",
            w[0].start, w[0].end, w[1].start, w[1].end
        )));
    }
    Ok(())
}

/// Extracts from many `(tweet_id, precleaned_text)` pairs on a pool of
/// `parallelism` workers. Results keep input order; the first failure wins.
pub fn extract_all(
    docs: &[(String, String)],
    extractor: &dyn Extractor,
    parallelism: usize,
) -> Result<Vec<Vec<EntityMention>>, ExtractError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| {
        docs.par_iter()
            .map(|(id, text)| extract_entities(id, text, extractor))
            .collect()
    })
}

pub const MENTIONS_HEADER: &str = "tweet_id\tstart\tend\tsurface";

pub fn write_mentions<'a, W, I>(mut w: W, mentions: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a EntityMention>,
{
    writeln!(w, "{MENTIONS_HEADER}")?;
    for m in mentions {
        writeln!(w, "{}\t{}\t{}\t{}", escape_field(&m.tweet_id), m.start, m.end, escape_field(&m.surface))?;
    }
    w.flush()
}

pub fn read_mentions<R: BufRead>(r: R) -> Result<Vec<EntityMention>, AssetError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line != MENTIONS_HEADER {
                return Err(AssetError::Parse {
                    line: 1,
                    message: format!("expected header {MENTIONS_HEADER:?}"),
                });
            }
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        let bad = || AssetError::Parse {
            line: i + 1,
            message: "expected tweet_id, start, end, surface".into(),
        };
        if cells.len() != 4 {
            return Err(bad());
        }
        out.push(EntityMention {
            tweet_id: unescape_field(cells[0]),
            start: cells[1].parse().map_err(|_| bad())?,
            end: cells[2].parse().map_err(|_| bad())?,
            surface: unescape_field(cells[3]),
            entity_type: EntityType::Symptom,
        });
    }
    Ok(out)
}

/// Per-surface mention counts, handy for reports.
pub fn surface_counts<'a>(mentions: impl IntoIterator<Item = &'a EntityMention>) -> BTreeMap<&'a str, u64> {
    let mut out = BTreeMap::new();
    for m in mentions {
        *out.entry(m.surface.as_str()).or_insert(0) += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::oracle::brute_force;
    use proptest::prelude::*;

    fn mask_map() -> EmojiMap {
        let mut m = EmojiMap::empty();
        m.insert("😷", ":face_with_medical_mask:");
        m
    }

    #[test]
    fn strips_html() {
        assert_eq!(preclean_text("I have a <b>fever</b>", &EmojiMap::empty()), "I have a fever");
        assert_eq!(preclean_text("a &amp; b", &EmojiMap::empty()), "a &amp; b");
        assert_eq!(preclean_text("1 < 2 and more", &EmojiMap::empty()), "1 < 2 and more");
    }

    #[test]
    fn replaces_emoji() {
        assert_eq!(preclean_text("sick 😷 today", &mask_map()), "sick :face_with_medical_mask: today");
        assert_eq!(preclean_text("sick😷today", &mask_map()), "sick :face_with_medical_mask: today");
        assert_eq!(preclean_text("no markup here", &mask_map()), "no markup here");
    }

    #[test]
    fn codepoint_column() {
        let m = EmojiMap::parse("U+1F637\t:mask:\n# comment\n🤒\t:thermometer_face:\n").unwrap();
        assert_eq!(preclean_text("😷🤒", &m), ":mask: :thermometer_face:");
        assert!(EmojiMap::parse("😷\thas space\n").is_err());
    }

    #[test]
    fn bundled_emoji_table_loads() {
        let m = EmojiMap::default();
        assert!(m.len() > 20);
        assert_eq!(preclean_text("ugh 😷", &m), "ugh :face_with_medical_mask:");
    }

    #[test]
    fn gazetteer_examples() {
        let g = Gazetteer::new(["fever"]).unwrap();
        let hits = gazetteer_extract("t", "i have a fever", &g);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].surface, "fever");
        assert_eq!((hits[0].start, hits[0].end), (9, 14));
        assert!(gazetteer_extract("t", "feverish dreams", &g).is_empty());

        let g = Gazetteer::new(["sore throat", "throat"]).unwrap();
        let hits = gazetteer_extract("t", "my sore throat", &g);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].surface, "sore throat");
    }

    #[test]
    fn gazetteer_keeps_original_case() {
        let g = Gazetteer::new(["Sore  Throat"]).unwrap();
        assert_eq!(g.terms().collect::<Vec<_>>(), vec!["sore throat"]);
        let hits = gazetteer_extract("t", "My SORE THROAT hurts", &g);
        assert_eq!(hits[0].surface, "SORE THROAT");
        assert!(Gazetteer::parse("\n\n").is_err());
    }

    struct Fixed(Vec<Span>);

    impl Extractor for Fixed {
        fn spans(&self, _: &str, _: &str) -> Result<Vec<Span>, ExtractError> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn rejects_bad_spans() {
        let out_of_range = Fixed(vec![Span { start: 2, end: 40 }]);
        assert!(matches!(
            extract_entities("t1", "short", &out_of_range),
            Err(ExtractError::InvalidResponse { tweet_id, .. }) if tweet_id == "t1"
        ));
        let overlapping = Fixed(vec![Span { start: 0, end: 3 }, Span { start: 2, end: 4 }]);
        assert!(extract_entities("t", "abcdef", &overlapping).is_err());
        let empty = Fixed(vec![Span { start: 2, end: 2 }]);
        assert!(extract_entities("t", "abcdef", &empty).is_err());
    }

    #[test]
    fn mentions_tsv_round_trip() {
        let g = Gazetteer::new(["fever", "cough"]).unwrap();
        let ms = gazetteer_extract("id\t1", "fever and cough", &g);
        let mut buf = Vec::new();
        write_mentions(&mut buf, &ms).unwrap();
        assert_eq!(read_mentions(&buf[..]).unwrap(), ms);
    }

    #[test]
    fn extract_all_keeps_order() {
        let g = Gazetteer::new(["fever"]).unwrap();
        let docs: Vec<(String, String)> = (0..50).map(|i| (i.to_string(), if i % 2 == 0 { "fever".into() } else { "ok".into() })).collect();
        let out = extract_all(&docs, &g, 3).unwrap();
        for (i, ms) in out.iter().enumerate() {
            assert_eq!(ms.len(), usize::from(i % 2 == 0));
        }
    }

    fn text_strategy() -> impl Strategy<Value = String> {
        proptest::collection::vec(prop_oneof!["fever", "sore", "throat", " ", "ish", "-", "<b>", "</b>", "😷", "  ", "\t"], 0..10)
            .prop_map(|v| v.concat())
    }

    proptest! {
        #[test]
        fn preclean_idempotent(s in text_strategy(), raw in "\\PC{0,20}") {
            let m = mask_map();
            for x in [s, raw] {
                let once = preclean_text(&x, &m);
                prop_assert_eq!(preclean_text(&once, &m), once.clone());
            }
        }

        #[test]
        fn gazetteer_matches_oracle(
            terms in proptest::collection::vec(prop_oneof!["fever", "sore throat", "throat", "sore", "fever-ish"], 1..4),
            text in text_strategy(),
        ) {
            let g = Gazetteer::new(&terms).unwrap();
            let text = preclean_text(&text, &EmojiMap::empty());
            let got = gazetteer_extract("t", &text, &g);
            let want = brute_force(&terms, &text, true);
            prop_assert_eq!(got.len(), want.len());
            let folded: Vec<String> = terms.iter().map(|t| normalize_phrase(t)).collect();
            for (m, w) in got.iter().zip(&want) {
                prop_assert_eq!((m.start, m.end), (w.0, w.1));
                prop_assert!(folded.contains(&normalize_phrase(&m.surface)));
            }
            prop_assert!(got.windows(2).all(|w| w[0].end <= w[1].start));
        }
    }
}
