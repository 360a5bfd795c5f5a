//! Tweet ingestion, inclusion filtering and the on-disk context index.
//!
//! Two corpus encodings are accepted:
//!
//! * JSON Lines: one object per line with `id`, `text`, `lang`, `created_at`
//!   (RFC 3339), `is_retweet` and `has_url`.
//! * TSV: a header row naming the same columns, tab-separated, with literal
//!   tabs and newlines in cells escaped as `\t` and `\n`.
//!
//! Malformed lines are counted and skipped. A file where more than half of the
//! non-blank lines are malformed is reported as a format error since that
//! almost always means the wrong format tag was given.

use std::collections::BTreeSet;
use std::io::{self, BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::{escape_field, unescape_field};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error reading corpus: {0}")]
    Io(#[from] io::Error),
    #[error("corpus format error: {malformed} of {lines} lines malformed (wrong format?)")]
    Format { malformed: u64, lines: u64 },
    #[error("corpus format error: {0}")]
    Header(String),
    #[error("duplicate tweet id {0:?} in corpus")]
    DuplicateId(String),
    #[error("context index is corrupt: {0}")]
    CorruptIndex(String),
    #[error("empty language set in filter policy")]
    EmptyPolicy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    pub text: String,
    pub lang: String,
    pub created_at: DateTime<Utc>,
    pub is_retweet: bool,
    pub has_url: bool,
}

/// Substring test used when a record carries no `has_url` field.
pub fn text_has_url(text: &str) -> bool {
    text.contains("http://") || text.contains("https://") || text.contains("www.")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    JsonLines,
    Tsv,
}

impl CorpusFormat {
    /// Guesses the format from a file extension (`.tsv` or anything else).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("tab") => CorpusFormat::Tsv,
            _ => CorpusFormat::JsonLines,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" | "json-lines" | "ndjson" => Ok(CorpusFormat::JsonLines),
            "tsv" => Ok(CorpusFormat::Tsv),
            other => Err(format!("unknown corpus format {other:?} (expected jsonl or tsv)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterPolicy {
    allowed_langs: BTreeSet<String>,
    pub drop_retweets: bool,
    pub drop_url_tweets: bool,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self {
            allowed_langs: BTreeSet::from(["en".to_string()]),
            drop_retweets: true,
            drop_url_tweets: true,
        }
    }
}

impl FilterPolicy {
    pub fn new<I, S>(langs: I, drop_retweets: bool, drop_url_tweets: bool) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let allowed_langs: BTreeSet<String> = langs.into_iter().map(Into::into).collect();
        if allowed_langs.is_empty() {
            return Err(CorpusError::EmptyPolicy);
        }
        Ok(Self {
            allowed_langs,
            drop_retweets,
            drop_url_tweets,
        })
    }

    pub fn allowed_langs(&self) -> &BTreeSet<String> {
        &self.allowed_langs
    }
}

/// Inclusion filter: allowed language, and neither a retweet nor a URL tweet
/// unless the policy keeps those.
pub fn admit(tweet: &Tweet, policy: &FilterPolicy) -> bool {
    policy.allowed_langs.contains(&tweet.lang)
        && (!policy.drop_retweets || !tweet.is_retweet)
        && (!policy.drop_url_tweets || !tweet.has_url)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadStats {
    /// Non-blank lines seen (excluding the TSV header).
    pub lines: u64,
    pub records: u64,
    pub malformed: u64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawId {
    Text(String),
    Number(u64),
}

#[derive(Deserialize)]
struct RawTweet {
    id: RawId,
    text: String,
    lang: String,
    created_at: DateTime<Utc>,
    #[serde(default)]
    is_retweet: bool,
    #[serde(default)]
    has_url: Option<bool>,
}

fn finish(id: String, text: String, lang: String, created_at: DateTime<Utc>, is_retweet: bool, has_url: Option<bool>) -> Option<Tweet> {
    if id.is_empty() || text.trim().is_empty() {
        return None;
    }
    let has_url = has_url.unwrap_or_else(|| text_has_url(&text));
    Some(Tweet {
        id,
        text,
        lang,
        created_at,
        is_retweet,
        has_url,
    })
}

fn parse_json_line(line: &str) -> Option<Tweet> {
    let raw: RawTweet = serde_json::from_str(line).ok()?;
    let id = match raw.id {
        RawId::Text(s) => s,
        RawId::Number(n) => n.to_string(),
    };
    finish(id, raw.text, raw.lang, raw.created_at, raw.is_retweet, raw.has_url)
}

#[derive(Debug, Clone)]
struct TsvColumns {
    id: usize,
    text: usize,
    lang: usize,
    created_at: usize,
    is_retweet: Option<usize>,
    has_url: Option<usize>,
    width: usize,
}

impl TsvColumns {
    fn from_header(line: &str) -> Result<Self, CorpusError> {
        let names: Vec<&str> = line.split('\t').map(str::trim).collect();
        let find = |name: &str| names.iter().position(|n| *n == name);
        let need = |name: &str| find(name).ok_or_else(|| CorpusError::Header(format!("TSV header lacks column {name:?}")));
        Ok(Self {
            id: need("id")?,
            text: need("text")?,
            lang: need("lang")?,
            created_at: need("created_at")?,
            is_retweet: find("is_retweet"),
            has_url: find("has_url"),
            width: names.len(),
        })
    }

    fn parse(&self, line: &str) -> Option<Tweet> {
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != self.width {
            return None;
        }
        let flag = |col: Option<usize>| -> Option<Option<bool>> {
            match col {
                None => Some(None),
                Some(i) => parse_bool(cells[i]).map(Some),
            }
        };
        let created_at = DateTime::parse_from_rfc3339(cells[self.created_at].trim()).ok()?.with_timezone(&Utc);
        finish(
            unescape_field(cells[self.id]),
            unescape_field(cells[self.text]),
            cells[self.lang].trim().to_string(),
            created_at,
            flag(self.is_retweet)?.unwrap_or(false),
            flag(self.has_url)?,
        )
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim() {
        "true" | "1" | "True" | "TRUE" => Some(true),
        "false" | "0" | "False" | "FALSE" => Some(false),
        _ => None,
    }
}

/// Streaming reader over a corpus. Yields tweets in file order; after the
/// last record it yields a [`CorpusError::Format`] if the malformed share
/// exceeded one half.
pub struct TweetStream<R> {
    reader: R,
    format: CorpusFormat,
    columns: Option<TsvColumns>,
    stats: LoadStats,
    line: String,
    done: bool,
}

impl<R: BufRead> TweetStream<R> {
    pub fn new(reader: R, format: CorpusFormat) -> Self {
        Self {
            reader,
            format,
            columns: None,
            stats: LoadStats::default(),
            line: String::new(),
            done: false,
        }
    }

    pub fn stats(&self) -> LoadStats {
        self.stats
    }

    fn read_line(&mut self) -> io::Result<bool> {
        self.line.clear();
        Ok(self.reader.read_line(&mut self.line)? > 0)
    }
}

impl<R: BufRead> Iterator for TweetStream<R> {
    type Item = Result<Tweet, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            match self.read_line() {
                Err(e) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
                Ok(false) => {
                    self.done = true;
                    let LoadStats { lines, malformed, .. } = self.stats;
                    if malformed * 2 > lines {
                        return Some(Err(CorpusError::Format { malformed, lines }));
                    }
                    return None;
                }
                Ok(true) => {}
            }
            let line = self.line.trim_end_matches(['\n', '\r']);
            if line.trim().is_empty() {
                continue;
            }
            if self.format == CorpusFormat::Tsv && self.columns.is_none() {
                match TsvColumns::from_header(line) {
                    Ok(cols) => {
                        self.columns = Some(cols);
                        continue;
                    }
                    Err(e) => {
                        self.done = true;
                        return Some(Err(e));
                    }
                }
            }
            self.stats.lines += 1;
            let parsed = match &self.columns {
                Some(cols) => cols.parse(line),
                None => parse_json_line(line),
            };
            match parsed {
                Some(t) => {
                    self.stats.records += 1;
                    return Some(Ok(t));
                }
                None => {
                    self.stats.malformed += 1;
                    log::debug!("skipping malformed corpus line {}", self.stats.lines);
                }
            }
        }
    }
}

/// Reads a whole corpus into memory.
pub fn load_tweets<R: BufRead>(reader: R, format: CorpusFormat) -> Result<(Vec<Tweet>, LoadStats), CorpusError> {
    let mut stream = TweetStream::new(reader, format);
    let mut tweets = Vec::new();
    for t in stream.by_ref() {
        tweets.push(t?);
    }
    Ok((tweets, stream.stats()))
}

/// Serializes one tweet as a JSON Lines record (no trailing newline).
pub fn tweet_to_json(tweet: &Tweet) -> String {
    serde_json::to_string(tweet).expect("tweet serializes")
}

const INDEX_MAGIC: &str = "collex-context-index v1";

/// Random-access store of tweet texts keyed by id, sorted by id so that the
/// serialized form is a pure function of the corpus contents.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ContextIndex {
    entries: Vec<(String, String)>,
}

impl ContextIndex {
    pub fn build<I>(tweets: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut entries: Vec<(String, String)> = tweets.into_iter().collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(CorpusError::DuplicateId(w[0].0.clone()));
        }
        Ok(Self { entries })
    }

    pub fn get(&self, id: &str) -> Option<&str> {
        self.entries
            .binary_search_by(|(k, _)| k.as_str().cmp(id))
            .ok()
            .map(|i| self.entries[i].1.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{INDEX_MAGIC}\t{}", self.entries.len())?;
        for (id, text) in &self.entries {
            writeln!(w, "{}\t{}", escape_field(id), escape_field(text))?;
        }
        w.flush()
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, CorpusError> {
        let mut lines = r.lines();
        let header = lines.next().transpose()?.ok_or_else(|| CorpusError::CorruptIndex("empty file".into()))?;
        let expected: usize = header
            .strip_prefix(INDEX_MAGIC)
            .and_then(|rest| rest.trim().parse().ok())
            .ok_or_else(|| CorpusError::CorruptIndex(format!("bad header {header:?}")))?;
        let mut entries = Vec::with_capacity(expected);
        for line in lines {
            let line = line?;
            let (id, text) = line
                .split_once('\t')
                .ok_or_else(|| CorpusError::CorruptIndex(format!("bad line {line:?}")))?;
            entries.push((unescape_field(id), unescape_field(text)));
        }
        if entries.len() != expected {
            return Err(CorpusError::CorruptIndex(format!("expected {expected} entries, found {}", entries.len())));
        }
        if entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(CorpusError::CorruptIndex("entries not sorted by id".into()));
        }
        Ok(Self { entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tweet(id: &str, lang: &str, rt: bool, url: bool) -> Tweet {
        Tweet {
            id: id.into(),
            text: "i have a fever".into(),
            lang: lang.into(),
            created_at: DateTime::parse_from_rfc3339("2021-03-01T12:00:00Z").unwrap().with_timezone(&Utc),
            is_retweet: rt,
            has_url: url,
        }
    }

    #[test]
    fn one_json_record() {
        let src = r#"{"id":"1","text":"i have a fever","lang":"en","created_at":"2021-03-01T12:00:00Z","is_retweet":false,"has_url":false}"#;
        let (tweets, stats) = load_tweets(src.as_bytes(), CorpusFormat::JsonLines).unwrap();
        assert_eq!(tweets, vec![tweet("1", "en", false, false)]);
        assert_eq!(stats.malformed, 0);
    }

    #[test]
    fn malformed_line_skipped() {
        let src = concat!(
            r#"{"id":"1","text":"a","lang":"en","created_at":"2021-03-01T12:00:00Z","is_retweet":false,"has_url":false}"#,
            "\n{not json\n",
            r#"{"id":"2","text":"b","lang":"en","created_at":"2021-03-01T12:00:00Z","is_retweet":true,"has_url":false}"#,
            "\n"
        );
        let (tweets, stats) = load_tweets(src.as_bytes(), CorpusFormat::JsonLines).unwrap();
        assert_eq!(tweets.len(), 2);
        assert_eq!(stats.malformed, 1);
    }

    #[test]
    fn empty_file() {
        let (tweets, stats) = load_tweets(&b""[..], CorpusFormat::JsonLines).unwrap();
        assert!(tweets.is_empty());
        assert_eq!(stats, LoadStats::default());
    }

    #[test]
    fn mostly_garbage_is_format_error() {
        let src = "a\nb\n{\"id\":\"1\",\"text\":\"x\",\"lang\":\"en\",\"created_at\":\"2021-03-01T12:00:00Z\"}\n";
        let err = load_tweets(src.as_bytes(), CorpusFormat::JsonLines).unwrap_err();
        assert!(matches!(err, CorpusError::Format { malformed: 2, lines: 3 }));
    }

    #[test]
    fn empty_text_rejected() {
        let src = r#"{"id":"1","text":"  ","lang":"en","created_at":"2021-03-01T12:00:00Z"}"#;
        let mut s = TweetStream::new(src.as_bytes(), CorpusFormat::JsonLines);
        assert!(matches!(s.next(), Some(Err(CorpusError::Format { .. }))));
        assert_eq!(s.stats().malformed, 1);
    }

    #[test]
    fn missing_has_url_is_computed() {
        let src = r#"{"id":7,"text":"see https://x.y","lang":"en","created_at":"2021-03-01T12:00:00Z"}"#;
        let (tweets, _) = load_tweets(src.as_bytes(), CorpusFormat::JsonLines).unwrap();
        assert_eq!(tweets[0].id, "7");
        assert!(tweets[0].has_url);
        assert!(!tweets[0].is_retweet);
    }

    #[test]
    fn tsv_with_escapes() {
        let src = "id\ttext\tlang\tcreated_at\tis_retweet\thas_url\n\
                   9\tline one\\nline\\ttwo\ten\t2021-03-01T12:00:00Z\tfalse\t0\n";
        let (tweets, _) = load_tweets(src.as_bytes(), CorpusFormat::Tsv).unwrap();
        assert_eq!(tweets[0].text, "line one\nline\ttwo");
    }

    #[test]
    fn tsv_requires_header_columns() {
        let err = load_tweets("id\ttext\n".as_bytes(), CorpusFormat::Tsv).unwrap_err();
        assert!(matches!(err, CorpusError::Header(_)));
    }

    #[test]
    fn default_policy() {
        let p = FilterPolicy::default();
        assert!(admit(&tweet("1", "en", false, false), &p));
        assert!(!admit(&tweet("1", "en", true, false), &p));
        assert!(!admit(&tweet("1", "es", false, false), &p));
        assert!(!admit(&tweet("1", "en", false, true), &p));
        assert!(FilterPolicy::new(Vec::<String>::new(), true, true).is_err());
    }

    #[test]
    fn index_lookup_and_absent() {
        let idx = ContextIndex::build(vec![("b".to_string(), "two".to_string()), ("a".to_string(), "one".to_string())]).unwrap();
        assert_eq!(idx.get("a"), Some("one"));
        assert_eq!(idx.get("b"), Some("two"));
        assert_eq!(idx.get("c"), None);
    }

    #[test]
    fn index_collision() {
        let r = ContextIndex::build(vec![("a".to_string(), "x".to_string()), ("a".to_string(), "y".to_string())]);
        assert!(matches!(r, Err(CorpusError::DuplicateId(id)) if id == "a"));
    }

    #[test]
    fn index_rebuild_is_byte_identical() {
        let items = vec![("2".to_string(), "tab\there".to_string()), ("1".to_string(), "one".to_string())];
        let mut a = Vec::new();
        let mut b = Vec::new();
        ContextIndex::build(items.clone()).unwrap().write_to(&mut a).unwrap();
        ContextIndex::build(items.into_iter().rev()).unwrap().write_to(&mut b).unwrap();
        assert_eq!(crate::util::stable_hash(0, &a), crate::util::stable_hash(0, &b));
        let back = ContextIndex::read_from(&a[..]).unwrap();
        assert_eq!(back.get("2"), Some("tab\there"));
    }

    fn arb_tweet() -> impl Strategy<Value = Tweet> {
        ("[a-z0-9]{1,6}", "[a-z ]{1,10}", prop_oneof!["en", "es", "fr"], any::<bool>(), any::<bool>()).prop_map(
            |(id, text, lang, rt, url)| Tweet {
                text: format!("x{text}"),
                ..tweet(&id, &lang, rt, url)
            },
        )
    }

    proptest! {
        #[test]
        fn default_admit_implies_clean(t in arb_tweet()) {
            let p = FilterPolicy::default();
            let first = admit(&t, &p);
            prop_assert_eq!(first, admit(&t, &p));
            if first {
                prop_assert!(t.lang == "en" && !t.is_retweet && !t.has_url);
            }
        }

        #[test]
        fn loaded_admitted_tweets_keep_invariants(ts in proptest::collection::vec(arb_tweet(), 0..10)) {
            let src: String = ts.iter().map(|t| tweet_to_json(t) + "\n").collect();
            let (loaded, _) = load_tweets(src.as_bytes(), CorpusFormat::JsonLines).unwrap();
            for t in loaded.iter().filter(|t| admit(t, &FilterPolicy::default())) {
                prop_assert!(!t.id.is_empty());
                prop_assert!(!t.text.trim().is_empty());
            }
        }
    }
}
