//! Character classes and the multi-phrase matcher shared by the gazetteer
//! extractor, emoji replacement, context lookup and corpus matching.
//!
//! Offsets are always counted in Unicode scalar values (`char`s), never bytes.

/// Case folding that never changes the number of characters, so offsets into
/// folded text remain valid for the original.
#[inline]
pub fn fold_char(c: char) -> char {
    if c.is_ascii() {
        return c.to_ascii_lowercase();
    }
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

/// Folds a whole string with [`fold_char`].
pub fn fold(s: &str) -> String {
    s.chars().map(fold_char).collect()
}

/// Word characters: `[A-Za-z0-9']` plus any non-ASCII letter.
#[inline]
pub fn is_word_char(c: char) -> bool {
    if c.is_ascii() {
        c.is_ascii_alphanumeric() || c == '\''
    } else {
        c.is_alphabetic()
    }
}

/// Lowercases (via [`fold_char`]) and collapses whitespace runs to one space.
pub fn normalize_phrase(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().map(fold_char));
    }
    out
}

/// True when `[start, end)` does not cut through a run of word characters.
#[inline]
pub fn is_token_aligned(chars: &[char], start: usize, end: usize) -> bool {
    let start_ok = start == 0 || !(is_word_char(chars[start - 1]) && is_word_char(chars[start]));
    let end_ok = end == chars.len() || !(is_word_char(chars[end - 1]) && is_word_char(chars[end]));
    start_ok && end_ok
}

/// One reported match, in char offsets, with the id of the matched pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhraseMatch {
    pub start: usize,
    pub end: usize,
    pub pattern: usize,
}

#[derive(Debug, Clone, Default)]
struct Node {
    // sorted by char
    children: Vec<(char, u32)>,
    pattern: Option<u32>,
}

/// Trie over folded characters with leftmost-longest, non-overlapping search.
///
/// With `token_aligned` set, a match may neither start nor end inside a run of
/// word characters.
#[derive(Debug, Clone)]
pub struct PhraseMatcher {
    nodes: Vec<Node>,
    patterns: Vec<String>,
    token_aligned: bool,
}

impl PhraseMatcher {
    pub fn new(token_aligned: bool) -> Self {
        Self {
            nodes: vec![Node::default()],
            patterns: Vec::new(),
            token_aligned,
        }
    }

    /// Inserts a phrase (folded on the way in) and returns its pattern id.
    /// Re-inserting an equal phrase returns the existing id. Empty phrases
    /// are ignored and yield `None`.
    pub fn insert(&mut self, phrase: &str) -> Option<usize> {
        if phrase.is_empty() {
            return None;
        }
        let mut node = 0usize;
        for c in phrase.chars().map(fold_char) {
            node = match self.nodes[node].children.binary_search_by_key(&c, |&(k, _)| k) {
                Ok(i) => self.nodes[node].children[i].1 as usize,
                Err(i) => {
                    let next = self.nodes.len();
                    self.nodes.push(Node::default());
                    self.nodes[node].children.insert(i, (c, next as u32));
                    next
                }
            };
        }
        if let Some(id) = self.nodes[node].pattern {
            return Some(id as usize);
        }
        let id = self.patterns.len();
        self.patterns.push(fold(phrase));
        self.nodes[node].pattern = Some(id as u32);
        Some(id)
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// The folded form of a stored pattern.
    pub fn pattern(&self, id: usize) -> &str {
        &self.patterns[id]
    }

    #[inline]
    fn child(&self, node: usize, c: char) -> Option<usize> {
        let children = &self.nodes[node].children;
        if children.len() <= 8 {
            children.iter().find(|&&(k, _)| k == c).map(|&(_, n)| n as usize)
        } else {
            children
                .binary_search_by_key(&c, |&(k, _)| k)
                .ok()
                .map(|i| children[i].1 as usize)
        }
    }

    /// Matches over text that is already split into chars. The chars are
    /// folded on the fly; callers keep their original text for slicing.
    pub fn find_in_chars(&self, chars: &[char]) -> Vec<PhraseMatch> {
        let mut out = Vec::new();
        self.for_each_match(chars, |m| out.push(m));
        out
    }

    pub fn find_iter(&self, text: &str) -> Vec<PhraseMatch> {
        let chars: Vec<char> = text.chars().collect();
        self.find_in_chars(&chars)
    }

    /// Visits every occurrence of every pattern, overlaps included.
    pub fn for_each_occurrence(&self, chars: &[char], mut visit: impl FnMut(PhraseMatch)) {
        let n = chars.len();
        for start in 0..n {
            if self.token_aligned && start > 0 && is_word_char(chars[start - 1]) && is_word_char(chars[start]) {
                continue;
            }
            let mut node = 0usize;
            let mut pos = start;
            while pos < n {
                match self.child(node, fold_char(chars[pos])) {
                    Some(next) => node = next,
                    None => break,
                }
                pos += 1;
                if let Some(p) = self.nodes[node].pattern {
                    if !self.token_aligned || pos == n || !(is_word_char(chars[pos - 1]) && is_word_char(chars[pos])) {
                        visit(PhraseMatch {
                            start,
                            end: pos,
                            pattern: p as usize,
                        });
                    }
                }
            }
        }
    }

    /// Visits every selected match left to right without allocating.
    pub fn for_each_match(&self, chars: &[char], mut visit: impl FnMut(PhraseMatch)) {
        let n = chars.len();
        let mut start = 0;
        while start < n {
            if self.token_aligned
                && start > 0
                && is_word_char(chars[start - 1])
                && is_word_char(chars[start])
            {
                start += 1;
                continue;
            }
            let mut node = 0usize;
            let mut best: Option<(usize, u32)> = None;
            let mut pos = start;
            while pos < n {
                match self.child(node, fold_char(chars[pos])) {
                    Some(next) => node = next,
                    None => break,
                }
                pos += 1;
                if let Some(p) = self.nodes[node].pattern {
                    let end_ok = !self.token_aligned
                        || pos == n
                        || !(is_word_char(chars[pos - 1]) && is_word_char(chars[pos]));
                    if end_ok {
                        best = Some((pos, p));
                    }
                }
            }
            match best {
                Some((end, p)) => {
                    visit(PhraseMatch {
                        start,
                        end,
                        pattern: p as usize,
                    });
                    start = end;
                }
                None => start += 1,
            }
        }
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matcher(phrases: &[&str]) -> PhraseMatcher {
        let mut m = PhraseMatcher::new(true);
        for p in phrases {
            m.insert(p);
        }
        m
    }

    #[test]
    fn longest_wins() {
        let m = matcher(&["sore throat", "throat"]);
        let hits = m.find_iter("my sore throat");
        assert_eq!(hits.len(), 1);
        assert_eq!((hits[0].start, hits[0].end), (3, 14));
    }

    #[test]
    fn no_match_inside_words() {
        let m = matcher(&["fever"]);
        assert!(m.find_iter("feverish dreams").is_empty());
        assert!(m.find_iter("nofever").is_empty());
        assert_eq!(m.find_iter("Fever!").len(), 1);
    }

    #[test]
    fn apostrophe_is_word_char() {
        let m = matcher(&["can"]);
        assert!(m.find_iter("can't").is_empty());
    }

    #[test]
    fn falls_back_to_shorter_aligned_match() {
        // "fever d" is a pattern but the longer one cuts "dreams".
        let m = matcher(&["fever", "fever d"]);
        let hits = m.find_iter("fever dreams");
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].end, 5);
    }

    #[test]
    fn duplicate_insert_keeps_id() {
        let mut m = PhraseMatcher::new(true);
        assert_eq!(m.insert("Fever"), Some(0));
        assert_eq!(m.insert("fever"), Some(0));
        assert_eq!(m.insert(""), None);
        assert_eq!(m.len(), 1);
    }

    fn small_text() -> impl Strategy<Value = String> {
        proptest::collection::vec(prop_oneof!["a", "b", "ab", " ", "-", "'", "É", "é"], 0..12)
            .prop_map(|v| v.concat())
    }

    proptest! {
        #[test]
        fn agrees_with_brute_force(
            phrases in proptest::collection::vec(small_text(), 1..5),
            text in small_text(),
            aligned in any::<bool>(),
        ) {
            let mut m = PhraseMatcher::new(aligned);
            for p in &phrases {
                m.insert(p);
            }
            let got: Vec<(usize, usize, String)> = m
                .find_iter(&text)
                .into_iter()
                .map(|h| (h.start, h.end, m.pattern(h.pattern).to_string()))
                .collect();
            prop_assert_eq!(got, oracle::brute_force(&phrases, &text, aligned));
        }

        #[test]
        fn occurrences_are_all_aligned_hits(
            phrases in proptest::collection::vec(small_text(), 1..5),
            text in small_text(),
        ) {
            let mut m = PhraseMatcher::new(true);
            for p in &phrases {
                m.insert(p);
            }
            let chars: Vec<char> = text.chars().collect();
            let mut got = Vec::new();
            m.for_each_occurrence(&chars, |h| got.push((h.start, h.end)));
            got.sort();
            let mut want = Vec::new();
            for s in 0..chars.len() {
                for e in s + 1..=chars.len() {
                    let sub = fold(&chars[s..e].iter().collect::<String>());
                    if phrases.iter().any(|p| !p.is_empty() && fold(p) == sub) && is_token_aligned(&chars, s, e) {
                        want.push((s, e));
                    }
                }
            }
            prop_assert_eq!(got, want);
        }
    }
}
