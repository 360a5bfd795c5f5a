//! Token lemmatization.
//!
//! [`SuffixLemmatizer`] is a small deterministic English lemmatizer: an
//! exceptions table first, then plural and `-ing`/`-ed` suffix rules with
//! consonant-doubling undo and `e` restoration. Purely numeric tokens become
//! `number`, which the normalizer then drops, mirroring taggers that unify
//! numerals. Any other lemmatizer can be plugged in through [`Lemmatizer`].

use std::collections::HashMap;

pub trait Lemmatizer: Send + Sync {
    fn lemma(&self, token: &str) -> String;
}

#[derive(Debug, Clone, Default)]
pub struct SuffixLemmatizer {
    exceptions: HashMap<String, String>,
}

impl SuffixLemmatizer {
    /// Lemmatizer with the bundled exceptions table.
    pub fn new() -> Self {
        Self::with_exceptions(include_str!("../../assets/lemma-exceptions.tsv"))
    }

    /// `word TAB lemma` per line, `#` comments.
    pub fn with_exceptions(table: &str) -> Self {
        let exceptions = table
            .lines()
            .filter(|l| !l.starts_with('#'))
            .filter_map(|l| l.split_once('\t'))
            .map(|(w, l)| (w.trim().to_lowercase(), l.trim().to_lowercase()))
            .filter(|(w, _)| !w.is_empty())
            .collect();
        Self { exceptions }
    }

    pub fn exception_count(&self) -> usize {
        self.exceptions.len()
    }
}

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

fn has_vowel(s: &[u8]) -> bool {
    s.iter().any(|&c| is_vowel(c) || c == b'y')
}

/// Consonant-vowel-consonant ending where the final consonant is not w, x or
/// y ("hop", "shak"): such stems usually lost a final `e`.
fn ends_cvc(s: &[u8]) -> bool {
    let n = s.len();
    n >= 3 && !is_vowel(s[n - 3]) && is_vowel(s[n - 2]) && !is_vowel(s[n - 1]) && !matches!(s[n - 1], b'w' | b'x' | b'y')
}

fn restore_stem(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    // running -> run, throbbing -> throb
    if n >= 2 && b[n - 1] == b[n - 2] && matches!(b[n - 1], b'b' | b'd' | b'g' | b'm' | b'n' | b'p' | b'r' | b't') {
        return stem[..n - 1].to_string();
    }
    // dilat -> dilate, but bloat stays
    if n >= 3 && stem.ends_with("at") && !is_vowel(b[n - 3]) {
        return format!("{stem}e");
    }
    if stem.ends_with("iz") || stem.ends_with("bl") || stem.ends_with("gl") || stem.ends_with("kl") || stem.ends_with("pl") || stem.ends_with("tl") || stem.ends_with("dl") {
        return format!("{stem}e");
    }
    // short CVC stems only: "shak" -> "shake", but "vomit" stays
    if n == 4 && ends_cvc(b) && !is_vowel(b[0]) {
        return format!("{stem}e");
    }
    stem.to_string()
}

fn plural(word: &str) -> Option<String> {
    let n = word.len();
    if n <= 3 || !word.ends_with('s') {
        return None;
    }
    if word.ends_with("ss") || word.ends_with("us") || word.ends_with("is") || word.ends_with("'s") {
        return None;
    }
    if let Some(stem) = word.strip_suffix("ies") {
        return Some(if stem.len() >= 2 { format!("{stem}y") } else { word[..n - 1].to_string() });
    }
    if let Some(stem) = word.strip_suffix("sses") {
        return Some(format!("{stem}ss"));
    }
    if word.ends_with("shes") || word.ends_with("xes") || word.ends_with("zzes") {
        return Some(word[..n - 2].to_string());
    }
    if word.ends_with("ches") {
        // aches, headaches keep the e; itches, stitches drop it
        return Some(if word.ends_with("aches") { word[..n - 1].to_string() } else { word[..n - 2].to_string() });
    }
    Some(word[..n - 1].to_string())
}

fn verbal(word: &str) -> Option<String> {
    if word.len() >= 5 {
        if let Some(stem) = word.strip_suffix("ied") {
            return Some(format!("{stem}y"));
        }
    }
    for suffix in ["ing", "ed"] {
        if let Some(stem) = word.strip_suffix(suffix) {
            if stem.len() >= 3 && has_vowel(stem.as_bytes()) {
                return Some(restore_stem(stem));
            }
        }
    }
    None
}

impl Lemmatizer for SuffixLemmatizer {
    fn lemma(&self, token: &str) -> String {
        if let Some(l) = self.exceptions.get(token) {
            return l.clone();
        }
        if !token.is_empty() && token.bytes().all(|b| b.is_ascii_digit()) {
            return "number".to_string();
        }
        if !token.bytes().all(|b| b.is_ascii_lowercase()) {
            return token.to_string();
        }
        plural(token).or_else(|| verbal(token)).unwrap_or_else(|| token.to_string())
    }
}

/// Lemmatizer that returns tokens unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityLemmatizer;

impl Lemmatizer for IdentityLemmatizer {
    fn lemma(&self, token: &str) -> String {
        token.to_string()
    }
}
