//! Small shared helpers: a stable seeded hash and TSV field escaping.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit hash that is stable across platforms, compiler versions and runs.
///
/// FNV-1a over the bytes, seeded, followed by a splitmix64 finalizer so that
/// nearby inputs spread over the whole range.
pub fn stable_hash(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix(h)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic RNG derived from a run seed and a textual stream key, so
/// independent consumers (one per concept, one per pair) never share a stream.
pub fn seeded_rng(seed: u64, key: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stable_hash(seed, key.as_bytes()))
}

/// Escapes backslash, tab, CR and LF so a value fits in one TSV cell.
pub fn escape_field(s: &str) -> String {
    if !s.contains(['\\', '\t', '\n', '\r']) {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len() + 4);
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

/// Inverse of [`escape_field`]. Unknown escapes are kept verbatim.
pub fn unescape_field(s: &str) -> String {
    if !s.contains('\\') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

/// Escapes an item for a delimited list cell (`a;b`, `x:1`, `id1,id2`).
/// Separators `;` `:` `,`, backslash and line breaks get a backslash.
pub fn escape_item(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' | ';' | ':' | ',' => {
                out.push('\\');
                out.push(c);
            }
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

/// Splits a list cell on unescaped `sep` and unescapes each item.
pub fn split_items(s: &str, sep: char) -> Vec<String> {
    if s.is_empty() {
        return Vec::new();
    }
    let mut items = Vec::new();
    let mut cur = String::new();
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('t') => cur.push('\t'),
                Some('n') => cur.push('\n'),
                Some('r') => cur.push('\r'),
                Some(other) => cur.push(other),
                None => cur.push('\\'),
            }
        } else if c == sep {
            items.push(std::mem::take(&mut cur));
        } else {
            cur.push(c);
        }
    }
    items.push(cur);
    items
}

/// Splits `item<sep>tail` at the last unescaped `sep`, returning the raw
/// (still escaped) item and the tail.
pub fn rsplit_unescaped(s: &str, sep: char) -> Option<(&str, &str)> {
    let bytes: Vec<(usize, char)> = s.char_indices().collect();
    let mut last = None;
    let mut i = 0;
    while i < bytes.len() {
        let (pos, c) = bytes[i];
        if c == '\\' {
            i += 2;
            continue;
        }
        if c == sep {
            last = Some(pos);
        }
        i += 1;
    }
    last.map(|p| (&s[..p], &s[p + sep.len_utf8()..]))
}

/// Formats a score with exactly six decimals, the precision used in every
/// score column.
pub fn fmt_score(score: f64) -> String {
    format!("{score:.6}")
}
