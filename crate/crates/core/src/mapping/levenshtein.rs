//! Unit-cost edit distance over Unicode scalar values.

/// Edit distance between two strings.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b, &mut Vec::new())
}

/// Two-row DP over char slices; `row` is scratch space reused across calls.
pub fn levenshtein_chars(a: &[char], b: &[char], row: &mut Vec<usize>) -> usize {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    if b.is_empty() {
        return a.len();
    }
    row.clear();
    row.extend(0..=b.len());
    for (i, &ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let up = row[j + 1];
            let sub = diag + usize::from(ca != cb);
            row[j + 1] = sub.min(up + 1).min(row[j] + 1);
            diag = up;
        }
    }
    row[b.len()]
}

/// `1 - d / max(|a|, |b|)`, and 1 for two empty strings.
pub fn fuzzy_similarity(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    similarity_chars(&a, &b, &mut Vec::new())
}

pub fn similarity_chars(a: &[char], b: &[char], row: &mut Vec<usize>) -> f64 {
    let m = a.len().max(b.len());
    if m == 0 {
        return 1.0;
    }
    1.0 - levenshtein_chars(a, b, row) as f64 / m as f64
}

/// Best similarity two lengths can reach, `1 - |la - lb| / max`.
pub fn length_bound(la: usize, lb: usize) -> f64 {
    let m = la.max(lb);
    if m == 0 {
        return 1.0;
    }
    1.0 - la.abs_diff(lb) as f64 / m as f64
}

#[cfg(test)]
pub(crate) mod oracle {
    /// Full (n+1)x(m+1) matrix.
    pub fn dp(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in d.iter_mut().enumerate() {
            row[0] = i;
        }
        for j in 0..=b.len() {
            d[0][j] = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
                d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
            }
        }
        d[a.len()][b.len()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(oracle::dp("kitten", "sitting"), 3);
        assert_eq!(levenshtein("fever", "fever"), 0);
        assert_eq!(levenshtein("abdominal cramp", "abdominal cramps"), 1);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("é", "e"), 1);
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(fuzzy_similarity("abdominal cramps", "abdominal cramp"), 1.0 - 1.0 / 16.0);
        assert_eq!(fuzzy_similarity("abdominal cramps", "abdominal cramp"), 0.9375);
        assert_eq!(fuzzy_similarity("cough", "cough"), 1.0);
        assert_eq!(fuzzy_similarity("a", "b"), 0.0);
        assert_eq!(fuzzy_similarity("", ""), 1.0);
    }

    proptest! {
        #[test]
        fn matches_dp(a in "[abc é]{0,12}", b in "[abc é]{0,12}") {
            prop_assert_eq!(levenshtein(&a, &b), oracle::dp(&a, &b));
        }

        #[test]
        fn metric(a in "[ab]{0,8}", b in "[ab]{0,8}", c in "[ab]{0,8}") {
            prop_assert_eq!(levenshtein(&a, &a), 0);
            prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
            prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
        }

        #[test]
        fn similarity_one_iff_equal(a in "[ab]{1,6}", b in "[ab]{1,6}") {
            let s = fuzzy_similarity(&a, &b);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(s == 1.0, a == b);
            let bound = length_bound(a.chars().count(), b.chars().count());
            prop_assert!(s <= bound);
        }
    }
}
