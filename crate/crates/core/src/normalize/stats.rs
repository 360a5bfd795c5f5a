//! Summary statistics over lemma frequencies.

use std::fmt::Write as _;

use serde::Serialize;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("cannot summarize an empty table")]
pub struct EmptyInput;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyStats {
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub minimum: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub maximum: f64,
}

/// Linear-interpolation quantile (type 7) over sorted values.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(counts: &[u64]) -> Result<FrequencyStats, EmptyInput> {
    if counts.is_empty() {
        return Err(EmptyInput);
    }
    let mut v: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok(FrequencyStats {
        n: v.len(),
        mean,
        std_dev: var.sqrt(),
        minimum: v[0],
        q1: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q3: quantile(&v, 0.75),
        maximum: v[v.len() - 1],
    })
}

fn num(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{x:.0}")
    } else {
        format!("{x:.2}")
    }
}

fn median_iqr(s: &FrequencyStats) -> String {
    format!("{} [{},{}]", num(s.median), num(s.q1), num(s.q3))
}

/// Two-column plain-text report: all lemmas next to the frequent subset.
pub fn render_text(all: &FrequencyStats, frequent: Option<&FrequencyStats>, min_count: u64) -> String {
    let right_head = format!(">= {min_count} occurrences");
    let cell = |f: &dyn Fn(&FrequencyStats) -> String| -> (String, String) {
        (f(all), frequent.map(f).unwrap_or_else(|| "N/A".to_string()))
    };
    let rows: Vec<(&str, (String, String))> = vec![
        ("Unique lemmas", cell(&|s| s.n.to_string())),
        ("Mean (SD)", cell(&|s| format!("{:.2} ({:.2})", s.mean, s.std_dev))),
        ("Median [Interquartile Range]", cell(&|s| median_iqr(s))),
        ("Min", cell(&|s| num(s.minimum))),
        ("Max", cell(&|s| num(s.maximum))),
    ];
    let w0 = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    let w1 = rows.iter().map(|r| r.1 .0.len()).max().unwrap_or(0).max("All lemmas".len());
    let mut out = String::new();
    let _ = writeln!(out, "{:w0$}  {:w1$}  {}", "", "All lemmas", right_head);
    for (label, (a, b)) in rows {
        let _ = writeln!(out, "{label:w0$}  {a:w1$}  {b}");
    }
    out
}

pub fn render_tsv(all: &FrequencyStats, frequent: Option<&FrequencyStats>) -> String {
    let mut out = String::from("set\tn\tmean\tstd_dev\tmin\tq1\tmedian\tq3\tmax\n");
    let mut row = |name: &str, s: &FrequencyStats| {
        let _ = writeln!(
            out,
            "{name}\t{}\t{:.6}\t{:.6}\t{}\t{}\t{}\t{}\t{}",
            s.n, s.mean, s.std_dev, s.minimum, s.q1, s.median, s.q3, s.maximum
        );
    };
    row("all", all);
    if let Some(f) = frequent {
        row("frequent", f);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Independent oracle: quantile by rank definition 1 + (n-1)p, and
    // two-pass variance with a naive sum of squares.
    fn oracle_quantile(v: &[u64], p: f64) -> f64 {
        let mut s = v.to_vec();
        s.sort_unstable();
        let rank = 1.0 + (s.len() as f64 - 1.0) * p;
        let k = rank.trunc() as usize;
        let frac = rank - k as f64;
        let x = s[k - 1] as f64;
        if k >= s.len() {
            x
        } else {
            x + frac * (s[k] as f64 - x)
        }
    }

    #[test]
    fn worked_example() {
        let s = summarize(&[1, 2, 3, 4, 100]).unwrap();
        assert_eq!(s.mean, 22.0);
        assert_eq!(s.median, 3.0);
        assert_eq!(s.minimum, 1.0);
        assert_eq!(s.maximum, 100.0);
        assert_eq!(s.q1, 2.0);
        assert_eq!(s.q3, 4.0);
        let var = [1.0f64, 2.0, 3.0, 4.0, 100.0].iter().map(|x| (x - 22.0) * (x - 22.0)).sum::<f64>() / 5.0;
        assert!((s.std_dev - var.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_and_empty() {
        let s = summarize(&[7]).unwrap();
        assert_eq!((s.mean, s.median, s.minimum, s.maximum, s.std_dev), (7.0, 7.0, 7.0, 7.0, 0.0));
        assert_eq!(summarize(&[]), Err(EmptyInput));
    }

    #[test]
    fn text_layout() {
        let all = summarize(&[1, 1, 3, 13, 40]).unwrap();
        let freq = summarize(&[13, 40]).unwrap();
        let txt = render_text(&all, Some(&freq), 10);
        assert!(txt.lines().next().unwrap().contains("All lemmas"));
        assert!(txt.lines().next().unwrap().ends_with(">= 10 occurrences"));
        assert!(txt.contains("Median [Interquartile Range]  3 [1,13]"));
        assert!(render_text(&all, None, 10).contains("N/A"));
        assert_eq!(render_tsv(&all, Some(&freq)).lines().count(), 3);
    }

    proptest! {
        #[test]
        fn order_and_oracle(v in proptest::collection::vec(0u64..1000, 1..80)) {
            let s = summarize(&v).unwrap();
            prop_assert!(s.minimum <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.maximum);
            prop_assert!(s.std_dev >= 0.0);
            for (p, got) in [(0.25, s.q1), (0.5, s.median), (0.75, s.q3)] {
                prop_assert!((oracle_quantile(&v, p) - got).abs() < 1e-9);
            }
        }

        #[test]
        fn constant_counts(c in 0u64..10_000, n in 1usize..50) {
            let s = summarize(&vec![c; n]).unwrap();
            let c = c as f64;
            prop_assert_eq!(s.std_dev, 0.0);
            prop_assert_eq!((s.minimum, s.q1, s.median, s.q3, s.maximum), (c, c, c, c, c));
        }
    }
}
