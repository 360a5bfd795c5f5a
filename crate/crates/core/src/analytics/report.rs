//! Frequency tables and side-by-side comparison of two lexicons.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, BufRead, Write};

use serde::Serialize;

use super::AnalyticsError;
use crate::util::{escape_field, unescape_field};

pub const DEFAULT_MIN_COUNT: u64 = 500;
pub const REPORT_HEADER: &str = "symptom\tcount\tpercent";
pub const NOT_APPLICABLE: &str = "N/A";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub symptom: String,
    pub count: u64,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyReport {
    pub total_matched_tweets: u64,
    pub min_count: u64,
    pub rows: Vec<ReportRow>,
}

/// Percent of `n` to one decimal, e.g. "9.4%".
pub fn format_percent(percent: f64) -> String {
    format!("{percent:.1}%")
}

/// "259323 (9.4%)"
pub fn format_cell(row: &ReportRow) -> String {
    format!("{} ({})", row.count, format_percent(row.percent))
}

/// Rows with `count >= min_count`, percent taken against `n`, sorted by
/// count descending then name.
pub fn report(counts: &BTreeMap<String, u64>, n: u64, min_count: u64) -> Result<FrequencyReport, AnalyticsError> {
    if n == 0 && counts.values().any(|&c| c > 0) {
        return Err(AnalyticsError::Integrity("nonzero counts with N = 0".into()));
    }
    if let Some((name, c)) = counts.iter().find(|(_, &c)| c > n) {
        return Err(AnalyticsError::Integrity(format!("{name} has count {c} above N = {n}")));
    }
    let mut rows: Vec<ReportRow> = counts
        .iter()
        .filter(|(_, &c)| c >= min_count && c > 0)
        .map(|(name, &c)| ReportRow {
            symptom: name.clone(),
            count: c,
            percent: 100.0 * c as f64 / n as f64,
        })
        .collect();
    rows.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.symptom.cmp(&b.symptom)));
    Ok(FrequencyReport {
        total_matched_tweets: n,
        min_count,
        rows,
    })
}

impl FrequencyReport {
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# N={} min_count={}", self.total_matched_tweets, self.min_count)?;
        writeln!(w, "{REPORT_HEADER}")?;
        for r in &self.rows {
            writeln!(w, "{}\t{}\t{:.1}", escape_field(&r.symptom), r.count, r.percent)?;
        }
        Ok(())
    }

    /// Reads what [`write_tsv`](Self::write_tsv) wrote. Percent is recomputed
    /// from N.
    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self, AnalyticsError> {
        let perr = |line: usize, message: String| AnalyticsError::Parse { what: "report", line, message };
        let mut n = None;
        let mut min_count = 0;
        let mut rows = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if let Some(meta) = line.strip_prefix('#') {
                for kv in meta.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("N", v)) => n = Some(v.parse().map_err(|_| perr(lineno, format!("bad N {v:?}")))?),
                        Some(("min_count", v)) => min_count = v.parse().map_err(|_| perr(lineno, format!("bad min_count {v:?}")))?,
                        _ => {}
                    }
                }
                continue;
            }
            if line.is_empty() || line == REPORT_HEADER {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 2 {
                return Err(perr(lineno, "expected symptom and count".into()));
            }
            let count: u64 = cols[1].parse().map_err(|_| perr(lineno, format!("bad count {:?}", cols[1])))?;
            rows.push((unescape_field(cols[0]), count));
        }
        let n = n.ok_or_else(|| perr(0, "missing '# N=' line".into()))?;
        let counts: BTreeMap<String, u64> = rows.into_iter().collect();
        report(&counts, n, min_count)
    }

    pub fn render_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.symptom.chars().count()).max().unwrap_or(0).max("Symptoms".len());
        let mut s = format!("{:<width$}  N={}\n", "Symptoms", self.total_matched_tweets);
        for r in &self.rows {
            s.push_str(&format!("{:<width$}  {}\n", r.symptom, format_cell(r)));
        }
        s
    }

    fn cell(&self, symptom: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.symptom == symptom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub symptom: String,
    pub a: Option<ReportRow>,
    pub b: Option<ReportRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub labels: [String; 2],
    pub n: [u64; 2],
    pub rows: Vec<CompareRow>,
}

/// Lines up two reports. `alignment` renames B's symptoms into A's scheme;
/// several B rows landing on one name are summed. Rows follow A's order,
/// then B-only symptoms by count.
pub fn compare(a: &FrequencyReport, b: &FrequencyReport, alignment: &BTreeMap<String, String>, labels: [&str; 2]) -> Comparison {
    let mut b_counts: BTreeMap<String, u64> = BTreeMap::new();
    for r in &b.rows {
        let name = alignment.get(&r.symptom).unwrap_or(&r.symptom);
        *b_counts.entry(name.clone()).or_insert(0) += r.count;
    }
    let b_aligned = report(&b_counts, b.total_matched_tweets, 0).expect("counts came from a valid report");
    let mut rows: Vec<CompareRow> = Vec::new();
    let mut seen: HashMap<&str, ()> = HashMap::new();
    for r in &a.rows {
        seen.insert(&r.symptom, ());
        rows.push(CompareRow {
            symptom: r.symptom.clone(),
            a: Some(r.clone()),
            b: b_aligned.cell(&r.symptom).cloned(),
        });
    }
    for r in &b_aligned.rows {
        if !seen.contains_key(r.symptom.as_str()) {
            rows.push(CompareRow {
                symptom: r.symptom.clone(),
                a: None,
                b: Some(r.clone()),
            });
        }
    }
    Comparison {
        labels: [labels[0].to_string(), labels[1].to_string()],
        n: [a.total_matched_tweets, b.total_matched_tweets],
        rows,
    }
}

fn cell_or_na(c: &Option<ReportRow>) -> String {
    c.as_ref().map(format_cell).unwrap_or_else(|| NOT_APPLICABLE.to_string())
}

impl Comparison {
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "symptom\t{}\t{}", escape_field(&self.labels[0]), escape_field(&self.labels[1]))?;
        writeln!(w, "\tN={}\tN={}", self.n[0], self.n[1])?;
        for r in &self.rows {
            writeln!(w, "{}\t{}\t{}", escape_field(&r.symptom), cell_or_na(&r.a), cell_or_na(&r.b))?;
        }
        Ok(())
    }

    pub fn render_text(&self) -> String {
        let table: Vec<[String; 3]> = std::iter::once(["Symptoms".to_string(), self.labels[0].clone(), self.labels[1].clone()])
            .chain(std::iter::once([String::new(), format!("N={}", self.n[0]), format!("N={}", self.n[1])]))
            .chain(self.rows.iter().map(|r| [r.symptom.clone(), cell_or_na(&r.a), cell_or_na(&r.b)]))
            .collect();
        let w: Vec<usize> = (0..3).map(|i| table.iter().map(|row| row[i].chars().count()).max().unwrap_or(0)).collect();
        let mut s = String::new();
        for row in &table {
            s.push_str(format!("{:<w0$}  {:<w1$}  {}", row[0], row[1], row[2], w0 = w[0], w1 = w[1]).trim_end());
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(rows: &[(&str, u64)]) -> BTreeMap<String, u64> {
        rows.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn shortness_of_breath_cell() {
        let r = report(&counts(&[("Shortness of breath", 259323)]), 2_761_058, 500).unwrap();
        assert_eq!(format_cell(&r.rows[0]), "259323 (9.4%)");
        let fever = report(&counts(&[("Fever", 49157)]), 55_924, 500).unwrap();
        assert_eq!(format_percent(fever.rows[0].percent), "87.9%");
    }

    #[test]
    fn threshold_and_order() {
        let r = report(&counts(&[("a", 499), ("b", 500), ("c", 900), ("d", 900)]), 5000, 500).unwrap();
        let names: Vec<&str> = r.rows.iter().map(|r| r.symptom.as_str()).collect();
        assert_eq!(names, vec!["c", "d", "b"]);
        assert!(r.rows.iter().all(|r| r.count >= 500 && (0.0..=100.0).contains(&r.percent)));
        let empty = report(&counts(&[("a", 0)]), 10, 500).unwrap();
        assert!(empty.rows.is_empty());
        assert_eq!(empty.total_matched_tweets, 10);
        assert!(matches!(report(&counts(&[("a", 3)]), 0, 1), Err(AnalyticsError::Integrity(_))));
    }

    #[test]
    fn tsv_round_trip() {
        let r = report(&counts(&[("Fever", 900), ("Cough", 1200)]), 5000, 500).unwrap();
        let mut buf = Vec::new();
        r.write_tsv(&mut buf).unwrap();
        assert_eq!(FrequencyReport::read_tsv(&buf[..]).unwrap(), r);
    }

    #[test]
    fn comparison_cells() {
        let a = report(&counts(&[("Anaphylaxis", 63798), ("Cough", 199486)]), 2_761_058, 500).unwrap();
        let b = report(&counts(&[("cough", 183039)]), 948_478, 500).unwrap();
        let align = BTreeMap::from([("cough".to_string(), "Cough".to_string())]);
        let c = compare(&a, &b, &align, ["Our dictionary", "Pre-defined lexicon"]);
        let mut buf = Vec::new();
        c.write_tsv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("Cough\t199486 (7.2%)\t183039 (19.3%)"));
        assert!(text.contains("Anaphylaxis\t63798 (2.3%)\tN/A"));
        let same = compare(&a, &a, &BTreeMap::new(), ["x", "y"]);
        assert!(same.rows.iter().all(|r| r.a == r.b));
        let empty = report(&BTreeMap::new(), 0, 500).unwrap();
        let c = compare(&a, &empty, &BTreeMap::new(), ["x", "y"]);
        assert!(c.rows.iter().all(|r| r.b.is_none()));
        assert!(c.render_text().contains("N/A"));
    }
}
