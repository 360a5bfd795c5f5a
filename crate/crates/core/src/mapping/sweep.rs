//! Match counts over a threshold grid and elbow selection.

use std::fmt::Write as _;

use serde::Serialize;

use super::ensemble::LemmaTop1;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SweepError {
    #[error("thresholds must be sorted ascending")]
    Unsorted,
    #[error("elbow needs at least 3 sweep points, got {0}")]
    InsufficientData(usize),
    #[error("threshold grid is not uniform")]
    NonUniform,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub taus: Vec<f64>,
    pub semantic: Vec<u64>,
    pub lexical: Vec<u64>,
}

/// `steps + 1` evenly spaced thresholds from 0 to 1.
pub fn unit_grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

/// Count of scores `>= tau` for each tau.
pub fn counts_at(scores: &[f64], taus: &[f64]) -> Result<Vec<u64>, SweepError> {
    if taus.windows(2).any(|w| w[0] > w[1]) {
        return Err(SweepError::Unsorted);
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(taus
        .iter()
        .map(|&t| (sorted.len() - sorted.partition_point(|&s| s < t)) as u64)
        .collect())
}

pub fn threshold_sweep(tops: &[LemmaTop1], taus: &[f64]) -> Result<Sweep, SweepError> {
    let sem: Vec<f64> = tops.iter().map(|t| t.semantic.score).collect();
    let lex: Vec<f64> = tops.iter().map(|t| t.lexical.score).collect();
    Ok(Sweep {
        taus: taus.to_vec(),
        semantic: counts_at(&sem, taus)?,
        lexical: counts_at(&lex, taus)?,
    })
}

/// Threshold where the drop in counts accelerates most: the interior point
/// maximizing `(c[i] - c[i+1]) - (c[i-1] - c[i])`. Ties go to the larger tau.
pub fn elbow(taus: &[f64], counts: &[u64]) -> Result<f64, SweepError> {
    let n = taus.len().min(counts.len());
    if n < 3 || taus.len() != counts.len() {
        return Err(SweepError::InsufficientData(n));
    }
    if taus.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SweepError::Unsorted);
    }
    let step = (taus[n - 1] - taus[0]) / (n - 1) as f64;
    if taus.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > 1e-9 * step.abs().max(1.0)) {
        return Err(SweepError::NonUniform);
    }
    let c: Vec<i128> = counts.iter().map(|&x| x as i128).collect();
    let mut best = (1usize, i128::MIN);
    for i in 1..n - 1 {
        let d2 = (c[i] - c[i + 1]) - (c[i - 1] - c[i]);
        if d2 >= best.1 {
            best = (i, d2);
        }
    }
    Ok(taus[best.0])
}

pub fn render_tsv(sweep: &Sweep) -> String {
    let mut out = String::from("tau\tsemantic\tlexical\n");
    for ((t, s), l) in sweep.taus.iter().zip(&sweep.semantic).zip(&sweep.lexical) {
        let _ = writeln!(out, "{t:.3}\t{s}\t{l}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Second-difference oracle written directly from the definition.
    fn oracle(taus: &[f64], c: &[u64]) -> f64 {
        let d2: Vec<(f64, i64)> = (1..c.len() - 1)
            .map(|i| (taus[i], (c[i] as i64 - c[i + 1] as i64) - (c[i - 1] as i64 - c[i] as i64)))
            .collect();
        let max = d2.iter().map(|x| x.1).max().unwrap();
        d2.iter().filter(|x| x.1 == max).map(|x| x.0).fold(f64::MIN, f64::max)
    }

    #[test]
    fn worked_curve() {
        let taus = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
        let counts = [1000, 980, 960, 940, 300, 280];
        assert_eq!(elbow(&taus, &counts).unwrap(), 0.8);
        assert_eq!(oracle(&taus, &counts), 0.8);
    }

    #[test]
    fn linear_and_cliff() {
        let taus = unit_grid(10);
        let linear: Vec<u64> = (0..=10).map(|i| 100 - 5 * i).collect();
        assert_eq!(elbow(&taus, &linear).unwrap(), 0.9);
        let cliff: Vec<u64> = (0..=10).map(|i| if i <= 4 { 50 } else { 3 }).collect();
        assert_eq!(elbow(&taus, &cliff).unwrap(), 0.4);
    }

    #[test]
    fn elbow_errors() {
        assert_eq!(elbow(&[0.0, 1.0], &[2, 1]), Err(SweepError::InsufficientData(2)));
        assert_eq!(elbow(&[0.0, 0.1, 0.5], &[3, 2, 1]), Err(SweepError::NonUniform));
        assert_eq!(elbow(&[0.2, 0.1, 0.0], &[3, 2, 1]), Err(SweepError::Unsorted));
    }

    #[test]
    fn boundary_counts() {
        let scores = [0.0, 0.3, 1.0, 1.0, 0.99];
        assert_eq!(counts_at(&scores, &[0.0, 1.0]).unwrap(), vec![5, 2]);
        let mut synthetic = vec![0.95; 100];
        synthetic.extend(vec![0.5; 100]);
        assert_eq!(counts_at(&synthetic, &[0.8]).unwrap(), vec![100]);
        assert_eq!(counts_at(&scores, &[0.5, 0.2]), Err(SweepError::Unsorted));
    }

    proptest! {
        #[test]
        fn counts_match_brute_force(scores in proptest::collection::vec(0.0f64..=1.0, 0..60), steps in 1usize..20) {
            let taus = unit_grid(steps);
            let got = counts_at(&scores, &taus).unwrap();
            for (t, g) in taus.iter().zip(&got) {
                prop_assert_eq!(*g, scores.iter().filter(|&&s| s >= *t).count() as u64);
            }
            prop_assert!(got.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn elbow_matches_oracle(counts in proptest::collection::vec(0u64..1000, 3..15)) {
            let taus = unit_grid(counts.len() - 1);
            prop_assert_eq!(elbow(&taus, &counts).unwrap(), oracle(&taus, &counts));
        }
    }
}
