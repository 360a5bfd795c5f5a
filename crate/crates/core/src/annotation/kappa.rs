//! Cohen's kappa over the categories {0, 1, 2}.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::curation::Label;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaResult {
    pub kappa: f64,
    pub observed_agreement: f64,
    pub expected_agreement: f64,
    pub n_items: usize,
    /// Set when expected agreement is 1 and the formula is undefined.
    pub degenerate: bool,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("the two raters share no labeled items")]
pub struct NoOverlap;

fn index(l: Label) -> usize {
    u8::from(l) as usize
}

/// Kappa from two aligned label vectors.
pub fn kappa_from_pairs(pairs: &[(Label, Label)]) -> Result<KappaResult, NoOverlap> {
    if pairs.is_empty() {
        return Err(NoOverlap);
    }
    let n = pairs.len() as f64;
    let mut ca = [0usize; 3];
    let mut cb = [0usize; 3];
    let mut agree = 0usize;
    for &(a, b) in pairs {
        ca[index(a)] += 1;
        cb[index(b)] += 1;
        agree += usize::from(a == b);
    }
    let p_o = agree as f64 / n;
    let p_e: f64 = (0..3).map(|c| (ca[c] as f64 / n) * (cb[c] as f64 / n)).sum();
    // p_e == 1 needs both raters constant on the same category
    let degenerate = (0..3).any(|c| ca[c] == pairs.len() && cb[c] == pairs.len());
    let kappa = if degenerate {
        if p_o == 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        // integer numerator and denominator keep exact ratios exact
        let len = pairs.len() as u128;
        let chance: u128 = (0..3).map(|c| ca[c] as u128 * cb[c] as u128).sum();
        let num = (len * agree as u128) as f64 - chance as f64;
        num / (len * len - chance) as f64
    };
    Ok(KappaResult {
        kappa,
        observed_agreement: p_o,
        expected_agreement: p_e,
        n_items: pairs.len(),
        degenerate,
    })
}

/// Kappa over the items both raters labeled.
pub fn cohen_kappa(a: &BTreeMap<String, Label>, b: &BTreeMap<String, Label>) -> Result<KappaResult, NoOverlap> {
    let pairs: Vec<(Label, Label)> = a.iter().filter_map(|(k, la)| b.get(k).map(|lb| (*la, *lb))).collect();
    kappa_from_pairs(&pairs)
}

/// Size-weighted mean of several kappas.
pub fn weighted_mean(results: &[KappaResult]) -> Option<f64> {
    let n: usize = results.iter().map(|r| r.n_items).sum();
    (n > 0).then(|| results.iter().map(|r| r.kappa * r.n_items as f64).sum::<f64>() / n as f64)
}

#[cfg(test)]
pub(crate) mod oracle {
    use crate::curation::Label;

    /// Contingency-table formulation with exact rational arithmetic on
    /// integer counts.
    pub fn kappa(pairs: &[(Label, Label)]) -> f64 {
        let mut table = [[0i64; 3]; 3];
        for &(a, b) in pairs {
            table[u8::from(a) as usize][u8::from(b) as usize] += 1;
        }
        let n: i64 = pairs.len() as i64;
        let diag: i64 = (0..3).map(|i| table[i][i]).sum();
        let rows: Vec<i64> = (0..3).map(|i| table[i].iter().sum()).collect();
        let cols: Vec<i64> = (0..3).map(|j| (0..3).map(|i| table[i][j]).sum()).collect();
        let chance: i64 = (0..3).map(|c| rows[c] * cols[c]).sum();
        // kappa = (n*diag - chance) / (n^2 - chance)
        let den = n * n - chance;
        if den == 0 {
            return if diag == n { 1.0 } else { 0.0 };
        }
        (n * diag - chance) as f64 / den as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn l(v: u8) -> Label {
        Label::try_from(v).unwrap()
    }

    fn pairs(a: &[u8], b: &[u8]) -> Vec<(Label, Label)> {
        a.iter().zip(b).map(|(&x, &y)| (l(x), l(y))).collect()
    }

    #[test]
    fn worked_example() {
        let p = pairs(&[1, 1, 0, 0, 2, 2], &[1, 0, 0, 0, 2, 1]);
        let r = kappa_from_pairs(&p).unwrap();
        assert!((r.observed_agreement - 4.0 / 6.0).abs() < 1e-15);
        assert!((r.expected_agreement - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.kappa - 0.5).abs() < 1e-12);
        assert_eq!(oracle::kappa(&p), 0.5);
    }

    #[test]
    fn agreement_and_constant_raters() {
        let p = pairs(&[0, 1, 2, 1], &[0, 1, 2, 1]);
        assert_eq!(kappa_from_pairs(&p).unwrap().kappa, 1.0);
        let c = kappa_from_pairs(&pairs(&[1, 1, 1], &[0, 0, 0])).unwrap();
        assert!(c.kappa <= 0.0);
        let same = kappa_from_pairs(&pairs(&[1, 1], &[1, 1])).unwrap();
        assert!(same.degenerate && same.kappa == 1.0);
        assert_eq!(kappa_from_pairs(&[]), Err(NoOverlap));
    }

    #[test]
    fn intersection_only() {
        let a: BTreeMap<String, Label> = [("x", 1), ("y", 0), ("z", 2)].iter().map(|(k, v)| (k.to_string(), l(*v))).collect();
        let b: BTreeMap<String, Label> = [("x", 1), ("y", 0), ("w", 2)].iter().map(|(k, v)| (k.to_string(), l(*v))).collect();
        let r = cohen_kappa(&a, &b).unwrap();
        assert_eq!(r.n_items, 2);
        assert_eq!(r.kappa, 1.0);
        assert_eq!(weighted_mean(&[r, KappaResult { kappa: 0.0, n_items: 2, ..r }]), Some(0.5));
    }

    proptest! {
        #[test]
        fn symmetric_and_matches_oracle(v in proptest::collection::vec((0u8..3, 0u8..3), 1..40)) {
            let p: Vec<(Label, Label)> = v.iter().map(|&(a, b)| (l(a), l(b))).collect();
            let swapped: Vec<(Label, Label)> = p.iter().map(|&(a, b)| (b, a)).collect();
            let k = kappa_from_pairs(&p).unwrap();
            prop_assert!((k.kappa - oracle::kappa(&p)).abs() < 1e-12);
            prop_assert_eq!(k.kappa, kappa_from_pairs(&swapped).unwrap().kappa);
            prop_assert!((-1.0..=1.0).contains(&k.kappa));
        }
    }
}
