use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::{Error, Result};

fn sorted_finite(scores: &[f64], what: &str) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::Argument(format!("{what} population is empty")));
    }
    if let Some((i, s)) = scores.iter().enumerate().find(|(_, s)| !s.is_finite()) {
        return Err(Error::NumericInput(format!("{what} score {s} at index {i}")));
    }
    let mut v = scores.to_vec();
    v.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    Ok(v)
}

/// Tie-credited Mann–Whitney statistic `P(ood > id) + ½·P(ood = id)`.
///
/// Both populations are sorted and walked once; the pair counts are kept as
/// integers so the only rounding is the final division.
pub fn exact_auroc(id_scores: &[f64], ood_scores: &[f64]) -> Result<f64> {
    let id = sorted_finite(id_scores, "ID")?;
    let ood = sorted_finite(ood_scores, "OOD")?;

    // twice the number of (id, ood) pairs won by ood, ties counting once
    let mut doubled_wins: u128 = 0;
    let (mut below, mut at_or_below) = (0usize, 0usize);
    let mut i = 0;
    while i < ood.len() {
        let v = ood[i];
        let mut run = 1;
        while i + run < ood.len() && ood[i + run] == v {
            run += 1;
        }
        while below < id.len() && id[below] < v {
            below += 1;
        }
        at_or_below = at_or_below.max(below);
        while at_or_below < id.len() && id[at_or_below] <= v {
            at_or_below += 1;
        }
        let ties = at_or_below - below;
        doubled_wins += run as u128 * (2 * below as u128 + ties as u128);
        i += run;
    }
    let pairs = 2 * id.len() as u128 * ood.len() as u128;
    Ok(doubled_wins as f64 / pairs as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(exact_auroc(&[0.1, 0.2], &[0.8, 0.9]).unwrap(), 1.0);
        assert_eq!(exact_auroc(&[0.5], &[0.5]).unwrap(), 0.5);
        // pairs won by ood: 0.8 beats all three, 0.4 beats 0.1 and 0.35 and ties 0.4
        let a = exact_auroc(&[0.1, 0.4, 0.35], &[0.8, 0.4]).unwrap();
        assert!((a - 5.5 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(matches!(exact_auroc(&[], &[1.0]), Err(Error::Argument(_))));
        assert!(matches!(exact_auroc(&[1.0], &[]), Err(Error::Argument(_))));
        assert!(matches!(exact_auroc(&[f64::NAN], &[1.0]), Err(Error::NumericInput(_))));
        assert!(matches!(exact_auroc(&[0.0], &[f64::INFINITY]), Err(Error::NumericInput(_))));
    }

    #[test]
    fn signed_zero_ties() {
        assert_eq!(exact_auroc(&[-0.0], &[0.0]).unwrap(), 0.5);
    }

    #[test]
    fn reversed_and_duplicated() {
        assert_eq!(exact_auroc(&[0.9, 0.8], &[0.1, 0.2]).unwrap(), 0.0);
        let a = exact_auroc(&[0.3; 5], &[0.3, 0.3, 0.7]).unwrap();
        assert!((a - (5.0 * 0.5 * 2.0 + 5.0) / 15.0).abs() < 1e-15);
    }
}
