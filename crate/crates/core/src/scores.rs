//! Per-point OOD scores. Both kinds are oriented so that a higher score means
//! a more likely OOD point.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::predictive::{at_point, check_probability_row, PredictiveDistribution};
use crate::{Error, Result};

/// Probabilities below this contribute nothing to the entropy sum.
pub const ENTROPY_FLOOR: f64 = 1e-12;

/// Slack allowed between a raw score and its declared domain.
pub const DOMAIN_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScoreKind {
    /// `1 − max_c p_c`.
    MspComplement,
    /// Shannon entropy in nats, not normalized.
    Entropy,
}

impl ScoreKind {
    /// `(lo, hi)` bounds of the score for `n_classes` classes.
    pub fn domain(self, n_classes: usize) -> (f64, f64) {
        let c = n_classes as f64;
        match self {
            ScoreKind::MspComplement => (0.0, 1.0 - 1.0 / c),
            ScoreKind::Entropy => (0.0, libm::log(c)),
        }
    }

    pub fn score_row(self, row: &[f64]) -> Result<f64> {
        match self {
            ScoreKind::MspComplement => msp_complement(row),
            ScoreKind::Entropy => entropy(row),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScoreKind::MspComplement => "msp",
            ScoreKind::Entropy => "entropy",
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "msp" | "msp_complement" => Ok(ScoreKind::MspComplement),
            "entropy" => Ok(ScoreKind::Entropy),
            other => Err(Error::Argument(format!("unknown score kind {other:?}"))),
        }
    }
}

pub fn msp_complement(probs: &[f64]) -> Result<f64> {
    check_probability_row(probs)?;
    let max = probs.iter().copied().fold(0.0, f64::max);
    Ok(1.0 - max)
}

pub fn entropy(probs: &[f64]) -> Result<f64> {
    check_probability_row(probs)?;
    let h: f64 = probs
        .iter()
        .filter(|&&p| p >= ENTROPY_FLOOR)
        .map(|&p| -p * libm::log(p))
        .sum();
    // -p ln p summed over a one-hot row can come out as -0.0
    Ok(h + 0.0)
}

/// One OOD score per point, clamped into the kind's domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    scores: Vec<f64>,
    kind: ScoreKind,
    n_classes: usize,
}

impl ScoreVector {
    /// Raw scores may overshoot the domain by at most [`DOMAIN_SLACK`] plus
    /// the drift allowed by the row-sum tolerance; they are clamped on entry.
    pub fn new(kind: ScoreKind, n_classes: usize, mut scores: Vec<f64>) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::Validation(format!("class count must be >= 2, got {n_classes}")));
        }
        let (lo, hi) = kind.domain(n_classes);
        for (i, s) in scores.iter_mut().enumerate() {
            if !s.is_finite() {
                return Err(Error::NumericInput(format!("score {s} at point {i}")));
            }
            *s = s.clamp(lo, hi);
        }
        Ok(Self { scores, kind, n_classes })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn into_scores(self) -> Vec<f64> {
        self.scores
    }

    pub fn kind(&self) -> ScoreKind {
        self.kind
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn domain(&self) -> (f64, f64) {
        self.kind.domain(self.n_classes)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

pub fn score_distribution(dist: &PredictiveDistribution, kind: ScoreKind) -> Result<ScoreVector> {
    let scores = dist
        .rows()
        .enumerate()
        .map(|(n, row)| kind.score_row(row).map_err(|e| at_point(e, n)))
        .collect::<Result<Vec<_>>>()?;
    ScoreVector::new(kind, dist.n_classes(), scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const LN8: f64 = 2.0794415416798357;

    #[test]
    fn msp_examples() {
        assert_eq!(msp_complement(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!((msp_complement(&[0.125; 8]).unwrap() - 0.875).abs() < 1e-12);
        assert!((msp_complement(&[0.7, 0.2, 0.1]).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn entropy_examples() {
        let h = entropy(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(h, 0.0);
        assert!(h.is_sign_positive());
        assert!((entropy(&[0.125; 8]).unwrap() - LN8).abs() < 1e-12);
        assert!((entropy(&[0.5, 0.5]).unwrap() - core::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn invalid_rows_rejected() {
        assert!(matches!(msp_complement(&[0.5, 0.4]), Err(Error::Validation(_))));
        assert!(matches!(entropy(&[0.9, 0.2]), Err(Error::Validation(_))));
        assert!(matches!(entropy(&[f64::NAN, 1.0]), Err(Error::NumericInput(_))));
    }

    #[test]
    fn domains() {
        assert_eq!(ScoreKind::MspComplement.domain(8), (0.0, 0.875));
        assert!((ScoreKind::Entropy.domain(8).1 - LN8).abs() < 1e-15);
    }

    #[test]
    fn score_distribution_examples() {
        let d = PredictiveDistribution::new(3, vec![], 1).unwrap();
        assert!(score_distribution(&d, ScoreKind::Entropy).unwrap().is_empty());

        let third = 1.0 / 3.0;
        let d = PredictiveDistribution::new(3, vec![1.0, 0.0, 0.0, third, third, third], 1).unwrap();
        let s = score_distribution(&d, ScoreKind::Entropy).unwrap();
        assert_eq!(s.scores()[0], 0.0);
        assert!((s.scores()[1] - libm::log(3.0)).abs() < 1e-12);

        let d = PredictiveDistribution::new(3, vec![0.7, 0.2, 0.1], 1).unwrap();
        let s = score_distribution(&d, ScoreKind::MspComplement).unwrap();
        assert!((s.scores()[0] - 0.3).abs() < 1e-12);
        assert_eq!(s.domain(), (0.0, 1.0 - 1.0 / 3.0));
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("msp".parse::<ScoreKind>().unwrap(), ScoreKind::MspComplement);
        assert_eq!("entropy".parse::<ScoreKind>().unwrap(), ScoreKind::Entropy);
        assert!("odin".parse::<ScoreKind>().is_err());
    }
}
