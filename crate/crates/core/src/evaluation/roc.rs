use alloc::vec::Vec;

use super::histogram::BinnedScoreHistogram;
use crate::Result;

/// ROC curve swept over histogram bin edges from high to low.
///
/// `thresholds[i]` produces the point `(fpr[i + 1], tpr[i + 1])`; index 0 of
/// the rate vectors is the `(0, 0)` origin.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    thresholds: Vec<f64>,
    fpr: Vec<f64>,
    tpr: Vec<f64>,
    auroc: f64,
    cum_id: Vec<u64>,
    cum_ood: Vec<u64>,
}

impl RocCurve {
    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn fpr(&self) -> &[f64] {
        &self.fpr
    }

    pub fn tpr(&self) -> &[f64] {
        &self.tpr
    }

    /// Trapezoidal area under `(fpr, tpr)`.
    pub fn auroc(&self) -> f64 {
        self.auroc
    }

    pub fn n_id(&self) -> u64 {
        *self.cum_id.last().unwrap_or(&0)
    }

    pub fn n_ood(&self) -> u64 {
        *self.cum_ood.last().unwrap_or(&0)
    }

    /// ID points at or above each threshold (same indexing as the rates).
    pub fn cumulative_id(&self) -> &[u64] {
        &self.cum_id
    }

    pub fn cumulative_ood(&self) -> &[u64] {
        &self.cum_ood
    }
}

pub fn trapezoid_area(fpr: &[f64], tpr: &[f64]) -> f64 {
    fpr.windows(2)
        .zip(tpr.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[1] + y[0]) * 0.5)
        .sum()
}

/// Threshold `t` counts a point as OOD when its bin's lower edge is `>= t`,
/// i.e. `tpr` and `fpr` are the fractions of OOD and ID points in bins at or
/// above the threshold's bin.
pub fn roc_curve(h: &BinnedScoreHistogram) -> Result<RocCurve> {
    let (n_id, n_ood) = h.check_populations()?;
    let bins = h.bins();
    let mut thresholds = Vec::with_capacity(bins);
    let mut cum_id = Vec::with_capacity(bins + 1);
    let mut cum_ood = Vec::with_capacity(bins + 1);
    cum_id.push(0u64);
    cum_ood.push(0u64);
    let (mut a, mut b) = (0u64, 0u64);
    for bin in (0..bins).rev() {
        a += h.counts_id()[bin];
        b += h.counts_ood()[bin];
        thresholds.push(h.lower_edge(bin));
        cum_id.push(a);
        cum_ood.push(b);
    }
    let fpr: Vec<f64> = cum_id.iter().map(|&c| c as f64 / n_id as f64).collect();
    let tpr: Vec<f64> = cum_ood.iter().map(|&c| c as f64 / n_ood as f64).collect();
    let auroc = trapezoid_area(&fpr, &tpr);
    Ok(RocCurve { thresholds, fpr, tpr, auroc, cum_id, cum_ood })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    /// In OOD-score space: points scoring at or above it are flagged OOD.
    pub threshold: f64,
    /// Youden's J = tpr − fpr at that threshold.
    pub youden_j: f64,
}

/// Threshold maximizing Youden's J, smallest threshold on ties.
///
/// J is compared exactly through the integer counts behind the curve
/// (`J·n_id·n_ood = ood_above·n_id − id_above·n_ood`), so near-equal float
/// values never decide a tie.
pub fn optimal_threshold(curve: &RocCurve) -> Threshold {
    let (n_id, n_ood) = (curve.n_id() as i128, curve.n_ood() as i128);
    let mut best: Option<(i128, usize)> = None;
    for i in 0..curve.thresholds.len() {
        let j = curve.cum_ood[i + 1] as i128 * n_id - curve.cum_id[i + 1] as i128 * n_ood;
        // thresholds descend, so >= keeps the smallest among equal maxima
        if best.is_none_or(|(bj, _)| j >= bj) {
            best = Some((j, i));
        }
    }
    let (_, i) = best.expect("a curve has at least two thresholds");
    Threshold {
        threshold: curve.thresholds[i],
        youden_j: curve.tpr[i + 1] - curve.fpr[i + 1],
    }
}
