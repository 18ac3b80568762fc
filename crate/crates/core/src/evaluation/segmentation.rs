use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::predictive::PredictiveDistribution;
use crate::{Error, Result};

/// Predicted class per point: `1 + argmax`, lowest class index on ties.
pub fn argmax_labels(dist: &PredictiveDistribution) -> Vec<u16> {
    dist.rows()
        .map(|row| {
            let mut best = 0;
            for (c, &p) in row.iter().enumerate().skip(1) {
                if p > row[best] {
                    best = c;
                }
            }
            (best + 1) as u16
        })
        .collect()
}

/// Rows are ground truth `1..=C`, columns predictions `1..=C`. Points whose
/// ground truth is 0 (unlabeled) only bump `ignored`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
    ignored: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegMetrics {
    /// `None` where the class is absent from both truth and prediction.
    pub per_class_iou: Vec<Option<f64>>,
    /// Mean over classes with a defined IoU.
    pub mean_iou: f64,
    pub accuracy: f64,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Result<Self> {
        if n_classes < 1 || n_classes > u16::MAX as usize {
            return Err(Error::Argument(format!("class count {n_classes} out of range")));
        }
        Ok(Self { n_classes, counts: vec![0; n_classes * n_classes], ignored: 0 })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Count for ground truth `truth` and prediction `predicted`, both 1-based.
    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[(truth - 1) * self.n_classes + (predicted - 1)]
    }

    pub fn ignored(&self) -> u64 {
        self.ignored
    }

    pub fn counted(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Validates every label before touching any count.
    pub fn accumulate(&mut self, predicted: &[u16], truth: &[u16]) -> Result<()> {
        if predicted.len() != truth.len() {
            return Err(Error::Structural(format!(
                "{} predictions but {} ground-truth labels",
                predicted.len(),
                truth.len()
            )));
        }
        let c = self.n_classes;
        for (i, (&p, &t)) in predicted.iter().zip(truth).enumerate() {
            if t as usize > c {
                return Err(Error::Validation(format!("ground-truth label {t} at index {i} outside 0..={c}")));
            }
            if p == 0 || p as usize > c {
                return Err(Error::Validation(format!("predicted label {p} at index {i} outside 1..={c}")));
            }
        }
        for (&p, &t) in predicted.iter().zip(truth) {
            if t == 0 {
                self.ignored += 1;
            } else {
                self.counts[(t as usize - 1) * c + (p as usize - 1)] += 1;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.n_classes != other.n_classes {
            return Err(Error::Structural(format!(
                "cannot merge {}-class and {}-class matrices",
                self.n_classes, other.n_classes
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.ignored += other.ignored;
        Ok(())
    }

    pub fn seg_metrics(&self) -> Result<SegMetrics> {
        let total = self.counted();
        if total == 0 {
            return Err(Error::Validation(format!(
                "no labeled points ({} ignored); metrics are undefined",
                self.ignored
            )));
        }
        let c = self.n_classes;
        let mut per_class_iou = Vec::with_capacity(c);
        let mut ratios = Vec::with_capacity(c);
        let mut trace = 0u64;
        for k in 1..=c {
            let tp = self.get(k, k);
            let row: u64 = (1..=c).map(|p| self.get(k, p)).sum();
            let col: u64 = (1..=c).map(|t| self.get(t, k)).sum();
            let union = row + col - tp;
            trace += tp;
            if union > 0 {
                ratios.push((tp, union));
            }
            per_class_iou.push((union > 0).then(|| tp as f64 / union as f64));
        }
        let mean_iou = mean_of_ratios(&ratios);
        Ok(SegMetrics { per_class_iou, mean_iou, accuracy: trace as f64 / total as f64 })
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Mean of `num / den` pairs, summed as a reduced fraction so that small
/// cases (7/12 and the like) come out correctly rounded. Falls back to a
/// float sum if the fraction outgrows `u128`.
fn mean_of_ratios(ratios: &[(u64, u64)]) -> f64 {
    let exact = ratios.iter().try_fold((0u128, 1u128), |(n, d), &(a, b)| {
        let (a, b) = (a as u128, b as u128);
        let g = gcd(d, b);
        let den = (d / g).checked_mul(b)?;
        let num = n.checked_mul(b / g)?.checked_add(a.checked_mul(d / g)?)?;
        let r = gcd(num, den).max(1);
        Some((num / r, den / r))
    });
    let count = ratios.len() as u128;
    if let Some((num, den)) = exact {
        if let Some(den) = den.checked_mul(count) {
            let r = gcd(num, den).max(1);
            let (num, den) = (num / r, den / r);
            if num < 1 << 53 && den < 1 << 53 {
                return num as f64 / den as f64;
            }
        }
    }
    ratios.iter().map(|&(a, b)| a as f64 / b as f64).sum::<f64>() / ratios.len() as f64
}
