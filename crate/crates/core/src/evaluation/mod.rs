//! Pooled AUROC (exact and streaming), ROC curves, thresholds and
//! segmentation metrics.
//!
//! Labels follow the usual OOD convention: ID points are negatives (y = 0),
//! OOD points are positives (y = 1). An ID/OOD score tie is credited 0.5.

mod auroc;
mod histogram;
mod roc;
mod segmentation;

pub use auroc::exact_auroc;
pub use histogram::BinnedScoreHistogram;
pub use roc::{optimal_threshold, roc_curve, trapezoid_area, RocCurve, Threshold};
pub use segmentation::{argmax_labels, ConfusionMatrix, SegMetrics};

use alloc::vec::Vec;

use crate::pointcloud::IdOodMask;
use crate::scores::ScoreVector;

/// Tie rule recorded in every report.
pub const TIE_RULE: &str = "mann_whitney_half_credit";

pub const DEFAULT_BINS: usize = 4096;

/// Below this many pooled points the exact (sorting) AUROC is used by default.
pub const EXACT_MODE_LIMIT: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Population {
    Id,
    Ood,
}

/// Flag a point as OOD when its score is at or above `threshold`.
pub fn apply_threshold(scores: &ScoreVector, threshold: f64) -> IdOodMask {
    IdOodMask::new(scores.scores().iter().map(|&s| s >= threshold).collect::<Vec<_>>())
}
