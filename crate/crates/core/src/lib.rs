//! Uncertainty-based out-of-distribution scoring for point cloud semantic
//! segmentation.
//!
//! The crate is `no_std` with `alloc`. It holds the numerical side of the
//! pipeline: labeled clouds and the color-removal transform, ensemble
//! averaging of per-member class probabilities, per-point OOD scores
//! (maximum-softmax complement and entropy), exact and histogram-based
//! AUROC, ROC curves with Youden thresholds, segmentation metrics, and a
//! counter-based synthetic data generator used as a ground-truth oracle.
//!
//! File formats, threading and the command line live in the `pcood` crate.
//!
//! Scores are oriented so that higher always means "more OOD". Ties between
//! an ID and an OOD score are credited one half (Mann–Whitney convention).

#![no_std]

extern crate alloc;

mod error;
pub mod evaluation;
pub mod pointcloud;
pub mod predictive;
pub mod scores;
pub mod synth;

pub use error::{Error, Result};
pub use evaluation::{
    apply_threshold, argmax_labels, exact_auroc, optimal_threshold, roc_curve, BinnedScoreHistogram,
    ConfusionMatrix, Population, RocCurve, SegMetrics, Threshold, DEFAULT_BINS, TIE_RULE,
};
pub use pointcloud::{strip_color, IdOodMask, LabeledCloud, PointRecord};
pub use predictive::{aggregate, softmax_row, PredictiveDistribution, PredictiveTensor, TensorKind};
pub use scores::{entropy, msp_complement, score_distribution, ScoreKind, ScoreVector};
