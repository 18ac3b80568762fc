//! Synthetic ID/OOD populations with known discrimination.
//!
//! All randomness comes from a [`CounterRng`] addressed by element index, so
//! any partition of the index space across workers reproduces the same
//! values bit for bit.

pub mod normal;
mod rng;

pub use rng::{philox4x32, CounterRng};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::evaluation::Population;
use crate::predictive::{softmax_into, PredictiveTensor, TensorKind};
use crate::{Error, Result};

const STREAM_SCORES_ID: u32 = 0;
const STREAM_SCORES_OOD: u32 = 1;
const STREAM_NOISE_ID: u32 = 2;
const STREAM_NOISE_OOD: u32 = 3;
const STREAM_TRUE_CLASS: u32 = 4;

/// Two normal score populations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPairSpec {
    pub mu_id: f64,
    pub sigma_id: f64,
    pub mu_ood: f64,
    pub sigma_ood: f64,
    pub n_id: usize,
    pub n_ood: usize,
    pub seed: u64,
}

impl GaussianPairSpec {
    /// Unit-variance populations separated by `delta_mu`.
    pub fn unit(delta_mu: f64, n: usize, seed: u64) -> Self {
        Self { mu_id: 0.0, sigma_id: 1.0, mu_ood: delta_mu, sigma_ood: 1.0, n_id: n, n_ood: n, seed }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.mu_id, self.sigma_id, self.mu_ood, self.sigma_ood].iter().all(|v| v.is_finite());
        if !finite || self.sigma_id <= 0.0 || self.sigma_ood <= 0.0 {
            return Err(Error::Argument(format!("invalid gaussian parameters {self:?}")));
        }
        if self.n_id < 1 || self.n_ood < 1 {
            return Err(Error::Argument(format!(
                "population sizes must be >= 1, got {} and {}",
                self.n_id, self.n_ood
            )));
        }
        Ok(())
    }

    pub fn len(&self, population: Population) -> usize {
        match population {
            Population::Id => self.n_id,
            Population::Ood => self.n_ood,
        }
    }

    /// Write samples `range` of one population into `out`.
    pub fn fill(&self, population: Population, range: Range<usize>, out: &mut [f64]) {
        debug_assert_eq!(range.len(), out.len());
        let rng = CounterRng::new(self.seed);
        let (stream, mu, sigma) = match population {
            Population::Id => (STREAM_SCORES_ID, self.mu_id, self.sigma_id),
            Population::Ood => (STREAM_SCORES_OOD, self.mu_ood, self.sigma_ood),
        };
        for (o, i) in out.iter_mut().zip(range) {
            *o = mu + sigma * rng.normal(stream, i as u64, 0);
        }
    }
}

/// Φ((μ_ood − μ_id) / √(σ_id² + σ_ood²)).
pub fn analytic_auroc(spec: &GaussianPairSpec) -> f64 {
    let spread = libm::sqrt(spec.sigma_id * spec.sigma_id + spec.sigma_ood * spec.sigma_ood);
    normal::cdf((spec.mu_ood - spec.mu_id) / spread)
}

/// Raw (unclamped) samples for both populations.
pub fn sample_scores(spec: &GaussianPairSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    spec.validate()?;
    let mut id = vec![0.0; spec.n_id];
    let mut ood = vec![0.0; spec.n_ood];
    spec.fill(Population::Id, 0..spec.n_id, &mut id);
    spec.fill(Population::Ood, 0..spec.n_ood, &mut ood);
    Ok((id, ood))
}

/// Synthetic prediction tensors.
///
/// ID logits are `s·e_t + z` with a per-point true class `t`; OOD logits are
/// `z / (1 + s)`, with `z` standard normal per (member, point, class) and `s`
/// the separability. At `s = 0` both populations follow the same law; as `s`
/// grows ID rows approach one-hot and OOD rows approach uniform. Rows are
/// stored as softmax probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorSpec {
    pub n_points: usize,
    pub n_classes: usize,
    pub n_members: usize,
    pub separability: f64,
    pub seed: u64,
}

impl TensorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 || self.n_classes > u16::MAX as usize {
            return Err(Error::Argument(format!("class count {} outside 2..=65535", self.n_classes)));
        }
        if self.n_members < 1 || self.n_members > u16::MAX as usize {
            return Err(Error::Argument(format!("member count {} outside 1..=65535", self.n_members)));
        }
        if !(self.separability.is_finite() && self.separability >= 0.0) {
            return Err(Error::Argument(format!("separability {} must be finite and >= 0", self.separability)));
        }
        Ok(())
    }

    /// Per-point class the ID population concentrates on (0-based).
    pub fn true_class(&self, point: usize) -> usize {
        let rng = CounterRng::new(self.seed);
        (rng.bits(STREAM_TRUE_CLASS, point as u64, 0) % self.n_classes as u64) as usize
    }

    /// Probability rows of one member for `points`, written into `out`
    /// (`points.len() * n_classes` entries).
    pub fn fill_member(&self, population: Population, member: usize, points: Range<usize>, out: &mut [f32]) {
        let c = self.n_classes;
        debug_assert_eq!(out.len(), points.len() * c);
        let rng = CounterRng::new(self.seed);
        let s = self.separability;
        let mut logits = vec![0.0f64; c];
        let mut probs = vec![0.0f64; c];
        for (row, point) in out.chunks_exact_mut(c).zip(points) {
            let (stream, scale, boost) = match population {
                Population::Id => (STREAM_NOISE_ID, 1.0, Some(self.true_class(point))),
                Population::Ood => (STREAM_NOISE_OOD, 1.0 / (1.0 + s), None),
            };
            for (class, l) in logits.iter_mut().enumerate() {
                let lane = member as u32 | (class as u32) << 16;
                *l = scale * rng.normal(stream, point as u64, lane);
            }
            if let Some(t) = boost {
                logits[t] += s;
            }
            softmax_into(&logits, &mut probs).expect("synthetic logits are finite");
            for (o, p) in row.iter_mut().zip(&probs) {
                *o = *p as f32;
            }
        }
    }

    pub fn tensor(&self, population: Population) -> Result<PredictiveTensor<f32>> {
        self.validate()?;
        let block = self.n_points * self.n_classes;
        let mut values = vec![0.0f32; block * self.n_members];
        for (m, chunk) in values.chunks_exact_mut(block.max(1)).enumerate().take(self.n_members) {
            self.fill_member(population, m, 0..self.n_points, chunk);
        }
        values.truncate(block * self.n_members);
        PredictiveTensor::new(TensorKind::Probabilities, self.n_points, self.n_classes, self.n_members, values)
    }
}

/// ID and OOD probability tensors of identical shape.
pub fn synth_tensor(
    n_points: usize,
    n_classes: usize,
    n_members: usize,
    separability: f64,
    seed: u64,
) -> Result<(PredictiveTensor<f32>, PredictiveTensor<f32>)> {
    let spec = TensorSpec { n_points, n_classes, n_members, separability, seed };
    Ok((spec.tensor(Population::Id)?, spec.tensor(Population::Ood)?))
}
