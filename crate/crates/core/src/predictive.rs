//! Per-member prediction tensors and their average, the predictive
//! distribution that every OOD score is computed from.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// Row-sum tolerance for stored probability rows.
pub const PROB_ROW_TOLERANCE: f64 = 1e-5;

/// Storage element of a [`PredictiveTensor`]. Files hold `f32`; `f64` is
/// available for in-memory fixtures. Accumulation is always in `f64`.
pub trait Element: Copy + PartialEq + Into<f64> + fmt::Debug + Send + Sync + 'static {
    fn from_f64(v: f64) -> Self;
}

impl Element for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

impl Element for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TensorKind {
    Probabilities,
    Logits,
}

impl TensorKind {
    pub fn code(self) -> u8 {
        match self {
            TensorKind::Probabilities => 0,
            TensorKind::Logits => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(TensorKind::Probabilities),
            1 => Some(TensorKind::Logits),
            _ => None,
        }
    }
}

/// K members × N points × C classes, member-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveTensor<T: Element = f32> {
    kind: TensorKind,
    n_points: usize,
    n_classes: usize,
    n_members: usize,
    values: Vec<T>,
}

/// `members * points * classes`, or `None` on overflow.
pub fn tensor_len(n_members: usize, n_points: usize, n_classes: usize) -> Option<usize> {
    n_members.checked_mul(n_points)?.checked_mul(n_classes)
}

impl<T: Element> PredictiveTensor<T> {
    pub fn new(
        kind: TensorKind,
        n_points: usize,
        n_classes: usize,
        n_members: usize,
        values: Vec<T>,
    ) -> Result<Self> {
        if n_members < 1 {
            return Err(Error::Validation(format!("member count must be >= 1, got {n_members}")));
        }
        if n_classes < 2 {
            return Err(Error::Validation(format!("class count must be >= 2, got {n_classes}")));
        }
        let expected = tensor_len(n_members, n_points, n_classes)
            .ok_or_else(|| Error::Structural(format!("{n_members}x{n_points}x{n_classes} overflows")))?;
        if values.len() != expected {
            return Err(Error::Structural(format!(
                "expected {expected} values for {n_members}x{n_points}x{n_classes}, got {}",
                values.len()
            )));
        }
        let tensor = Self { kind, n_points, n_classes, n_members, values };
        tensor.validate()?;
        Ok(tensor)
    }

    fn validate(&self) -> Result<()> {
        for (r, row) in self.values.chunks_exact(self.n_classes).enumerate() {
            let (member, point) = (r / self.n_points.max(1), r % self.n_points.max(1));
            let mut sum = 0.0f64;
            for &v in row {
                let v: f64 = v.into();
                if !v.is_finite() {
                    return Err(Error::NumericInput(format!("member {member} point {point}: {v}")));
                }
                if self.kind == TensorKind::Probabilities && !(0.0..=1.0).contains(&v) {
                    return Err(Error::Validation(format!(
                        "member {member} point {point}: probability {v} outside [0, 1]"
                    )));
                }
                sum += v;
            }
            if self.kind == TensorKind::Probabilities && (sum - 1.0).abs() > PROB_ROW_TOLERANCE {
                return Err(Error::Validation(format!(
                    "member {member} point {point}: row sums to {sum}"
                )));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> TensorKind {
        self.kind
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_members(&self) -> usize {
        self.n_members
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// The N×C block of one member.
    pub fn member(&self, m: usize) -> &[T] {
        let block = self.n_points * self.n_classes;
        &self.values[m * block..(m + 1) * block]
    }

    pub fn row(&self, m: usize, n: usize) -> &[T] {
        let start = (m * self.n_points + n) * self.n_classes;
        &self.values[start..start + self.n_classes]
    }
}

/// Member-averaged class probabilities, one row of C entries per point.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDistribution {
    n_points: usize,
    n_classes: usize,
    probs: Vec<f64>,
    members_used: usize,
}

impl PredictiveDistribution {
    /// Checks that every row lies on the probability simplex.
    pub fn new(n_classes: usize, probs: Vec<f64>, members_used: usize) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::Validation(format!("class count must be >= 2, got {n_classes}")));
        }
        if !probs.len().is_multiple_of(n_classes) {
            return Err(Error::Structural(format!(
                "{} entries is not a multiple of {n_classes} classes",
                probs.len()
            )));
        }
        for (n, row) in probs.chunks_exact(n_classes).enumerate() {
            check_probability_row(row).map_err(|e| at_point(e, n))?;
        }
        Ok(Self { n_points: probs.len() / n_classes, n_classes, probs, members_used })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn members_used(&self) -> usize {
        self.members_used
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.probs[n * self.n_classes..(n + 1) * self.n_classes]
    }

    pub fn rows(&self) -> core::slice::ChunksExact<'_, f64> {
        self.probs.chunks_exact(self.n_classes)
    }

    /// Largest |row sum − 1| over all rows.
    pub fn max_row_sum_error(&self) -> f64 {
        self.rows().map(|r| (r.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }
}

pub(crate) fn at_point(err: Error, n: usize) -> Error {
    match err {
        Error::Validation(m) => Error::Validation(format!("point {n}: {m}")),
        Error::NumericInput(m) => Error::NumericInput(format!("point {n}: {m}")),
        other => other,
    }
}

/// A row is valid when all entries are finite, in [0, 1], and sum to one
/// within [`PROB_ROW_TOLERANCE`].
pub fn check_probability_row(row: &[f64]) -> Result<()> {
    let mut sum = 0.0;
    for &p in row {
        if !p.is_finite() {
            return Err(Error::NumericInput(format!("probability {p}")));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Validation(format!("probability {p} outside [0, 1]")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > PROB_ROW_TOLERANCE {
        return Err(Error::Validation(format!("row sums to {sum}")));
    }
    Ok(())
}

/// Max-shifted softmax written into `out`.
pub fn softmax_into(logits: &[f64], out: &mut [f64]) -> Result<()> {
    debug_assert_eq!(logits.len(), out.len());
    if let Some(bad) = logits.iter().find(|z| !z.is_finite()) {
        return Err(Error::NumericInput(format!("logit {bad}")));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = libm::exp(z - max);
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
    Ok(())
}

pub fn softmax_row(logits: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; logits.len()];
    softmax_into(logits, &mut out)?;
    Ok(out)
}

/// Average the first `k` members. Logit tensors are softmaxed per member
/// row before averaging. Rows are summed in member order, so the result for
/// a point does not depend on how points are partitioned across workers.
pub fn aggregate<T: Element>(tensor: &PredictiveTensor<T>, k: usize) -> Result<PredictiveDistribution> {
    if k < 1 || k > tensor.n_members {
        return Err(Error::Argument(format!(
            "ensemble size {k} outside 1..={}",
            tensor.n_members
        )));
    }
    let c = tensor.n_classes;
    let mut acc = vec![0.0f64; tensor.n_points * c];
    let mut logits = vec![0.0f64; c];
    let mut probs = vec![0.0f64; c];
    for m in 0..k {
        let block = tensor.member(m);
        match tensor.kind {
            TensorKind::Probabilities => {
                for (a, &v) in acc.iter_mut().zip(block) {
                    *a += v.into();
                }
            }
            TensorKind::Logits => {
                for (acc_row, row) in acc.chunks_exact_mut(c).zip(block.chunks_exact(c)) {
                    for (l, &v) in logits.iter_mut().zip(row) {
                        *l = v.into();
                    }
                    softmax_into(&logits, &mut probs)?;
                    for (a, p) in acc_row.iter_mut().zip(&probs) {
                        *a += p;
                    }
                }
            }
        }
    }
    let denom = k as f64;
    for a in acc.iter_mut() {
        *a /= denom;
    }
    PredictiveDistribution::new(c, acc, k)
}
