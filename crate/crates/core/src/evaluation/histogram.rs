use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::Population;
use crate::scores::{ScoreKind, ScoreVector};
use crate::{Error, Result};

/// Fixed-domain ID/OOD count histograms.
///
/// Counts are integers, so accumulation is exact: any chunking of the input
/// and any merge order give identical histograms. This is what lets the
/// pooled AUROC over hundreds of millions of points be computed by
/// independent workers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinnedScoreHistogram {
    lo: u64,
    hi: u64,
    kind: Option<ScoreKind>,
    counts_id: Vec<u64>,
    counts_ood: Vec<u64>,
}

impl BinnedScoreHistogram {
    /// Histogram over the domain of `kind` for `n_classes` classes.
    pub fn new(kind: ScoreKind, n_classes: usize, bins: usize) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::Argument(format!("class count must be >= 2, got {n_classes}")));
        }
        let (lo, hi) = kind.domain(n_classes);
        let mut h = Self::with_domain(lo, hi, bins)?;
        h.kind = Some(kind);
        Ok(h)
    }

    /// Histogram over an arbitrary domain, for scores of no declared kind.
    pub fn with_domain(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::Argument(format!("bin count must be >= 2, got {bins}")));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Argument(format!("invalid histogram domain [{lo}, {hi}]")));
        }
        Ok(Self {
            lo: lo.to_bits(),
            hi: hi.to_bits(),
            kind: None,
            counts_id: vec![0; bins],
            counts_ood: vec![0; bins],
        })
    }

    /// An empty histogram with the same shape, domain and kind.
    pub fn empty_like(&self) -> Self {
        Self {
            lo: self.lo,
            hi: self.hi,
            kind: self.kind,
            counts_id: vec![0; self.bins()],
            counts_ood: vec![0; self.bins()],
        }
    }

    pub fn bins(&self) -> usize {
        self.counts_id.len()
    }

    pub fn domain(&self) -> (f64, f64) {
        (f64::from_bits(self.lo), f64::from_bits(self.hi))
    }

    pub fn kind(&self) -> Option<ScoreKind> {
        self.kind
    }

    pub fn counts_id(&self) -> &[u64] {
        &self.counts_id
    }

    pub fn counts_ood(&self) -> &[u64] {
        &self.counts_ood
    }

    pub fn counts(&self, population: Population) -> &[u64] {
        match population {
            Population::Id => &self.counts_id,
            Population::Ood => &self.counts_ood,
        }
    }

    pub fn n_id(&self) -> u64 {
        self.counts_id.iter().sum()
    }

    pub fn n_ood(&self) -> u64 {
        self.counts_ood.iter().sum()
    }

    /// Lower edge of bin `b`: `lo + b·(hi − lo)/B`.
    pub fn lower_edge(&self, b: usize) -> f64 {
        let (lo, hi) = self.domain();
        lo + (hi - lo) * (b as f64) / (self.bins() as f64)
    }

    /// `floor((s − lo)/(hi − lo)·B)` clamped to `[0, B − 1]`.
    pub fn bin_of(&self, score: f64) -> usize {
        let (lo, hi) = self.domain();
        let b = self.bins();
        let x = (score - lo) / (hi - lo) * b as f64;
        if x < 0.0 {
            0
        } else if x >= b as f64 {
            b - 1
        } else {
            x as usize
        }
    }

    /// Restore a histogram from stored counts (e.g. a serialized shard).
    pub fn from_counts(
        kind: Option<ScoreKind>,
        lo: f64,
        hi: f64,
        counts_id: Vec<u64>,
        counts_ood: Vec<u64>,
    ) -> Result<Self> {
        if counts_id.len() != counts_ood.len() {
            return Err(Error::Structural(format!(
                "ID has {} bins, OOD has {}",
                counts_id.len(),
                counts_ood.len()
            )));
        }
        let mut h = Self::with_domain(lo, hi, counts_id.len())?;
        h.kind = kind;
        h.counts_id = counts_id;
        h.counts_ood = counts_ood;
        Ok(h)
    }

    fn counts_mut(&mut self, population: Population) -> &mut [u64] {
        match population {
            Population::Id => &mut self.counts_id,
            Population::Ood => &mut self.counts_ood,
        }
    }

    /// Add typed scores. Kind and domain must match the histogram's.
    pub fn accumulate(&mut self, scores: &ScoreVector, population: Population) -> Result<()> {
        if self.kind != Some(scores.kind()) {
            return Err(Error::Structural(format!(
                "{} scores cannot go into a {} histogram",
                scores.kind(),
                self.kind.map_or("untyped", |k| k.name())
            )));
        }
        let (lo, hi) = scores.domain();
        if (lo.to_bits(), hi.to_bits()) != (self.lo, self.hi) {
            return Err(Error::Structural(format!(
                "score domain [{lo}, {hi}] differs from histogram domain {:?}",
                self.domain()
            )));
        }
        self.accumulate_raw(scores.scores(), population)
    }

    /// Add untyped scores; values outside the domain land in the end bins.
    pub fn accumulate_raw(&mut self, scores: &[f64], population: Population) -> Result<()> {
        if let Some((i, s)) = scores.iter().enumerate().find(|(_, s)| s.is_nan()) {
            return Err(Error::NumericInput(format!("score {s} at index {i}")));
        }
        let bins: Vec<usize> = scores.iter().map(|&s| self.bin_of(s)).collect();
        let counts = self.counts_mut(population);
        for b in bins {
            counts[b] += 1;
        }
        Ok(())
    }

    pub fn push(&mut self, score: f64, population: Population) -> Result<()> {
        self.accumulate_raw(&[score], population)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.bins() != other.bins() || self.lo != other.lo || self.hi != other.hi || self.kind != other.kind {
            return Err(Error::Structural(format!(
                "cannot merge histograms of shape ({}, {:?}, {:?}) and ({}, {:?}, {:?})",
                self.bins(),
                self.domain(),
                self.kind,
                other.bins(),
                other.domain(),
                other.kind
            )));
        }
        Ok(())
    }

    /// Elementwise count addition.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.counts_id.iter_mut().zip(&other.counts_id) {
            *a += b;
        }
        for (a, b) in self.counts_ood.iter_mut().zip(&other.counts_ood) {
            *a += b;
        }
        Ok(())
    }

    pub fn merged(a: &Self, b: &Self) -> Result<Self> {
        let mut out = a.clone();
        out.merge(b)?;
        Ok(out)
    }

    pub(crate) fn check_populations(&self) -> Result<(u64, u64)> {
        let (n_id, n_ood) = (self.n_id(), self.n_ood());
        if n_id == 0 || n_ood == 0 {
            return Err(Error::Argument(format!(
                "both populations must be non-empty (n_id = {n_id}, n_ood = {n_ood})"
            )));
        }
        Ok((n_id, n_ood))
    }

    /// Mann–Whitney statistic over bins, crediting within-bin ID/OOD pairs 0.5.
    pub fn auroc(&self) -> Result<f64> {
        let (n_id, n_ood) = self.check_populations()?;
        let mut id_below: u128 = 0;
        let mut doubled_wins: u128 = 0;
        for (&id_b, &ood_b) in self.counts_id.iter().zip(&self.counts_ood) {
            doubled_wins += ood_b as u128 * (2 * id_below + id_b as u128);
            id_below += id_b as u128;
        }
        Ok(doubled_wins as f64 / (2 * n_id as u128 * n_ood as u128) as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_arithmetic() {
        let mut h = BinnedScoreHistogram::with_domain(0.0, 1.0, 2).unwrap();
        h.accumulate_raw(&[0.1, 0.9], Population::Id).unwrap();
        assert_eq!(h.counts_id(), &[1, 1]);
        h.accumulate_raw(&[-5.0, 1.0, 7.0, 0.5], Population::Ood).unwrap();
        assert_eq!(h.counts_ood(), &[1, 3]);
    }

    #[test]
    fn merge_identity_and_additivity() {
        let scores = [0.05, 0.2, 0.21, 0.6, 0.99, 0.5];
        let mut whole = BinnedScoreHistogram::with_domain(0.0, 1.0, 8).unwrap();
        whole.accumulate_raw(&scores, Population::Ood).unwrap();

        let mut a = whole.empty_like();
        let mut b = whole.empty_like();
        a.accumulate_raw(&scores[..2], Population::Ood).unwrap();
        b.accumulate_raw(&scores[2..], Population::Ood).unwrap();
        assert_eq!(BinnedScoreHistogram::merged(&a, &b).unwrap(), whole);
        assert_eq!(BinnedScoreHistogram::merged(&whole, &whole.empty_like()).unwrap(), whole);
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let a = BinnedScoreHistogram::with_domain(0.0, 1.0, 8).unwrap();
        let b = BinnedScoreHistogram::with_domain(0.0, 2.0, 8).unwrap();
        let c = BinnedScoreHistogram::with_domain(0.0, 1.0, 4).unwrap();
        let d = BinnedScoreHistogram::new(ScoreKind::Entropy, 8, 8).unwrap();
        assert!(matches!(BinnedScoreHistogram::merged(&a, &b), Err(Error::Structural(_))));
        assert!(BinnedScoreHistogram::merged(&a, &c).is_err());
        assert!(BinnedScoreHistogram::merged(&a, &d).is_err());

        let msp = ScoreVector::new(ScoreKind::MspComplement, 8, alloc::vec![0.1]).unwrap();
        let mut d = d;
        assert!(matches!(d.accumulate(&msp, Population::Id), Err(Error::Structural(_))));
        let ent4 = ScoreVector::new(ScoreKind::Entropy, 4, alloc::vec![0.1]).unwrap();
        assert!(matches!(d.accumulate(&ent4, Population::Id), Err(Error::Structural(_))));
    }

    #[test]
    fn constructor_arguments() {
        assert!(BinnedScoreHistogram::with_domain(0.0, 1.0, 1).is_err());
        assert!(BinnedScoreHistogram::with_domain(1.0, 1.0, 4).is_err());
        assert!(BinnedScoreHistogram::with_domain(0.0, f64::NAN, 4).is_err());
        let h = BinnedScoreHistogram::new(ScoreKind::MspComplement, 8, 4096).unwrap();
        assert_eq!(h.domain(), (0.0, 0.875));
    }

    #[test]
    fn auroc_examples() {
        let mut h = BinnedScoreHistogram::with_domain(0.0, 1.0, 16).unwrap();
        h.accumulate_raw(&[0.0, 0.01, 0.02], Population::Id).unwrap();
        h.accumulate_raw(&[0.99, 1.0], Population::Ood).unwrap();
        assert_eq!(h.auroc().unwrap(), 1.0);

        let mut h = BinnedScoreHistogram::with_domain(0.0, 1.0, 16).unwrap();
        let s = [0.1, 0.3, 0.3, 0.8, 0.95];
        h.accumulate_raw(&s, Population::Id).unwrap();
        h.accumulate_raw(&s, Population::Ood).unwrap();
        assert_eq!(h.auroc().unwrap(), 0.5);

        let mut h = BinnedScoreHistogram::with_domain(0.0, 1.0, 16).unwrap();
        h.accumulate_raw(&[0.5], Population::Id).unwrap();
        assert!(matches!(h.auroc(), Err(Error::Argument(_))));
        assert!(h.push(f64::NAN, Population::Ood).is_err());
    }
}
