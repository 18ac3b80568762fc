//! Streaming evaluation over PCOD files and score CSVs.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use pcood_core::evaluation::{BinnedScoreHistogram, Population, EXACT_MODE_LIMIT};
use pcood_core::synth::GaussianPairSpec;
use pcood_core::{aggregate, exact_auroc, score_distribution, PredictiveDistribution, ScoreKind, ScoreVector};

use crate::parallel::{ordered_chunks, DEFAULT_CHUNK};
use crate::pcod::{PcodFile, PcodHeader, MAGIC};
use crate::text::read_scores_csv;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScoreInput {
    /// Prediction tensor; scores are computed from it.
    Pcod(PathBuf),
    /// Precomputed `index,score` CSV.
    Csv(PathBuf),
}

impl ScoreInput {
    /// Decide by the file's leading bytes: PCOD magic or CSV text.
    pub fn detect(path: &Path) -> Result<Self> {
        let mut f = File::open(path).map_err(|e| Error::io("opening", e).at(path))?;
        let mut magic = [0u8; 4];
        let mut got = 0;
        while got < 4 {
            match f.read(&mut magic[got..]).map_err(|e| Error::io("reading", e).at(path))? {
                0 => break,
                n => got += n,
            }
        }
        Ok(if got == 4 && magic == MAGIC {
            ScoreInput::Pcod(path.to_path_buf())
        } else {
            ScoreInput::Csv(path.to_path_buf())
        })
    }

    pub fn path(&self) -> &Path {
        match self {
            ScoreInput::Pcod(p) | ScoreInput::Csv(p) => p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Hist,
    Auto,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Mode::Exact),
            "hist" => Ok(Mode::Hist),
            "auto" => Ok(Mode::Auto),
            other => Err(Error::Usage(format!("unknown mode {other:?} (exact, hist, auto)"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub kind: ScoreKind,
    pub workers: usize,
    pub chunk: usize,
}

impl Options {
    pub fn new(kind: ScoreKind, workers: usize) -> Self {
        Self { kind, workers, chunk: DEFAULT_CHUNK }
    }
}

pub fn read_header(path: &Path) -> Result<PcodHeader> {
    Ok(PcodFile::open(path)?.header())
}

/// Aggregate the first `k` members of a PCOD file chunk by chunk, handing
/// each averaged block to `consume` in point order.
pub fn for_each_distribution(
    path: &Path,
    k: usize,
    opts: &Options,
    mut consume: impl FnMut(PredictiveDistribution) -> Result<()>,
) -> Result<PcodHeader> {
    let header = read_header(path)?;
    let n = header.n_points_usize()?;
    if k < 1 || k > header.n_members as usize {
        return Err(Error::Usage(format!(
            "ensemble size {k} outside 1..={} for {}",
            header.n_members,
            path.display()
        )));
    }
    ordered_chunks(
        n,
        opts.chunk,
        opts.workers,
        || PcodFile::open(path),
        |file, range| {
            let start = range.start;
            let block = file.read_block(k, range)?;
            aggregate(&block, k).map_err(|e| Error::from(e).context(format!("points from {start}")))
        },
        &mut consume,
    )
    .map_err(|e| e.at(path))?;
    Ok(header)
}

/// Score every point of a PCOD file in order.
pub fn for_each_score_block(
    path: &Path,
    k: usize,
    opts: &Options,
    mut consume: impl FnMut(ScoreVector) -> Result<()>,
) -> Result<PcodHeader> {
    let kind = opts.kind;
    let header = read_header(path)?;
    let n = header.n_points_usize()?;
    if k < 1 || k > header.n_members as usize {
        return Err(Error::Usage(format!(
            "ensemble size {k} outside 1..={} for {}",
            header.n_members,
            path.display()
        )));
    }
    ordered_chunks(
        n,
        opts.chunk,
        opts.workers,
        || PcodFile::open(path),
        |file, range| {
            let start = range.start;
            let block = file.read_block(k, range)?;
            let scores = aggregate(&block, k).and_then(|d| score_distribution(&d, kind));
            scores.map_err(|e| Error::from(e).context(format!("points from {start}")))
        },
        &mut consume,
    )
    .map_err(|e| e.at(path))?;
    Ok(header)
}

pub fn collect_scores(path: &Path, k: usize, opts: &Options) -> Result<ScoreVector> {
    let mut all = Vec::new();
    let header = for_each_score_block(path, k, opts, |s| {
        all.extend_from_slice(s.scores());
        Ok(())
    })?;
    Ok(ScoreVector::new(opts.kind, header.n_classes as usize, all)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub auroc: f64,
    pub exact: bool,
    pub histogram: BinnedScoreHistogram,
    pub n_id: u64,
    pub n_ood: u64,
}

/// Inputs of one population must all be PCOD or all be CSV.
fn split_inputs(inputs: &[ScoreInput]) -> Result<(Vec<&Path>, Vec<&Path>)> {
    let mut pcod = Vec::new();
    let mut csv = Vec::new();
    for i in inputs {
        match i {
            ScoreInput::Pcod(p) => pcod.push(p.as_path()),
            ScoreInput::Csv(p) => csv.push(p.as_path()),
        }
    }
    Ok((pcod, csv))
}

/// Pooled AUROC of all ID inputs against all OOD inputs.
///
/// PCOD inputs are aggregated over their first `k` members and scored; CSV
/// inputs are taken as given and binned over their observed range. Exact
/// mode sorts every score; histogram mode streams through fixed bins. The
/// histogram is built in both modes for ROC and threshold extraction.
pub fn evaluate(
    id: &[ScoreInput],
    ood: &[ScoreInput],
    k: Option<usize>,
    bins: usize,
    mode: Mode,
    opts: &Options,
) -> Result<Evaluation> {
    if id.is_empty() || ood.is_empty() {
        return Err(Error::Usage(String::from("need at least one --id and one --ood input")));
    }
    let all: Vec<ScoreInput> = id.iter().chain(ood).cloned().collect();
    let (pcod, csv) = split_inputs(&all)?;
    if !pcod.is_empty() && !csv.is_empty() {
        return Err(Error::Usage(String::from("inputs must be all PCOD tensors or all score CSVs")));
    }

    if !csv.is_empty() {
        let load = |inputs: &[ScoreInput]| -> Result<Vec<f64>> {
            let mut v = Vec::new();
            for i in inputs {
                v.extend(read_scores_csv(i.path())?);
            }
            Ok(v)
        };
        let (id_scores, ood_scores) = (load(id)?, load(ood)?);
        if id_scores.is_empty() || ood_scores.is_empty() {
            return Err(Error::from(pcood_core::Error::Argument(format!(
                "empty population (n_id = {}, n_ood = {})",
                id_scores.len(),
                ood_scores.len()
            ))));
        }
        let lo = id_scores.iter().chain(&ood_scores).copied().fold(f64::INFINITY, f64::min);
        let hi = id_scores.iter().chain(&ood_scores).copied().fold(f64::NEG_INFINITY, f64::max);
        let hi = if hi > lo { hi } else { lo + 1.0 };
        let mut h = BinnedScoreHistogram::with_domain(lo, hi, bins)?;
        h.accumulate_raw(&id_scores, Population::Id)?;
        h.accumulate_raw(&ood_scores, Population::Ood)?;
        let total = (id_scores.len() + ood_scores.len()) as u64;
        let exact = use_exact(mode, total);
        let auroc = if exact { exact_auroc(&id_scores, &ood_scores)? } else { h.auroc()? };
        return Ok(Evaluation { auroc, exact, n_id: h.n_id(), n_ood: h.n_ood(), histogram: h });
    }

    let headers: Vec<PcodHeader> = pcod.iter().map(|p| read_header(p)).collect::<Result<_>>()?;
    let classes = headers[0].n_classes;
    if let Some((p, h)) = pcod.iter().zip(&headers).find(|(_, h)| h.n_classes != classes) {
        return Err(Error::Usage(format!(
            "{} has {} classes, expected {classes}",
            p.display(),
            h.n_classes
        )));
    }
    let k = k.unwrap_or_else(|| headers.iter().map(|h| h.n_members as usize).min().unwrap_or(1));
    let total: u64 = headers.iter().map(|h| h.n_points).sum();
    let exact = use_exact(mode, total);

    let mut h = BinnedScoreHistogram::new(opts.kind, classes as usize, bins)?;
    let mut pooled: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for (population, inputs, slot) in [(Population::Id, id, 0), (Population::Ood, ood, 1)] {
        for input in inputs {
            for_each_score_block(input.path(), k, opts, |s| {
                h.accumulate(&s, population)?;
                if exact {
                    pooled[slot].extend_from_slice(s.scores());
                }
                Ok(())
            })?;
        }
    }
    let auroc = if exact { exact_auroc(&pooled[0], &pooled[1])? } else { h.auroc()? };
    Ok(Evaluation { auroc, exact, n_id: h.n_id(), n_ood: h.n_ood(), histogram: h })
}

pub fn use_exact(mode: Mode, total_points: u64) -> bool {
    match mode {
        Mode::Exact => true,
        Mode::Hist => false,
        Mode::Auto => total_points < EXACT_MODE_LIMIT,
    }
}

/// Stream a synthetic Gaussian pair straight into a histogram on `[lo, hi]`
/// without materializing the samples.
pub fn gaussian_histogram(
    spec: &GaussianPairSpec,
    lo: f64,
    hi: f64,
    bins: usize,
    workers: usize,
) -> Result<BinnedScoreHistogram> {
    spec.validate()?;
    let mut total = BinnedScoreHistogram::with_domain(lo, hi, bins)?;
    for population in [Population::Id, Population::Ood] {
        let template = total.empty_like();
        ordered_chunks(
            spec.len(population),
            DEFAULT_CHUNK,
            workers,
            || Ok(vec![0.0; DEFAULT_CHUNK]),
            |buf, range| {
                let out = &mut buf[..range.len()];
                spec.fill(population, range, out);
                let mut h = template.clone();
                h.accumulate_raw(out, population)?;
                Ok(h)
            },
            |h| Ok(total.merge(&h)?),
        )?;
    }
    Ok(total)
}

/// Materialize one Gaussian population using `workers` threads.
pub fn gaussian_samples(spec: &GaussianPairSpec, population: Population, workers: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.len(population));
    ordered_chunks(
        spec.len(population),
        DEFAULT_CHUNK,
        workers,
        || Ok(()),
        |_, range| {
            let mut v = vec![0.0; range.len()];
            spec.fill(population, range, &mut v);
            Ok(v)
        },
        |v| {
            out.extend(v);
            Ok(())
        },
    )?;
    Ok(out)
}
