//! `pcood` subcommands.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use pcood_core::evaluation::{optimal_threshold, roc_curve, ConfusionMatrix, Population, DEFAULT_BINS, TIE_RULE};
use pcood_core::pointcloud::SEMANTIC3D_CLASSES;
use pcood_core::synth::{GaussianPairSpec, TensorSpec};
use pcood_core::{apply_threshold, argmax_labels, strip_color, ScoreKind};

use crate::output::{sha256_file, write_atomic};
use crate::parallel::{ordered_chunks, DEFAULT_CHUNK};
use crate::pcod::{write_f32s, PcodHeader};
use crate::pipeline::{self, evaluate, Mode, Options, ScoreInput};
use crate::text::{self, write_roc_csv, Report, RocCsv};
use crate::{Error, Result};

/// Ensemble sizes swept by `auroc --sweep`.
pub const DEFAULT_K_SWEEP: [usize; 5] = [1, 5, 10, 15, 20];

pub const THRESHOLD_RULE: &str = "youden_j_max_smallest_threshold_on_ties";

#[derive(Debug, Parser)]
#[command(name = "pcood", version, about = "Uncertainty-based OOD evaluation for point cloud segmentation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Workers {
    /// Worker threads; results do not depend on this value.
    #[arg(long, default_value_t = default_workers())]
    pub workers: usize,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

#[derive(Debug, Args, Clone)]
pub struct Scoring {
    /// OOD score: msp (1 − max probability) or entropy (nats).
    #[arg(long, default_value = "msp", value_parser = parse_kind)]
    pub kind: ScoreKind,
    /// Ensemble size: average the first k members (default: all).
    #[arg(long)]
    pub k: Option<usize>,
}

fn parse_kind(s: &str) -> std::result::Result<ScoreKind, String> {
    s.parse().map_err(|e: pcood_core::Error| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Average ensemble members into a single-member PCOD file.
    Aggregate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        workers: Workers,
    },
    /// Write per-point OOD scores as an index,score CSV.
    Score {
        #[arg(long)]
        pred: PathBuf,
        #[command(flatten)]
        scoring: Scoring,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        workers: Workers,
    },
    /// Pooled per-point AUROC between ID and OOD inputs (PCOD or score CSV).
    Auroc {
        #[arg(long, required = true)]
        id: Vec<PathBuf>,
        #[arg(long, required = true)]
        ood: Vec<PathBuf>,
        #[command(flatten)]
        scoring: Scoring,
        /// Comma-separated ensemble sizes; one result row per size.
        #[arg(long, value_delimiter = ',', conflicts_with = "k")]
        k_list: Option<Vec<usize>>,
        /// Sweep ensemble sizes 1,5,10,15,20.
        #[arg(long, conflicts_with_all = ["k", "k_list"])]
        sweep: bool,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
        #[arg(long, default_value = "auto")]
        mode: Mode,
        /// Report path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        workers: Workers,
    },
    /// ROC curve CSV with the Youden-optimal threshold.
    Roc {
        #[arg(long, required = true)]
        id: Vec<PathBuf>,
        #[arg(long, required = true)]
        ood: Vec<PathBuf>,
        #[command(flatten)]
        scoring: Scoring,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        workers: Workers,
    },
    /// Segmentation metrics (per-class IoU, meanIoU, accuracy).
    Iou {
        /// Prediction tensors, paired in order with --labels.
        #[arg(long, required = true)]
        pred: Vec<PathBuf>,
        #[arg(long, required = true)]
        labels: Vec<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        workers: Workers,
    },
    /// Colorized ID/OOD map of a cloud: ID green, OOD red.
    Map {
        /// Semantic3D point file (x y z intensity r g b).
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[command(flatten)]
        scoring: Scoring,
        /// OOD-score threshold: points at or above it are OOD.
        #[arg(long, conflicts_with = "roc", required_unless_present = "roc")]
        threshold: Option<f64>,
        /// Take the threshold from a ROC CSV written by `pcood roc`.
        #[arg(long)]
        roc: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        workers: Workers,
    },
    /// Zero the RGB channels of a point file (the "without color" variant).
    StripColor {
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthetic fixtures with known discrimination.
    Synth {
        #[command(subcommand)]
        what: Synth,
    },
}

#[derive(Debug, Subcommand)]
pub enum Synth {
    /// Two Gaussian score populations, written as id.csv and ood.csv.
    Scores {
        #[arg(long, default_value_t = 10_000)]
        n_id: usize,
        #[arg(long, default_value_t = 10_000)]
        n_ood: usize,
        #[arg(long, default_value_t = 0.0)]
        mu_id: f64,
        #[arg(long, default_value_t = 1.0)]
        mu_ood: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma_id: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma_ood: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        workers: Workers,
    },
    /// ID and OOD probability tensors, written as id.pcod and ood.pcod.
    Tensor {
        #[arg(long)]
        points: usize,
        #[arg(long, default_value_t = SEMANTIC3D_CLASSES as usize)]
        classes: usize,
        #[arg(long, default_value_t = 20)]
        members: usize,
        #[arg(long, default_value_t = 2.0)]
        separability: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        workers: Workers,
    },
}

pub fn run(cli: &Cli) -> Result<()> {
    let stdout = &mut std::io::stdout().lock();
    match &cli.command {
        Command::Aggregate { pred, k, out, workers } => cmd_aggregate(pred, *k, out, workers.workers, stdout),
        Command::Score { pred, scoring, out, workers } => cmd_score(pred, scoring, out, workers.workers),
        Command::Auroc { id, ood, scoring, k_list, sweep, bins, mode, out, workers } => {
            let ks = match (k_list, sweep) {
                (Some(list), _) => Some(list.clone()),
                (None, true) => Some(DEFAULT_K_SWEEP.to_vec()),
                (None, false) => None,
            };
            let report = cmd_auroc(id, ood, scoring, ks.as_deref(), *bins, *mode, workers.workers)?;
            emit_report(&report, out.as_deref(), stdout)
        }
        Command::Roc { id, ood, scoring, bins, out, workers } => {
            cmd_roc(id, ood, scoring, *bins, out, workers.workers, stdout)
        }
        Command::Iou { pred, labels, k, out, workers } => {
            let report = cmd_iou(pred, labels, *k, workers.workers)?;
            emit_report(&report, out.as_deref(), stdout)
        }
        Command::Map { cloud, pred, scoring, threshold, roc, out, workers } => {
            cmd_map(cloud, pred, scoring, *threshold, roc.as_deref(), out, workers.workers, stdout)
        }
        Command::StripColor { cloud, out } => cmd_strip_color(cloud, out),
        Command::Synth { what } => match what {
            Synth::Scores { n_id, n_ood, mu_id, mu_ood, sigma_id, sigma_ood, seed, out, workers } => {
                let spec = GaussianPairSpec {
                    mu_id: *mu_id,
                    sigma_id: *sigma_id,
                    mu_ood: *mu_ood,
                    sigma_ood: *sigma_ood,
                    n_id: *n_id,
                    n_ood: *n_ood,
                    seed: *seed,
                };
                cmd_synth_scores(&spec, out, workers.workers, stdout)
            }
            Synth::Tensor { points, classes, members, separability, seed, out, workers } => {
                let spec = TensorSpec {
                    n_points: *points,
                    n_classes: *classes,
                    n_members: *members,
                    separability: *separability,
                    seed: *seed,
                };
                cmd_synth_tensor(&spec, out, workers.workers)
            }
        },
    }
}

fn emit_report(report: &Report, out: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, |w| report.write_to(w)),
        None => report.write_to(stdout),
    }
}

fn provenance(report: &mut Report, role: &str, paths: &[PathBuf]) -> Result<()> {
    for (i, p) in paths.iter().enumerate() {
        report.push(format!("input.{role}.{i}"), p.display());
        report.push(format!("input.{role}.{i}.sha256"), sha256_file(p)?);
    }
    Ok(())
}

fn resolve_k(path: &Path, k: Option<usize>) -> Result<(PcodHeader, usize)> {
    let header = pipeline::read_header(path)?;
    Ok((header, k.unwrap_or(header.n_members as usize)))
}

pub fn cmd_aggregate(pred: &Path, k: Option<usize>, out: &Path, workers: usize, stdout: &mut dyn Write) -> Result<()> {
    let (header, k) = resolve_k(pred, k)?;
    let opts = Options::new(ScoreKind::MspComplement, workers);
    let mut max_err = 0.0f64;
    write_atomic(out, |w| {
        let out_header = PcodHeader { n_members: 1, ..header };
        let out_header = PcodHeader { kind: pcood_core::TensorKind::Probabilities, ..out_header };
        w.write_all(&out_header.to_bytes())?;
        pipeline::for_each_distribution(pred, k, &opts, |d| {
            max_err = max_err.max(d.max_row_sum_error());
            let rows: Vec<f32> = d.probs().iter().map(|&p| p as f32).collect();
            write_f32s(w, &rows)
        })?;
        Ok(())
    })?;
    writeln!(stdout, "n_points={}", header.n_points)?;
    writeln!(stdout, "n_classes={}", header.n_classes)?;
    writeln!(stdout, "members_used={k}")?;
    writeln!(stdout, "max_row_sum_error={max_err}")?;
    Ok(())
}

pub fn cmd_score(pred: &Path, scoring: &Scoring, out: &Path, workers: usize) -> Result<()> {
    let (_, k) = resolve_k(pred, scoring.k)?;
    let opts = Options::new(scoring.kind, workers);
    write_atomic(out, |w| {
        writeln!(w, "{}", text::SCORE_CSV_HEADER)?;
        let mut next = 0;
        pipeline::for_each_score_block(pred, k, &opts, |s| {
            text::write_score_rows(next, s.scores(), w)?;
            next += s.len();
            Ok(())
        })?;
        Ok(())
    })
}

fn detect_all(paths: &[PathBuf]) -> Result<Vec<ScoreInput>> {
    paths.iter().map(|p| ScoreInput::detect(p)).collect()
}

fn common_header(report: &mut Report, id: &[PathBuf], ood: &[PathBuf], kind: ScoreKind, bins: usize) -> Result<()> {
    provenance(report, "id", id)?;
    provenance(report, "ood", ood)?;
    report.push("kind", kind);
    report.push("bins", bins);
    report.push("tie_rule", TIE_RULE);
    report.push("threshold_rule", THRESHOLD_RULE);
    Ok(())
}

pub fn cmd_auroc(
    id: &[PathBuf],
    ood: &[PathBuf],
    scoring: &Scoring,
    k_list: Option<&[usize]>,
    bins: usize,
    mode: Mode,
    workers: usize,
) -> Result<Report> {
    let (id_in, ood_in) = (detect_all(id)?, detect_all(ood)?);
    let opts = Options::new(scoring.kind, workers);
    let mut report = Report::new("pcood auroc");
    common_header(&mut report, id, ood, scoring.kind, bins)?;

    match k_list {
        None => {
            let ev = evaluate(&id_in, &ood_in, scoring.k, bins, mode, &opts)?;
            let t = optimal_threshold(&roc_curve(&ev.histogram)?);
            if let Some(k) = effective_k(&id_in, &ood_in, scoring.k)? {
                report.push("k", k);
            }
            report.push("mode", if ev.exact { "exact" } else { "hist" });
            report.push("n_id", ev.n_id).push("n_ood", ev.n_ood);
            report.push("auroc", ev.auroc);
            report.push("threshold", t.threshold).push("youden_j", t.youden_j);
        }
        Some(ks) => {
            report.push("k_list", ks.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(","));
            for &k in ks {
                let ev = evaluate(&id_in, &ood_in, Some(k), bins, mode, &opts)?;
                let t = optimal_threshold(&roc_curve(&ev.histogram)?);
                if k == ks[0] {
                    report.push("mode", if ev.exact { "exact" } else { "hist" });
                    report.push("n_id", ev.n_id).push("n_ood", ev.n_ood);
                }
                report.push(format!("auroc_k{k}"), ev.auroc);
                report.push(format!("threshold_k{k}"), t.threshold);
                report.push(format!("youden_j_k{k}"), t.youden_j);
            }
        }
    }
    Ok(report)
}

/// The ensemble size actually used, or `None` for score CSV inputs.
fn effective_k(id: &[ScoreInput], ood: &[ScoreInput], k: Option<usize>) -> Result<Option<usize>> {
    let mut min_members: Option<usize> = None;
    for i in id.iter().chain(ood) {
        if let ScoreInput::Pcod(p) = i {
            let m = pipeline::read_header(p)?.n_members as usize;
            min_members = Some(min_members.map_or(m, |x| x.min(m)));
        }
    }
    Ok(min_members.map(|m| k.unwrap_or(m)))
}

pub fn cmd_roc(
    id: &[PathBuf],
    ood: &[PathBuf],
    scoring: &Scoring,
    bins: usize,
    out: &Path,
    workers: usize,
    stdout: &mut dyn Write,
) -> Result<()> {
    let (id_in, ood_in) = (detect_all(id)?, detect_all(ood)?);
    let opts = Options::new(scoring.kind, workers);
    let ev = evaluate(&id_in, &ood_in, scoring.k, bins, Mode::Hist, &opts)?;
    let curve = roc_curve(&ev.histogram)?;
    let t = optimal_threshold(&curve);

    let mut meta = Report::new("pcood roc");
    common_header(&mut meta, id, ood, scoring.kind, bins)?;
    if let Some(k) = effective_k(&id_in, &ood_in, scoring.k)? {
        meta.push("k", k);
    }
    let (lo, hi) = ev.histogram.domain();
    meta.push("domain_lo", lo).push("domain_hi", hi);
    meta.push("n_id", ev.n_id).push("n_ood", ev.n_ood);
    meta.push("auroc", curve.auroc());
    meta.push("threshold", t.threshold).push("youden_j", t.youden_j);
    if scoring.kind == ScoreKind::MspComplement && ev.histogram.kind().is_some() {
        meta.push("msp_threshold", 1.0 - t.threshold);
    }
    write_atomic(out, |w| write_roc_csv(&curve, &meta, w))?;
    writeln!(stdout, "auroc={}", curve.auroc())?;
    writeln!(stdout, "threshold={}", t.threshold)?;
    writeln!(stdout, "youden_j={}", t.youden_j)?;
    Ok(())
}

pub fn cmd_iou(pred: &[PathBuf], labels: &[PathBuf], k: Option<usize>, workers: usize) -> Result<Report> {
    if pred.len() != labels.len() {
        return Err(Error::Usage(format!(
            "{} --pred inputs but {} --labels inputs",
            pred.len(),
            labels.len()
        )));
    }
    let mut report = Report::new("pcood iou");
    provenance(&mut report, "pred", pred)?;
    provenance(&mut report, "labels", labels)?;
    let opts = Options::new(ScoreKind::MspComplement, workers);
    let mut matrix: Option<ConfusionMatrix> = None;
    let mut used_k = None;
    for (p, l) in pred.iter().zip(labels) {
        let (header, k) = resolve_k(p, k)?;
        used_k.get_or_insert(k);
        let truth = text::read_labels(l)?;
        if truth.len() as u64 != header.n_points {
            return Err(Error::from(pcood_core::Error::Structural(format!(
                "{} has {} points but {} has {} labels",
                p.display(),
                header.n_points,
                l.display(),
                truth.len()
            ))));
        }
        let m = match &mut matrix {
            Some(m) => m,
            None => matrix.insert(ConfusionMatrix::new(header.n_classes as usize)?),
        };
        if m.n_classes() != header.n_classes as usize {
            return Err(Error::Usage(format!("{} has a different class count", p.display())));
        }
        let mut offset = 0;
        pipeline::for_each_distribution(p, k, &opts, |d| {
            let predicted = argmax_labels(&d);
            let n = predicted.len();
            m.accumulate(&predicted, &truth[offset..offset + n])
                .map_err(|e| Error::from(e).context(format!("{} from point {offset}", l.display())))?;
            offset += n;
            Ok(())
        })?;
    }
    let m = matrix.expect("at least one prediction input");
    let metrics = m.seg_metrics()?;
    report.push("k", used_k.unwrap_or(0));
    report.push("n_classes", m.n_classes());
    report.push("undefined_iou", "excluded_from_mean");
    report.push("counted", m.counted()).push("ignored", m.ignored());
    report.push("mean_iou", metrics.mean_iou);
    for (c, iou) in metrics.per_class_iou.iter().enumerate() {
        match iou {
            Some(v) => report.push(format!("per_class_iou_{}", c + 1), v),
            None => report.push(format!("per_class_iou_{}", c + 1), "undefined"),
        };
    }
    report.push("accuracy", metrics.accuracy);
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_map(
    cloud_path: &Path,
    pred: &Path,
    scoring: &Scoring,
    threshold: Option<f64>,
    roc: Option<&Path>,
    out: &Path,
    workers: usize,
    stdout: &mut dyn Write,
) -> Result<()> {
    let threshold = match (threshold, roc) {
        (Some(t), _) => t,
        (None, Some(roc)) => {
            let csv = RocCsv::read(roc)?;
            if let Some(kind) = csv.metadata.get("kind") {
                if kind != scoring.kind.name() {
                    return Err(Error::Usage(format!(
                        "{} holds a {kind} threshold but --kind is {}",
                        roc.display(),
                        scoring.kind
                    )));
                }
            }
            csv.threshold().map_err(|e| e.at(roc))?.threshold
        }
        (None, None) => return Err(Error::Usage(String::from("need --threshold or --roc"))),
    };
    if !threshold.is_finite() {
        return Err(Error::Usage(format!("threshold {threshold} is not finite")));
    }
    let (header, k) = resolve_k(pred, scoring.k)?;
    let cloud = text::read_cloud(cloud_path, None, header.n_classes)?;
    if cloud.len() as u64 != header.n_points {
        return Err(Error::from(pcood_core::Error::Structural(format!(
            "{} has {} points but {} has predictions for {}",
            cloud_path.display(),
            cloud.len(),
            pred.display(),
            header.n_points
        ))));
    }
    let scores = pipeline::collect_scores(pred, k, &Options::new(scoring.kind, workers))?;
    let mask = apply_threshold(&scores, threshold);
    write_atomic(out, |w| text::write_idood_map(&cloud, &mask, w))?;
    writeln!(stdout, "threshold={threshold}")?;
    writeln!(stdout, "flagged_id={}", mask.id_count())?;
    writeln!(stdout, "flagged_ood={}", mask.ood_count())?;
    Ok(())
}

pub fn cmd_strip_color(cloud: &Path, out: &Path) -> Result<()> {
    let c = text::read_cloud(cloud, None, SEMANTIC3D_CLASSES)?;
    let stripped = strip_color(&c);
    write_atomic(out, |w| text::write_points(&stripped, w))
}

pub fn cmd_synth_scores(spec: &GaussianPairSpec, out: &Path, workers: usize, stdout: &mut dyn Write) -> Result<()> {
    spec.validate()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io("creating directory", e).at(out))?;
    for (population, name) in [(Population::Id, "id.csv"), (Population::Ood, "ood.csv")] {
        write_atomic(&out.join(name), |w| {
            writeln!(w, "{}", text::SCORE_CSV_HEADER)?;
            let mut next = 0;
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
                    text::write_score_rows(next, &v, w)?;
                    next += v.len();
                    Ok(())
                },
            )
        })?;
    }
    writeln!(stdout, "analytic_auroc={}", pcood_core::synth::analytic_auroc(spec))?;
    Ok(())
}

pub fn cmd_synth_tensor(spec: &TensorSpec, out: &Path, workers: usize) -> Result<()> {
    spec.validate()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io("creating directory", e).at(out))?;
    let header = PcodHeader {
        kind: pcood_core::TensorKind::Probabilities,
        n_points: spec.n_points as u64,
        n_classes: spec.n_classes as u16,
        n_members: spec.n_members as u16,
    };
    let c = spec.n_classes;
    for (population, name) in [(Population::Id, "id.pcod"), (Population::Ood, "ood.pcod")] {
        write_atomic(&out.join(name), |w| {
            w.write_all(&header.to_bytes())?;
            for m in 0..spec.n_members {
                ordered_chunks(
                    spec.n_points,
                    DEFAULT_CHUNK,
                    workers,
                    || Ok(()),
                    |_, range| {
                        let mut v = vec![0.0f32; range.len() * c];
                        spec.fill_member(population, m, range, &mut v);
                        Ok(v)
                    },
                    |v| write_f32s(w, &v),
                )?;
            }
            Ok(())
        })?;
    }
    Ok(())
}
