//! ASCII formats: Semantic3D point and label files, ID/OOD maps, score CSVs,
//! ROC CSVs and key=value reports.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use pcood_core::evaluation::{RocCurve, Threshold};
use pcood_core::pointcloud::{LabelParser, MapLine, Semantic3dParser};
use pcood_core::{IdOodMask, LabeledCloud};

use crate::{Error, Result};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io("opening", e).at(path))
}

fn for_each_line(path: &Path, mut f: impl FnMut(&str) -> pcood_core::Result<()>) -> Result<()> {
    let mut reader = open(path)?;
    let mut line = String::new();
    loop {
        line.clear();
        let n = reader.read_line(&mut line).map_err(|e| Error::io("reading", e).at(path))?;
        if n == 0 {
            return Ok(());
        }
        f(line.trim_end_matches(['\n', '\r'])).map_err(|e| Error::from(e).at(path))?;
    }
}

/// Stream a Semantic3D point file and optional label file.
pub fn read_cloud(points: &Path, labels: Option<&Path>, class_count: u16) -> Result<LabeledCloud> {
    let mut parser = Semantic3dParser::new();
    for_each_line(points, |l| parser.feed_point_line(l))?;
    if let Some(labels) = labels {
        for_each_line(labels, |l| parser.feed_label_line(l))?;
    }
    let id = points.display().to_string();
    Ok(parser.finish(class_count, labels.is_some()).map_err(|e| Error::from(e).at(points))?.with_source_id(id))
}

pub fn read_labels(path: &Path) -> Result<Vec<u16>> {
    let mut parser = LabelParser::new();
    for_each_line(path, |l| parser.feed_line(l))?;
    Ok(parser.finish())
}

/// `x y z intensity r g b`, reals in shortest round-trip form.
pub fn write_points<W: Write + ?Sized>(cloud: &LabeledCloud, sink: &mut W) -> Result<()> {
    for p in cloud.points() {
        writeln!(sink, "{} {} {} {} {} {} {}", p.x, p.y, p.z, p.intensity, p.r, p.g, p.b)?;
    }
    Ok(())
}

pub fn write_labels<W: Write + ?Sized>(labels: &[u16], sink: &mut W) -> Result<()> {
    for l in labels {
        writeln!(sink, "{l}")?;
    }
    Ok(())
}

/// `x y z r g b` per point: ID green (0 255 0), OOD red (255 0 0).
pub fn write_idood_map<W: Write + ?Sized>(cloud: &LabeledCloud, mask: &IdOodMask, sink: &mut W) -> Result<()> {
    mask.check_matches(cloud)?;
    for (point, &ood) in cloud.points().iter().zip(mask.flags()) {
        writeln!(sink, "{}", MapLine { point, ood })?;
    }
    Ok(())
}

pub const SCORE_CSV_HEADER: &str = "index,score";

pub fn write_scores_csv<W: Write + ?Sized>(scores: &[f64], sink: &mut W) -> Result<()> {
    writeln!(sink, "{SCORE_CSV_HEADER}")?;
    write_score_rows(0, scores, sink)
}

/// Rows only, numbered from `first_index`; for chunked writers.
pub fn write_score_rows<W: Write + ?Sized>(first_index: usize, scores: &[f64], sink: &mut W) -> Result<()> {
    for (i, s) in scores.iter().enumerate() {
        writeln!(sink, "{},{}", first_index + i, s)?;
    }
    Ok(())
}

pub fn read_scores_csv(path: &Path) -> Result<Vec<f64>> {
    let reader = open(path)?;
    let mut scores = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("reading", e).at(path))?;
        let line = line.trim_end_matches('\r');
        let lineno = i + 1;
        if i == 0 {
            if line != SCORE_CSV_HEADER {
                return Err(Error::Format(format!("expected header {SCORE_CSV_HEADER:?}, got {line:?}")).at(path));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: String| Error::Format(format!("line {lineno}: {m}")).at(path);
        let (idx, score) = line.split_once(',').ok_or_else(|| bad(format!("expected index,score, got {line:?}")))?;
        let idx: usize = idx.trim().parse().map_err(|_| bad(format!("bad index {idx:?}")))?;
        if idx != scores.len() {
            return Err(bad(format!("index {idx} out of sequence, expected {}", scores.len())));
        }
        let s: f64 = score.trim().parse().map_err(|_| bad(format!("bad score {score:?}")))?;
        if !s.is_finite() {
            return Err(bad(format!("non-finite score {score:?}")));
        }
        scores.push(s);
    }
    if scores.is_empty() && std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(false) {
        return Err(Error::Format(String::from("empty file, missing header")).at(path));
    }
    Ok(scores)
}

/// Ordered `key=value` lines preceded by `#` comment lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub comments: Vec<String>,
    pub entries: Vec<(String, String)>,
}

impl Report {
    pub fn new(title: impl Into<String>) -> Self {
        Self { comments: vec![title.into()], entries: Vec::new() }
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Numeric value; floats are written in shortest round-trip form so this
    /// reproduces the written value bit for bit.
    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    pub fn write_to<W: Write + ?Sized>(&self, sink: &mut W) -> Result<()> {
        for c in &self.comments {
            writeln!(sink, "# {c}")?;
        }
        for (k, v) in &self.entries {
            writeln!(sink, "{k}={v}")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("reports are UTF-8")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut report = Report::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if let Some(c) = line.strip_prefix('#') {
                report.comments.push(c.strip_prefix(' ').unwrap_or(c).to_string());
            } else if !line.trim().is_empty() {
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| Error::Format(format!("line {}: expected key=value, got {line:?}", i + 1)))?;
                report.entries.push((k.to_string(), v.to_string()));
            }
        }
        Ok(report)
    }
}

pub const ROC_CSV_HEADER: &str = "threshold,fpr,tpr";

/// ROC points (the origin row carries threshold `inf`) followed by a `#`
/// metadata block.
pub fn write_roc_csv<W: Write + ?Sized>(curve: &RocCurve, metadata: &Report, sink: &mut W) -> Result<()> {
    writeln!(sink, "{ROC_CSV_HEADER}")?;
    writeln!(sink, "inf,{},{}", curve.fpr()[0], curve.tpr()[0])?;
    for (i, t) in curve.thresholds().iter().enumerate() {
        writeln!(sink, "{},{},{}", t, curve.fpr()[i + 1], curve.tpr()[i + 1])?;
    }
    for c in &metadata.comments {
        writeln!(sink, "# {c}")?;
    }
    for (k, v) in &metadata.entries {
        writeln!(sink, "# {k}={v}")?;
    }
    Ok(())
}

/// The data rows and metadata of a ROC CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCsv {
    pub rows: Vec<(f64, f64, f64)>,
    pub metadata: Report,
}

impl RocCsv {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io("reading", e).at(path))?;
        Self::parse(&text).map_err(|e| e.at(path))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(ROC_CSV_HEADER) {
            return Err(Error::Format(format!("missing {ROC_CSV_HEADER:?} header")));
        }
        let mut rows = Vec::new();
        let mut meta = String::new();
        for (i, line) in lines.enumerate() {
            if let Some(m) = line.strip_prefix("# ") {
                meta.push_str(if m.contains('=') { m } else { "" });
                meta.push('\n');
                continue;
            }
            let f: Vec<f64> = line
                .split(',')
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Format(format!("line {}: bad ROC row {line:?}", i + 2)))?;
            if f.len() != 3 {
                return Err(Error::Format(format!("line {}: expected 3 fields", i + 2)));
            }
            rows.push((f[0], f[1], f[2]));
        }
        Ok(Self { rows, metadata: Report::parse(&meta)? })
    }

    pub fn threshold(&self) -> Result<Threshold> {
        let get = |k: &str| {
            self.metadata
                .get_f64(k)
                .ok_or_else(|| Error::Format(format!("ROC metadata lacks a numeric {k:?}")))
        };
        Ok(Threshold { threshold: get("threshold")?, youden_j: get("youden_j")? })
    }
}
