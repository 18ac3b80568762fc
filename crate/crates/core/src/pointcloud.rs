//! Labeled point clouds in the Semantic3D ASCII layout, the color-removal
//! transform, and the line format of colorized ID/OOD maps.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// Semantic3D has eight annotated classes; label 0 marks unlabeled points.
pub const SEMANTIC3D_CLASSES: u16 = 8;

pub const SEMANTIC3D_CLASS_NAMES: [&str; 8] = [
    "man-made terrain",
    "natural terrain",
    "high vegetation",
    "low vegetation",
    "buildings",
    "hard scape",
    "scanning artefacts",
    "cars",
];

pub const ID_COLOR: [u8; 3] = [0, 255, 0];
pub const OOD_COLOR: [u8; 3] = [255, 0, 0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointRecord {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub intensity: f64,
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl PointRecord {
    pub fn new(x: f64, y: f64, z: f64, intensity: f64, rgb: [u8; 3]) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && z.is_finite() && intensity.is_finite()) {
            return Err(Error::NumericInput(format!(
                "point ({x}, {y}, {z}) intensity {intensity}"
            )));
        }
        Ok(Self { x, y, z, intensity, r: rgb[0], g: rgb[1], b: rgb[2] })
    }

    pub fn rgb(&self) -> [u8; 3] {
        [self.r, self.g, self.b]
    }
}

/// Points with per-point ground-truth labels in `0..=class_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCloud {
    points: Vec<PointRecord>,
    labels: Vec<u16>,
    class_count: u16,
    source_id: String,
}

impl LabeledCloud {
    pub fn new(points: Vec<PointRecord>, labels: Vec<u16>, class_count: u16) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::Structural(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l > class_count) {
            return Err(Error::Validation(format!(
                "label {l} at point {i} exceeds class count {class_count}"
            )));
        }
        Ok(Self { points, labels, class_count, source_id: String::new() })
    }

    /// A cloud whose points are all unlabeled.
    pub fn unlabeled(points: Vec<PointRecord>, class_count: u16) -> Self {
        let labels = alloc::vec![0; points.len()];
        Self { points, labels, class_count, source_id: String::new() }
    }

    pub fn with_source_id(mut self, source_id: impl Into<String>) -> Self {
        self.source_id = source_id.into();
        self
    }

    pub fn points(&self) -> &[PointRecord] {
        &self.points
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn class_count(&self) -> u16 {
        self.class_count
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Per-point ID/OOD decision; `true` marks an OOD point.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IdOodMask {
    flags: Vec<bool>,
}

impl IdOodMask {
    pub fn new(flags: Vec<bool>) -> Self {
        Self { flags }
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn ood_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn id_count(&self) -> usize {
        self.len() - self.ood_count()
    }

    pub fn check_matches(&self, cloud: &LabeledCloud) -> Result<()> {
        if self.len() != cloud.len() {
            return Err(Error::Structural(format!(
                "mask has {} flags but cloud has {} points",
                self.len(),
                cloud.len()
            )));
        }
        Ok(())
    }
}

/// Zero the color channels, keeping geometry, intensity and labels.
pub fn strip_color(cloud: &LabeledCloud) -> LabeledCloud {
    let points = cloud
        .points
        .iter()
        .map(|p| PointRecord { r: 0, g: 0, b: 0, ..*p })
        .collect();
    LabeledCloud {
        points,
        labels: cloud.labels.clone(),
        class_count: cloud.class_count,
        source_id: cloud.source_id.clone(),
    }
}

/// One line of an ID/OOD map: `x y z r g b`, coordinates with six decimals.
pub struct MapLine<'a> {
    pub point: &'a PointRecord,
    pub ood: bool,
}

impl fmt::Display for MapLine<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [r, g, b] = if self.ood { OOD_COLOR } else { ID_COLOR };
        write!(f, "{:.6} {:.6} {:.6} {} {} {}", self.point.x, self.point.y, self.point.z, r, g, b)
    }
}

/// Write a full map to any `fmt::Write` sink, one line per point.
pub fn format_idood_map<W: fmt::Write>(cloud: &LabeledCloud, mask: &IdOodMask, sink: &mut W) -> Result<()> {
    mask.check_matches(cloud)?;
    for (point, &ood) in cloud.points.iter().zip(mask.flags()) {
        writeln!(sink, "{}", MapLine { point, ood })
            .map_err(|_| Error::Structural(String::from("formatter rejected map line")))?;
    }
    Ok(())
}

fn is_blank(line: &str) -> bool {
    line.trim().is_empty()
}

fn fields(line: &str) -> impl Iterator<Item = &str> {
    line.split([' ', '\t', '\r']).filter(|t| !t.is_empty())
}

fn parse_real(token: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("{what}: not a number: {token:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse { line, message: format!("{what}: non-finite value {token:?}") });
    }
    Ok(v)
}

fn parse_channel(token: &str, line: usize) -> Result<u8> {
    token.parse::<u8>().map_err(|_| Error::Parse {
        line,
        message: format!("color channel must be an integer in 0..=255, got {token:?}"),
    })
}

/// Parse `x y z intensity r g b`. `line` is only used for error reporting.
pub fn parse_point_line(text: &str, line: usize) -> Result<PointRecord> {
    let toks: Vec<&str> = fields(text).collect();
    if toks.len() != 7 {
        return Err(Error::Parse { line, message: format!("expected 7 fields, found {}", toks.len()) });
    }
    Ok(PointRecord {
        x: parse_real(toks[0], line, "x")?,
        y: parse_real(toks[1], line, "y")?,
        z: parse_real(toks[2], line, "z")?,
        intensity: parse_real(toks[3], line, "intensity")?,
        r: parse_channel(toks[4], line)?,
        g: parse_channel(toks[5], line)?,
        b: parse_channel(toks[6], line)?,
    })
}

/// Parse a map line `x y z r g b` back into coordinates and color.
pub fn parse_map_line(text: &str, line: usize) -> Result<([f64; 3], [u8; 3])> {
    let toks: Vec<&str> = fields(text).collect();
    if toks.len() != 6 {
        return Err(Error::Parse { line, message: format!("expected 6 fields, found {}", toks.len()) });
    }
    Ok((
        [parse_real(toks[0], line, "x")?, parse_real(toks[1], line, "y")?, parse_real(toks[2], line, "z")?],
        [parse_channel(toks[3], line)?, parse_channel(toks[4], line)?, parse_channel(toks[5], line)?],
    ))
}

pub fn parse_label_line(text: &str, line: usize) -> Result<u16> {
    let mut toks = fields(text);
    let (Some(tok), None) = (toks.next(), toks.next()) else {
        return Err(Error::Parse { line, message: String::from("expected exactly one label") });
    };
    tok.parse::<u16>().map_err(|_| Error::Parse {
        line,
        message: format!("label must be a non-negative integer, got {tok:?}"),
    })
}

/// Tracks line numbers and allows blank lines only at the end of a stream.
#[derive(Debug, Default)]
struct LineCursor {
    line: usize,
    first_blank: Option<usize>,
}

impl LineCursor {
    /// Returns the 1-based line number when the line carries data.
    fn advance(&mut self, text: &str) -> Result<Option<usize>> {
        self.line += 1;
        if is_blank(text) {
            self.first_blank.get_or_insert(self.line);
            return Ok(None);
        }
        if let Some(blank) = self.first_blank {
            return Err(Error::Parse { line: blank, message: String::from("blank line inside data") });
        }
        Ok(Some(self.line))
    }
}

/// Incremental Semantic3D reader, fed one line at a time so that large files
/// can be streamed.
#[derive(Debug, Default)]
pub struct Semantic3dParser {
    points: Vec<PointRecord>,
    labels: Vec<u16>,
    point_cursor: LineCursor,
    label_cursor: LineCursor,
}

impl Semantic3dParser {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn feed_point_line(&mut self, text: &str) -> Result<()> {
        if let Some(line) = self.point_cursor.advance(text)? {
            self.points.push(parse_point_line(text, line)?);
        }
        Ok(())
    }

    pub fn feed_label_line(&mut self, text: &str) -> Result<()> {
        if let Some(line) = self.label_cursor.advance(text)? {
            self.labels.push(parse_label_line(text, line)?);
        }
        Ok(())
    }

    /// `with_labels` is false when no label stream was supplied; every point
    /// is then unlabeled.
    pub fn finish(self, class_count: u16, with_labels: bool) -> Result<LabeledCloud> {
        if with_labels {
            LabeledCloud::new(self.points, self.labels, class_count)
        } else {
            Ok(LabeledCloud::unlabeled(self.points, class_count))
        }
    }
}

/// Incremental reader for a label file on its own.
#[derive(Debug, Default)]
pub struct LabelParser {
    labels: Vec<u16>,
    cursor: LineCursor,
}

impl LabelParser {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn feed_line(&mut self, text: &str) -> Result<()> {
        if let Some(line) = self.cursor.advance(text)? {
            self.labels.push(parse_label_line(text, line)?);
        }
        Ok(())
    }

    pub fn finish(self) -> Vec<u16> {
        self.labels
    }
}

/// Parse a whole point file and optional label file held in memory.
pub fn parse_semantic3d(points_text: &str, labels_text: Option<&str>, class_count: u16) -> Result<LabeledCloud> {
    let mut parser = Semantic3dParser::new();
    for line in points_text.lines() {
        parser.feed_point_line(line)?;
    }
    if let Some(labels) = labels_text {
        for line in labels.lines() {
            parser.feed_label_line(line)?;
        }
    }
    parser.finish(class_count, labels_text.is_some())
}
