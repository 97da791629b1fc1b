//! Grid estimation from row/column detections, and the exact-match / L1
//! metrics used to judge it.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const DEFAULT_SCORE_THRESHOLD: f64 = 0.25;
pub const DEFAULT_ROW_NMS_IOU: f64 = 0.25;

/// Axis-aligned box in image pixels, serialized as `[x_min, y_min, x_max, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.x_min < self.x_max && self.y_min < self.y_max
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min).max(0.0) * (self.y_max - self.y_min).max(0.0)
    }

    pub fn intersection(&self, other: &BBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        w.max(0.0) * h.max(0.0)
    }
}

impl From<[f64; 4]> for BBox {
    fn from([x_min, y_min, x_max, y_max]: [f64; 4]) -> Self {
        Self::new(x_min, y_min, x_max, y_max)
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

/// Intersection over union; 0 for disjoint or degenerate boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DetectionClass {
    TableRow,
    TableColumn,
    Other(String),
}

impl DetectionClass {
    /// Accepts `table-row`, `table row` and `table_row` (likewise for columns),
    /// case-insensitively. Anything else is kept as `Other`.
    pub fn from_label(label: &str) -> Self {
        let norm: String = label
            .trim()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c == ' ' || c == '_' { '-' } else { c })
            .collect();
        match norm.as_str() {
            "table-row" => DetectionClass::TableRow,
            "table-column" => DetectionClass::TableColumn,
            _ => DetectionClass::Other(label.to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            DetectionClass::TableRow => "table-row",
            DetectionClass::TableColumn => "table-column",
            DetectionClass::Other(s) => s,
        }
    }
}

impl fmt::Display for DetectionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for DetectionClass {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for DetectionClass {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(DetectionClass::from_label(&String::deserialize(d)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: DetectionClass,
    pub score: f64,
    pub bbox: BBox,
}

impl Detection {
    pub fn new(label: DetectionClass, score: f64, bbox: BBox) -> Self {
        Self { label, score, bbox }
    }

    pub(crate) fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::Config(format!(
                "detection score {} outside [0, 1]",
                self.score
            )));
        }
        if !self.bbox.is_valid() {
            return Err(Error::Config(format!("degenerate bbox {:?}", self.bbox)));
        }
        Ok(())
    }
}

/// Parses one detection file: a JSON array of `{"label", "score", "bbox"}`.
pub fn parse_detections(json: &str) -> Result<Vec<Detection>> {
    let dets: Vec<Detection> = serde_json::from_str(json).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    dets.iter().try_for_each(Detection::check)?;
    Ok(dets)
}

fn position_key(d: &Detection) -> (f64, f64) {
    match d.label {
        DetectionClass::TableColumn => (d.bbox.x_min, d.bbox.y_min),
        _ => (d.bbox.y_min, d.bbox.x_min),
    }
}

fn cmp_pair(a: (f64, f64), b: (f64, f64)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1))
}

/// Greedy non-maximum suppression over detections of one class.
///
/// Boxes are visited by descending score (ties broken by `y_min`, then
/// `x_min`) and kept when their IoU with every kept box is at most
/// `iou_threshold`. The result is in reading order: by `y_min` for rows,
/// by `x_min` for columns.
pub fn nms(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut order: Vec<&Detection> = dets.iter().collect();
    order.sort_by(|a, b| {
        b.score.total_cmp(&a.score).then(cmp_pair(
            (a.bbox.y_min, a.bbox.x_min),
            (b.bbox.y_min, b.bbox.x_min),
        ))
    });
    let mut kept: Vec<Detection> = Vec::new();
    for d in order {
        if kept.iter().all(|k| iou(&k.bbox, &d.bbox) <= iou_threshold) {
            kept.push(d.clone());
        }
    }
    kept.sort_by(|a, b| cmp_pair(position_key(a), position_key(b)));
    kept
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub score_threshold: f64,
    pub row_nms_iou: f64,
    /// Column NMS is off unless set.
    pub column_nms_iou: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            score_threshold: DEFAULT_SCORE_THRESHOLD,
            row_nms_iou: DEFAULT_ROW_NMS_IOU,
            column_nms_iou: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridEstimate {
    pub rows: usize,
    pub cols: usize,
    pub kept_row_boxes: Vec<Detection>,
    pub kept_col_boxes: Vec<Detection>,
}

/// Counts rows and columns: drop detections scoring below the threshold,
/// suppress overlapping rows, and count what survives. Zero counts are
/// returned as-is.
pub fn estimate_grid(dets: &[Detection], config: &GridConfig) -> GridEstimate {
    let (mut rows, mut cols) = (Vec::new(), Vec::new());
    for d in dets.iter().filter(|d| d.score >= config.score_threshold) {
        match d.label {
            DetectionClass::TableRow => rows.push(d.clone()),
            DetectionClass::TableColumn => cols.push(d.clone()),
            DetectionClass::Other(_) => {}
        }
    }
    let kept_row_boxes = nms(&rows, config.row_nms_iou);
    let kept_col_boxes = match config.column_nms_iou {
        Some(t) => nms(&cols, t),
        None => {
            cols.sort_by(|a, b| cmp_pair(position_key(a), position_key(b)));
            cols
        }
    };
    GridEstimate {
        rows: kept_row_boxes.len(),
        cols: kept_col_boxes.len(),
        kept_row_boxes,
        kept_col_boxes,
    }
}

/// Agreement between predicted and true grid counts.
///
/// `l1_both` is the per-sample mean of `(|dR| + |dC|) / 2`, averaged over
/// samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridMatchMetrics {
    pub samples: usize,
    pub exact_match_rows: f64,
    pub exact_match_cols: f64,
    pub exact_match_both: f64,
    pub l1_rows: f64,
    pub l1_cols: f64,
    pub l1_both: f64,
}

pub fn grid_match_metrics(
    pred: &[(usize, usize)],
    gt: &[(usize, usize)],
) -> Result<GridMatchMetrics> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch {
            expected: gt.len(),
            actual: pred.len(),
        });
    }
    if gt.is_empty() {
        return Err(Error::ZeroSamples);
    }
    let n = gt.len() as f64;
    let (mut rows_eq, mut cols_eq, mut both_eq) = (0usize, 0usize, 0usize);
    let (mut l1_r, mut l1_c) = (0usize, 0usize);
    for (&(pr, pc), &(gr, gc)) in pred.iter().zip(gt) {
        rows_eq += usize::from(pr == gr);
        cols_eq += usize::from(pc == gc);
        both_eq += usize::from(pr == gr && pc == gc);
        l1_r += pr.abs_diff(gr);
        l1_c += pc.abs_diff(gc);
    }
    let pct = |k: usize| 100.0 * k as f64 / n;
    Ok(GridMatchMetrics {
        samples: gt.len(),
        exact_match_rows: pct(rows_eq),
        exact_match_cols: pct(cols_eq),
        exact_match_both: pct(both_eq),
        l1_rows: l1_r as f64 / n,
        l1_cols: l1_c as f64 / n,
        l1_both: (l1_r + l1_c) as f64 / (2.0 * n),
    })
}
