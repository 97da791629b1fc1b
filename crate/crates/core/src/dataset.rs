//! Dataset records, coverage statistics and end-to-end batch evaluation.
//!
//! Records are JSONL, one object per line:
//!
//! ```json
//! {"id": "t1", "gt_otsl": "FLNFFN", "pred_otsl": "FLNFF", "gt_grid": [2, 2],
//!  "language": "hindi", "modality": "document", "split": "test"}
//! ```
//!
//! Unknown fields are kept. `t_model` and `t_grid` (seconds), when present,
//! are picked up as externally measured timings.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::align::{align_text_with, AlignOptions, RepairAction};
use crate::convert::{otsl_to_html, rows_to_otsl, structure_rows, HtmlTagSequence};
use crate::error::{Error, Result};
use crate::grid::{estimate_grid, grid_match_metrics, Detection, GridConfig, GridMatchMetrics};
use crate::otsl::{parse_with, OtslMatrix, OtslToken, Sentinels};
use crate::teds::teds_s;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Document,
    Scene,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_otsl: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_html: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred_otsl: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_grid: Option<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modality: Option<Modality>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl SampleRecord {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            gt_otsl: None,
            gt_html: None,
            pred_otsl: None,
            detections_ref: None,
            gt_grid: None,
            language: None,
            modality: None,
            split: None,
            extra: serde_json::Map::new(),
        }
    }

    /// An externally measured phase time in seconds, e.g. `t_model`.
    pub fn external_time(&self, key: &str) -> Option<f64> {
        self.extra.get(key).and_then(serde_json::Value::as_f64)
    }

    pub fn group_value(&self, key: GroupKey) -> String {
        let value = match key {
            GroupKey::Language => self.language.clone(),
            GroupKey::Modality => self.modality.map(|m| format!("{m:?}").to_lowercase()),
            GroupKey::Split => self.split.map(|s| format!("{s:?}").to_lowercase()),
        };
        value.unwrap_or_else(|| "unknown".to_string())
    }
}

/// Streams records from JSONL, skipping blank lines and rejecting repeated ids.
pub struct RecordReader<R> {
    lines: std::io::Lines<R>,
    line: usize,
    seen: HashSet<String>,
}

impl<R: BufRead> RecordReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            lines: reader.lines(),
            line: 0,
            seen: HashSet::new(),
        }
    }
}

impl RecordReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(BufReader::new(file)))
    }
}

impl<R: BufRead> Iterator for RecordReader<R> {
    type Item = Result<SampleRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let text = match self.lines.next()? {
                Ok(t) => t,
                Err(e) => {
                    return Some(Err(Error::Parse {
                        line: self.line + 1,
                        message: e.to_string(),
                    }))
                }
            };
            self.line += 1;
            if text.trim().is_empty() {
                continue;
            }
            let line = self.line;
            let record: SampleRecord = match serde_json::from_str(&text) {
                Ok(r) => r,
                Err(e) => {
                    return Some(Err(Error::Parse {
                        line,
                        message: e.to_string(),
                    }))
                }
            };
            if !self.seen.insert(record.id.clone()) {
                return Some(Err(Error::DuplicateId {
                    id: record.id,
                    line,
                }));
            }
            return Some(Ok(record));
        }
    }
}

/// Loads a whole JSONL dataset file.
pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<SampleRecord>> {
    RecordReader::open(path.as_ref())?.collect()
}

pub fn read_records(reader: impl BufRead) -> Result<Vec<SampleRecord>> {
    RecordReader::new(reader).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OtslField {
    GtOtsl,
    PredOtsl,
}

impl OtslField {
    pub fn name(self) -> &'static str {
        match self {
            OtslField::GtOtsl => "gt_otsl",
            OtslField::PredOtsl => "pred_otsl",
        }
    }

    pub fn get(self, record: &SampleRecord) -> Option<&str> {
        match self {
            OtslField::GtOtsl => record.gt_otsl.as_deref(),
            OtslField::PredOtsl => record.pred_otsl.as_deref(),
        }
    }
}

impl FromStr for OtslField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gt_otsl" => Ok(OtslField::GtOtsl),
            "pred_otsl" => Ok(OtslField::PredOtsl),
            _ => Err(Error::Config(format!("unknown OTSL field {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenCoverage {
    pub token: OtslToken,
    pub count: usize,
    /// Mean over records of the token's share of the record, in percent.
    pub avg_occupancy_pct: f64,
    /// The token's share of all tokens, in percent.
    pub pooled_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageStats {
    pub samples: usize,
    pub total_tokens: usize,
    pub tokens: Vec<TokenCoverage>,
}

impl CoverageStats {
    pub fn get(&self, token: OtslToken) -> &TokenCoverage {
        &self.tokens[token.index()]
    }
}

/// Percentage of each token (indexed by [`OtslToken::index`]) in one sequence.
/// The six values sum to 100 for any non-empty input.
pub fn occupancy(tokens: &[OtslToken]) -> [f64; 6] {
    let mut counts = [0usize; 6];
    for t in tokens {
        counts[t.index()] += 1;
    }
    let n = tokens.len() as f64;
    counts.map(|c| if n > 0.0 { 100.0 * c as f64 / n } else { 0.0 })
}

/// Running token counts; feed sequences one at a time.
#[derive(Debug, Clone, Default)]
pub struct CoverageAccumulator {
    counts: [usize; 6],
    occupancy_sum: [f64; 6],
    samples: usize,
}

impl CoverageAccumulator {
    pub fn add(&mut self, seq: &[OtslToken]) {
        self.samples += 1;
        for t in seq {
            self.counts[t.index()] += 1;
        }
        for (acc, pct) in self.occupancy_sum.iter_mut().zip(occupancy(seq)) {
            *acc += pct;
        }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn finish(&self) -> Result<CoverageStats> {
        if self.samples == 0 {
            return Err(Error::ZeroSamples);
        }
        let total: usize = self.counts.iter().sum();
        let tokens = OtslToken::ALL
            .iter()
            .map(|&token| {
                let i = token.index();
                TokenCoverage {
                    token,
                    count: self.counts[i],
                    avg_occupancy_pct: self.occupancy_sum[i] / self.samples as f64,
                    pooled_pct: if total > 0 {
                        100.0 * self.counts[i] as f64 / total as f64
                    } else {
                        0.0
                    },
                }
            })
            .collect();
        Ok(CoverageStats {
            samples: self.samples,
            total_tokens: total,
            tokens,
        })
    }
}

/// Token coverage over a set of sequences.
pub fn coverage<'a>(sequences: impl IntoIterator<Item = &'a [OtslToken]>) -> Result<CoverageStats> {
    let mut acc = CoverageAccumulator::default();
    for seq in sequences {
        acc.add(seq);
    }
    acc.finish()
}

/// Parses the selected OTSL field of every record.
pub fn record_sequences(
    records: &[SampleRecord],
    field: OtslField,
    sentinels: &Sentinels,
) -> Result<Vec<Vec<OtslToken>>> {
    records
        .iter()
        .map(|r| {
            let text = field.get(r).ok_or_else(|| Error::MissingField {
                id: r.id.clone(),
                field: field.name(),
            })?;
            let seq = parse_with(text, sentinels).map_err(|e| Error::InvalidRecord {
                id: r.id.clone(),
                message: e.to_string(),
            })?;
            if seq.is_empty() {
                return Err(Error::InvalidRecord {
                    id: r.id.clone(),
                    message: format!("{} is empty", field.name()),
                });
            }
            Ok(seq.tokens)
        })
        .collect()
}

pub fn coverage_stats(records: &[SampleRecord], field: OtslField) -> Result<CoverageStats> {
    let seqs = record_sequences(records, field, &Sentinels::none())?;
    coverage(seqs.iter().map(Vec::as_slice))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Complexity {
    Simple,
    Complex,
}

/// Ground-truth structure of a record.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub html: HtmlTagSequence,
    pub complexity: Complexity,
    /// `(R, C)` when the structure tiles a rectangle.
    pub shape: Option<(usize, usize)>,
}

/// Resolves a record's ground truth, preferring `gt_otsl` over `gt_html`.
///
/// HTML whose spans do not tile a rectangle is still scored; its complexity
/// then comes from the span attributes alone.
pub fn ground_truth(record: &SampleRecord, sentinels: &Sentinels) -> Result<GroundTruth> {
    let invalid = |e: Error| Error::InvalidRecord {
        id: record.id.clone(),
        message: e.to_string(),
    };
    if let Some(text) = &record.gt_otsl {
        let seq = parse_with(text, sentinels).map_err(invalid)?;
        let m = OtslMatrix::infer(&seq).map_err(invalid)?;
        return Ok(GroundTruth {
            html: otsl_to_html(&m),
            complexity: complexity_of(&m),
            shape: Some((m.rows(), m.cols())),
        });
    }
    if let Some(html) = &record.gt_html {
        let rows = structure_rows(html).map_err(invalid)?;
        let (complexity, shape) = match rows_to_otsl(&rows) {
            Ok(m) => (complexity_of(&m), Some((m.rows(), m.cols()))),
            Err(_) => {
                let spanning = rows.iter().flatten().any(|c| c.is_spanning());
                let c = if spanning {
                    Complexity::Complex
                } else {
                    Complexity::Simple
                };
                (c, None)
            }
        };
        return Ok(GroundTruth {
            html: HtmlTagSequence::from_rows(&rows),
            complexity,
            shape,
        });
    }
    Err(Error::MissingField {
        id: record.id.clone(),
        field: "gt_otsl or gt_html",
    })
}

fn complexity_of(m: &OtslMatrix) -> Complexity {
    if m.is_complex() {
        Complexity::Complex
    } else {
        Complexity::Simple
    }
}

/// Partitions records into simple and complex tables by their ground truth.
pub fn split_simple_complex(
    records: &[SampleRecord],
) -> Result<(Vec<&SampleRecord>, Vec<&SampleRecord>)> {
    let mut simple = Vec::new();
    let mut complex = Vec::new();
    for r in records {
        match ground_truth(r, &Sentinels::none())?.complexity {
            Complexity::Simple => simple.push(r),
            Complexity::Complex => complex.push(r),
        }
    }
    Ok((simple, complex))
}

/// Lookup of detections by record key (`detections_ref`, else `id`).
pub trait DetectionSource: Sync {
    fn detections(&self, key: &str) -> Option<Result<Vec<Detection>>>;
}

impl DetectionSource for HashMap<String, Vec<Detection>> {
    fn detections(&self, key: &str) -> Option<Result<Vec<Detection>>> {
        self.get(key).cloned().map(Ok)
    }
}

/// A directory holding one JSON detection file per table image, named
/// `<key>` or `<key>.json`.
#[derive(Debug, Clone)]
pub struct DetectionDir(pub PathBuf);

impl DetectionSource for DetectionDir {
    fn detections(&self, key: &str) -> Option<Result<Vec<Detection>>> {
        let direct = self.0.join(key);
        let path = if direct.is_file() {
            direct
        } else {
            self.0.join(format!("{key}.json"))
        };
        if !path.is_file() {
            return None;
        }
        Some(
            std::fs::read_to_string(&path)
                .map_err(|e| Error::io(&path, e))
                .and_then(|s| crate::grid::parse_detections(&s)),
        )
    }
}

#[derive(Deserialize)]
struct DetectionLine {
    id: String,
    detections: Vec<Detection>,
}

/// Parses one `{"id": ..., "detections": [...]}` line.
pub fn parse_detection_line(line: &str) -> Result<(String, Vec<Detection>)> {
    let parsed: DetectionLine =
        serde_json::from_str(line).map_err(|e| Error::Config(e.to_string()))?;
    for d in &parsed.detections {
        d.check()?;
    }
    Ok((parsed.id, parsed.detections))
}

/// Reads a JSONL detection stream into a map keyed by id.
pub fn read_detection_stream(reader: impl BufRead) -> Result<HashMap<String, Vec<Detection>>> {
    let mut out = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let at = |message: String| Error::Parse {
            line: i + 1,
            message,
        };
        let line = line.map_err(|e| at(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let (id, dets) = parse_detection_line(&line).map_err(|e| at(e.to_string()))?;
        if out.insert(id.clone(), dets).is_some() {
            return Err(Error::DuplicateId { id, line: i + 1 });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKey {
    Language,
    Modality,
    Split,
}

impl GroupKey {
    pub fn name(self) -> &'static str {
        match self {
            GroupKey::Language => "language",
            GroupKey::Modality => "modality",
            GroupKey::Split => "split",
        }
    }
}

impl FromStr for GroupKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "language" => Ok(GroupKey::Language),
            "modality" => Ok(GroupKey::Modality),
            "split" => Ok(GroupKey::Split),
            other => Err(Error::Config(format!(
                "unknown group key {other:?} (expected language, modality or split)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub grid: GridConfig,
    pub align: AlignOptions,
    pub group_by: Vec<GroupKey>,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    /// Zero every timing field so reports are byte-reproducible.
    pub deterministic: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            align: AlignOptions::pipeline(),
            group_by: Vec::new(),
            jobs: None,
            deterministic: false,
        }
    }
}

impl EvalConfig {
    pub fn check(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for key in &self.group_by {
            if !seen.insert(key) {
                return Err(Error::Config(format!(
                    "group key {} given more than once",
                    key.name()
                )));
            }
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.grid.score_threshold)
            || !unit(self.grid.row_nms_iou)
            || self.grid.column_nms_iou.is_some_and(|v| !unit(v))
        {
            return Err(Error::Config("thresholds must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSource {
    GtGrid,
    Detections,
}

/// Per-record phase times in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PhaseTimes {
    pub t_align: f64,
    pub t_convert: f64,
    pub t_score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_model: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<f64>,
}

fn round4<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64((v * 1e4).round() / 1e4)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordResult {
    pub id: String,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub grid_source: Option<GridSource>,
    pub gt_shape: Option<(usize, usize)>,
    pub complexity: Option<Complexity>,
    pub groups: BTreeMap<GroupKey, String>,
    pub repairs: BTreeMap<RepairAction, usize>,
    #[serde(serialize_with = "round4")]
    pub teds_s: f64,
    pub failure: Option<String>,
    pub timing: PhaseTimes,
}

/// Runs one record through grid selection, alignment, conversion and scoring.
/// Any failure yields a score of 0 with the reason recorded.
pub fn evaluate_record(
    record: &SampleRecord,
    detections: Option<&dyn DetectionSource>,
    config: &EvalConfig,
) -> RecordResult {
    let mut result = RecordResult {
        id: record.id.clone(),
        rows: None,
        cols: None,
        grid_source: None,
        gt_shape: None,
        complexity: None,
        groups: config
            .group_by
            .iter()
            .map(|&k| (k, record.group_value(k)))
            .collect(),
        repairs: BTreeMap::new(),
        teds_s: 0.0,
        failure: None,
        timing: PhaseTimes {
            t_model: record.external_time("t_model"),
            t_grid: record.external_time("t_grid"),
            ..PhaseTimes::default()
        },
    };
    if let Err(reason) = run_stages(record, detections, config, &mut result) {
        result.teds_s = 0.0;
        result.failure = Some(reason);
    }
    if config.deterministic {
        result.timing.t_align = 0.0;
        result.timing.t_convert = 0.0;
        result.timing.t_score = 0.0;
    }
    result
}

fn run_stages(
    record: &SampleRecord,
    detections: Option<&dyn DetectionSource>,
    config: &EvalConfig,
    result: &mut RecordResult,
) -> std::result::Result<(), String> {
    let gt =
        ground_truth(record, &config.align.sentinels).map_err(|e| format!("ground truth: {e}"))?;
    result.complexity = Some(gt.complexity);
    result.gt_shape = gt.shape;

    let (rows, cols) = if let Some(grid) = record.gt_grid {
        result.grid_source = Some(GridSource::GtGrid);
        grid
    } else {
        let source = detections.ok_or("no grid source: no gt_grid and no detections")?;
        let key = record.detections_ref.as_deref().unwrap_or(&record.id);
        let dets = source
            .detections(key)
            .ok_or_else(|| format!("no detections for {key:?}"))?
            .map_err(|e| format!("detections: {e}"))?;
        result.grid_source = Some(GridSource::Detections);
        let g = estimate_grid(&dets, &config.grid);
        (g.rows, g.cols)
    };
    result.rows = Some(rows);
    result.cols = Some(cols);
    if rows == 0 || cols == 0 {
        return Err("empty grid".to_string());
    }

    let pred = record.pred_otsl.as_deref().ok_or("missing pred_otsl")?;
    let start = Instant::now();
    let aligned = align_text_with(pred, rows, cols, &config.align);
    result.timing.t_align = start.elapsed().as_secs_f64();
    let (matrix, log) = aligned.map_err(|e| format!("align: {e}"))?;
    result.repairs = log.counts;

    let start = Instant::now();
    let pred_html = otsl_to_html(&matrix);
    result.timing.t_convert = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let score = teds_s(&gt.html, &pred_html);
    result.timing.t_score = start.elapsed().as_secs_f64();
    result.teds_s = score.map_err(|e| format!("score: {e}"))?;
    Ok(())
}

/// Mean TEDS-S of a set of records, in percent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct GroupStat {
    pub n: usize,
    pub failed: usize,
    /// Failed records count as 0.
    pub teds_mean_pct: Option<f64>,
    /// Failed records left out.
    pub teds_mean_excluding_failures_pct: Option<f64>,
}

#[derive(Default)]
struct Acc {
    n: usize,
    failed: usize,
    sum: f64,
    sum_ok: f64,
}

impl Acc {
    fn add(&mut self, r: &RecordResult) {
        self.n += 1;
        self.sum += r.teds_s;
        if r.failure.is_some() {
            self.failed += 1;
        } else {
            self.sum_ok += r.teds_s;
        }
    }

    fn finish(&self) -> GroupStat {
        let ok = self.n - self.failed;
        GroupStat {
            n: self.n,
            failed: self.failed,
            teds_mean_pct: (self.n > 0).then(|| 100.0 * self.sum / self.n as f64),
            teds_mean_excluding_failures_pct: (ok > 0).then(|| 100.0 * self.sum_ok / ok as f64),
        }
    }
}

#[derive(Default)]
struct RowAcc {
    simple: Acc,
    complex: Acc,
    unclassified: Acc,
    overall: Acc,
}

impl RowAcc {
    fn add(&mut self, r: &RecordResult) {
        match r.complexity {
            Some(Complexity::Simple) => self.simple.add(r),
            Some(Complexity::Complex) => self.complex.add(r),
            None => self.unclassified.add(r),
        }
        self.overall.add(r);
    }

    fn finish(&self, group: String) -> ReportRow {
        ReportRow {
            group,
            simple: self.simple.finish(),
            complex: self.complex.finish(),
            unclassified: self.unclassified.finish(),
            overall: self.overall.finish(),
        }
    }
}

/// One line of the Simple / Complex / Overall table. `unclassified` holds
/// records whose ground truth could not be read.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub group: String,
    pub simple: GroupStat,
    pub complex: GroupStat,
    pub unclassified: GroupStat,
    pub overall: GroupStat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSettings {
    pub score_threshold: f64,
    pub row_nms_iou: f64,
    pub column_nms_iou: Option<f64>,
    pub max_seq_len: Option<usize>,
    pub group_by: Vec<GroupKey>,
    pub deterministic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub settings: EvalSettings,
    pub rows: Vec<ReportRow>,
    /// Estimated vs. ground-truth grid over records whose grid came from
    /// detections. `l1_both` is the mean over samples of (|dR| + |dC|) / 2.
    pub grid_metrics: Option<GridMatchMetrics>,
    pub records: Vec<RecordResult>,
}

impl EvalReport {
    pub fn overall(&self) -> &GroupStat {
        &self.rows[0].overall
    }

    pub fn failures(&self) -> impl Iterator<Item = &RecordResult> {
        self.records.iter().filter(|r| r.failure.is_some())
    }
}

/// Evaluates every record (in parallel, up to `config.jobs`) and aggregates.
pub fn evaluate_batch(
    records: &[SampleRecord],
    detections: Option<&dyn DetectionSource>,
    config: &EvalConfig,
) -> Result<EvalReport> {
    config.check()?;
    let run = || -> Vec<RecordResult> {
        records
            .par_iter()
            .map(|r| evaluate_record(r, detections, config))
            .collect()
    };
    let results = match config.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(run),
        None => run(),
    };
    Ok(aggregate(results, config))
}

/// Folds per-record results into a report. Records are visited in id order
/// so the sums do not depend on scheduling.
pub fn aggregate(records: Vec<RecordResult>, config: &EvalConfig) -> EvalReport {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[a].id.cmp(&records[b].id));

    let mut overall = RowAcc::default();
    let mut groups: BTreeMap<(GroupKey, String), RowAcc> = BTreeMap::new();
    let (mut pred_grid, mut gt_grid) = (Vec::new(), Vec::new());
    for &i in &order {
        let r = &records[i];
        overall.add(r);
        for (&key, value) in &r.groups {
            groups.entry((key, value.clone())).or_default().add(r);
        }
        if let (Some(GridSource::Detections), Some(rows), Some(cols), Some(gt)) =
            (r.grid_source, r.rows, r.cols, r.gt_shape)
        {
            pred_grid.push((rows, cols));
            gt_grid.push(gt);
        }
    }
    let mut rows = vec![overall.finish("overall".to_string())];
    rows.extend(
        groups
            .iter()
            .map(|((key, value), acc)| acc.finish(format!("{}={value}", key.name()))),
    );
    EvalReport {
        settings: EvalSettings {
            score_threshold: config.grid.score_threshold,
            row_nms_iou: config.grid.row_nms_iou,
            column_nms_iou: config.grid.column_nms_iou,
            max_seq_len: config.align.max_seq_len,
            group_by: config.group_by.clone(),
            deterministic: config.deterministic,
        },
        rows,
        grid_metrics: grid_match_metrics(&pred_grid, &gt_grid).ok(),
        records,
    }
}

fn fmt_pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.settings;
        writeln!(
            f,
            "# score_threshold={} row_nms_iou={} column_nms_iou={} max_seq_len={}",
            s.score_threshold,
            s.row_nms_iou,
            s.column_nms_iou
                .map_or("off".to_string(), |v| v.to_string()),
            s.max_seq_len.map_or("none".to_string(), |v| v.to_string()),
        )?;
        for (title, pick) in [
            (
                "TEDS-S (%)",
                (|g: &GroupStat| g.teds_mean_pct) as fn(&GroupStat) -> Option<f64>,
            ),
            ("TEDS-S (%) excluding failures", |g: &GroupStat| {
                g.teds_mean_excluding_failures_pct
            }),
        ] {
            writeln!(f, "{title}")?;
            writeln!(
                f,
                "{:<24} {:>7} {:>8} {:>7} {:>8} {:>7} {:>8} {:>7}",
                "group", "n", "Simple", "n", "Complex", "n", "Overall", "failed"
            )?;
            for row in &self.rows {
                writeln!(
                    f,
                    "{:<24} {:>7} {:>8} {:>7} {:>8} {:>7} {:>8} {:>7}",
                    row.group,
                    row.simple.n,
                    fmt_pct(pick(&row.simple)),
                    row.complex.n,
                    fmt_pct(pick(&row.complex)),
                    row.overall.n,
                    fmt_pct(pick(&row.overall)),
                    row.overall.failed,
                )?;
            }
        }
        if let Some(g) = &self.grid_metrics {
            writeln!(f, "Grid estimate (n={})", g.samples)?;
            writeln!(f, "{:<12} {:>12} {:>12}", "", "exact (%)", "avg L1")?;
            writeln!(
                f,
                "{:<12} {:>12.2} {:>12.4}",
                "rows", g.exact_match_rows, g.l1_rows
            )?;
            writeln!(
                f,
                "{:<12} {:>12.2} {:>12.4}",
                "cols", g.exact_match_cols, g.l1_cols
            )?;
            writeln!(
                f,
                "{:<12} {:>12.2} {:>12.4}",
                "rows+cols", g.exact_match_both, g.l1_both
            )?;
            writeln!(f, "# rows+cols L1 = mean over samples of (|dR| + |dC|) / 2")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PhaseStat {
    pub samples: usize,
    pub mean: f64,
    pub total: f64,
}

impl PhaseStat {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let (samples, total) = values.fold((0usize, 0.0), |(n, t), v| (n + 1, t + v));
        Self {
            samples,
            mean: if samples > 0 {
                total / samples as f64
            } else {
                0.0
            },
            total,
        }
    }
}

fn external<S: Serializer>(v: &Option<PhaseStat>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(stat) => stat.serialize(s),
        None => s.serialize_str("external"),
    }
}

/// Phase timings in seconds. The model and grid-detector phases run outside
/// this toolkit and are only filled in when records carry `t_model` /
/// `t_grid`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingReport {
    pub records: usize,
    pub t_alignment: PhaseStat,
    pub t_conversion: PhaseStat,
    pub t_score: PhaseStat,
    #[serde(serialize_with = "external")]
    pub t_model: Option<PhaseStat>,
    #[serde(serialize_with = "external")]
    pub t_grid: Option<PhaseStat>,
    /// Mean of grid (when supplied) + alignment + conversion.
    pub t_post_processing_mean: f64,
    /// Mean of model + post-processing, when the model time is supplied.
    pub t_total_mean: Option<f64>,
    pub warnings: Vec<String>,
}

/// Per-phase means and totals over the records that reached each phase.
pub fn timing_report(report: &EvalReport) -> TimingReport {
    let recs = &report.records;
    let mut warnings = Vec::new();
    if recs.is_empty() {
        warnings.push("empty batch: all timings are zero".to_string());
    }
    let ok = || recs.iter().filter(|r| r.failure.is_none());
    let t_alignment = PhaseStat::of(ok().map(|r| r.timing.t_align));
    let t_conversion = PhaseStat::of(ok().map(|r| r.timing.t_convert));
    let t_score = PhaseStat::of(ok().map(|r| r.timing.t_score));
    let supplied = |f: fn(&PhaseTimes) -> Option<f64>| {
        let stat = PhaseStat::of(recs.iter().filter_map(|r| f(&r.timing)));
        (stat.samples > 0).then_some(stat)
    };
    let t_model = supplied(|t| t.t_model);
    let t_grid = supplied(|t| t.t_grid);
    for (name, stat) in [("t_model", &t_model), ("t_grid", &t_grid)] {
        if let Some(s) = stat {
            if s.samples != recs.len() {
                warnings.push(format!(
                    "{name} supplied for {} of {} records",
                    s.samples,
                    recs.len()
                ));
            }
        }
    }
    if report.settings.deterministic {
        warnings.push("deterministic mode: measured timings are zeroed".to_string());
    }
    let t_post_processing_mean =
        t_grid.map_or(0.0, |s| s.mean) + t_alignment.mean + t_conversion.mean;
    TimingReport {
        records: recs.len(),
        t_alignment,
        t_conversion,
        t_score,
        t_model,
        t_grid,
        t_post_processing_mean,
        t_total_mean: t_model.map(|s| s.mean + t_post_processing_mean),
        warnings,
    }
}

impl fmt::Display for TimingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let line = |name: &str, stat: Option<&PhaseStat>| -> String {
            let mut s = format!("{name:<18}");
            match stat {
                Some(p) => {
                    let _ = write!(
                        s,
                        " mean {:>12.6} s  total {:>12.6} s  (n={})",
                        p.mean, p.total, p.samples
                    );
                }
                None => s.push_str(" external"),
            }
            s
        };
        let lines = [
            line("T_Alignment", Some(&self.t_alignment)),
            line("T_Conversion", Some(&self.t_conversion)),
            line("T_Score", Some(&self.t_score)),
            line("T_Grid", self.t_grid.as_ref()),
            line("T_Model", self.t_model.as_ref()),
        ];
        for l in lines {
            writeln!(f, "{l}")?;
        }
        writeln!(
            f,
            "{:<18} mean {:>12.6} s",
            "T_Post-Processing", self.t_post_processing_mean
        )?;
        match self.t_total_mean {
            Some(t) => writeln!(f, "{:<18} mean {:>12.6} s", "T_total", t)?,
            None => writeln!(f, "{:<18} external", "T_total")?,
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}
