use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use otslkit::align::{align_text_with, AlignOptions, RepairEntry};
use otslkit::convert::{filter_structure, html_to_otsl, otsl_to_html, HtmlTagSequence};
use otslkit::dataset::{
    aggregate, evaluate_record, ground_truth, parse_detection_line, read_detection_stream,
    timing_report, Complexity, CoverageAccumulator, CoverageStats, DetectionDir, DetectionSource,
    EvalConfig, GroupKey, OtslField, RecordReader, RecordResult,
};
use otslkit::grid::{estimate_grid, grid_match_metrics, parse_detections, GridConfig};
use otslkit::otsl::{
    parse_with, validate as validate_tokens, OtslMatrix, OtslToken, Sentinels, Violation,
};
use otslkit::teds::teds_s;

use super::io::{create_output, map_lines, open_input, read_grids, split_id, CliError, Grid};
use super::{Format, GlobalOpts, GridArgs};

pub type CmdResult = Result<bool, CliError>;

pub struct Ctx {
    pub format: Format,
    pub sentinels: Sentinels,
    pub deterministic: bool,
    out: Box<dyn Write>,
}

impl Ctx {
    pub fn new(global: &GlobalOpts) -> Result<Self, CliError> {
        Ok(Self {
            format: global.format,
            sentinels: Sentinels {
                start: global.start_token,
                stop: global.stop_token,
            },
            deterministic: global.deterministic,
            out: create_output(global.output.as_deref())?,
        })
    }

    fn json(&mut self, value: &impl Serialize) -> Result<(), CliError> {
        serde_json::to_writer(&mut self.out, value)?;
        writeln!(self.out)?;
        Ok(())
    }

    fn line(&mut self, text: &str) -> Result<(), CliError> {
        writeln!(self.out, "{text}")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.out.flush()?;
        Ok(())
    }
}

impl GridArgs {
    fn config(&self) -> GridConfig {
        GridConfig {
            score_threshold: self.score_threshold,
            row_nms_iou: self.nms_iou,
            column_nms_iou: self.col_nms_iou,
        }
    }
}

fn max_len(n: usize) -> Option<usize> {
    (n > 0).then_some(n)
}

fn warn(msg: impl std::fmt::Display) {
    eprintln!("otslkit: {msg}");
}

#[derive(Serialize)]
struct LineCheck {
    line: usize,
    valid: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    violations: Vec<Violation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn check_line(
    text: &str,
    rows: Option<usize>,
    cols: Option<usize>,
    sentinels: &Sentinels,
) -> Result<Vec<Violation>, String> {
    let seq = parse_with(text, sentinels).map_err(|e| e.to_string())?;
    if seq.is_empty() {
        return Err("empty sequence".into());
    }
    let width = match cols {
        Some(c) => c + 1,
        None => seq
            .tokens
            .iter()
            .position(|&t| t == OtslToken::NewLine)
            .map_or(seq.len(), |p| p + 1),
    };
    if let Some(r) = rows {
        if r * width != seq.len() {
            return Err(format!(
                "expected {} tokens for {r} rows of width {width}, found {}",
                r * width,
                seq.len()
            ));
        }
    }
    Ok(validate_tokens(&seq.tokens, width).violations)
}

pub fn validate(
    ctx: &mut Ctx,
    input: &Path,
    rows: Option<usize>,
    cols: Option<usize>,
) -> CmdResult {
    let reader = open_input(input)?;
    let sentinels = ctx.sentinels;
    let (mut total, mut invalid) = (0usize, 0usize);
    map_lines(
        reader,
        |_, line| (!line.trim().is_empty()).then(|| check_line(line, rows, cols, &sentinels)),
        |n, res| {
            let Some(res) = res else { return Ok(()) };
            total += 1;
            let check = match res {
                Ok(violations) => LineCheck {
                    line: n,
                    valid: violations.is_empty(),
                    violations,
                    error: None,
                },
                Err(e) => LineCheck {
                    line: n,
                    valid: false,
                    violations: Vec::new(),
                    error: Some(e),
                },
            };
            if !check.valid {
                invalid += 1;
            }
            match ctx.format {
                Format::Json => ctx.json(&check),
                Format::Text if check.valid => ctx.line(&format!("line {n}: ok")),
                Format::Text => {
                    if let Some(e) = &check.error {
                        ctx.line(&format!("line {n}: invalid: {e}"))?;
                    }
                    for v in &check.violations {
                        ctx.line(&format!(
                            "line {n}: invalid: row {} col {}: {}: {}",
                            v.row,
                            v.col,
                            v.rule.name(),
                            v.message
                        ))?;
                    }
                    Ok(())
                }
            }
        },
    )?;
    warn(format!("{total} sequences, {invalid} invalid"));
    Ok(invalid == 0)
}

enum GridSource {
    Fixed(usize, usize),
    ById(HashMap<String, (usize, usize)>),
}

#[derive(Serialize)]
struct AlignLogLine<'a> {
    line: usize,
    id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    rows: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cols: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    repairs: Option<&'a [RepairEntry]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
}

pub fn align(
    ctx: &mut Ctx,
    input: &Path,
    grid: (Option<usize>, Option<usize>),
    grid_file: Option<&Path>,
    max_seq_len: usize,
    log: Option<&Path>,
) -> CmdResult {
    let grids = match (grid, grid_file) {
        ((Some(r), Some(c)), _) => GridSource::Fixed(r, c),
        (_, Some(path)) => GridSource::ById(read_grids(path)?.into_iter().collect()),
        _ => {
            return Err(CliError::Content(
                "give --rows/--cols or --grid-file".into(),
            ))
        }
    };
    let opts = AlignOptions {
        max_seq_len: max_len(max_seq_len),
        sentinels: ctx.sentinels,
    };
    let reader = open_input(input)?;
    let mut log = log.map(|p| create_output(Some(p))).transpose()?;
    let mut failed = 0usize;
    map_lines(
        reader,
        |n, line| {
            if line.trim().is_empty() {
                return None;
            }
            let (id, payload) = split_id(line);
            let key = id.map_or_else(|| n.to_string(), str::to_string);
            let (rows, cols) = match &grids {
                GridSource::Fixed(r, c) => (*r, *c),
                GridSource::ById(map) => match map.get(&key) {
                    Some(&g) => g,
                    None => {
                        let err = format!("no grid for id {key:?}");
                        return Some((id.is_some(), key, Err(err)));
                    }
                },
            };
            let res = align_text_with(payload, rows, cols, &opts)
                .map(|(m, log)| (m, log, rows, cols))
                .map_err(|e| e.to_string());
            Some((id.is_some(), key, res))
        },
        |n, item| {
            let Some((has_id, key, res)) = item else {
                return ctx.line("");
            };
            let prefix = if has_id {
                format!("{key}\t")
            } else {
                String::new()
            };
            let entry = match &res {
                Ok((m, repairs, rows, cols)) => {
                    ctx.line(&format!("{prefix}{}", m.serialize()))?;
                    AlignLogLine {
                        line: n,
                        id: &key,
                        rows: Some(*rows),
                        cols: Some(*cols),
                        repairs: Some(&repairs.entries),
                        error: None,
                    }
                }
                Err(e) => {
                    failed += 1;
                    warn(format!("line {n}: {e}"));
                    ctx.line(&prefix)?;
                    AlignLogLine {
                        line: n,
                        id: &key,
                        rows: None,
                        cols: None,
                        repairs: None,
                        error: Some(e),
                    }
                }
            };
            if let Some(w) = log.as_mut() {
                serde_json::to_writer(&mut *w, &entry)?;
                writeln!(w)?;
            }
            Ok(())
        },
    )?;
    if let Some(mut w) = log {
        w.flush()?;
    }
    Ok(failed == 0)
}

/// Shared driver for the two converters: one output line per input line.
fn convert_lines(
    ctx: &mut Ctx,
    input: &Path,
    key: &str,
    f: impl Fn(&str) -> Result<String, String> + Sync,
) -> CmdResult {
    let reader = open_input(input)?;
    let mut failed = 0usize;
    map_lines(
        reader,
        |_, line| {
            if line.trim().is_empty() {
                return None;
            }
            let (id, payload) = split_id(line);
            Some((id.map(str::to_string), f(payload)))
        },
        |n, item| {
            let Some((id, res)) = item else {
                return ctx.line("");
            };
            if let Err(e) = &res {
                failed += 1;
                warn(format!("line {n}: {e}"));
            }
            match ctx.format {
                Format::Json => {
                    let mut obj = json!({ "line": n });
                    if let Some(id) = &id {
                        obj["id"] = json!(id);
                    }
                    match &res {
                        Ok(v) => obj[key] = json!(v),
                        Err(e) => obj["error"] = json!(e),
                    }
                    ctx.json(&obj)
                }
                Format::Text => {
                    let prefix = id.map(|i| format!("{i}\t")).unwrap_or_default();
                    ctx.line(&format!("{prefix}{}", res.as_deref().unwrap_or("")))
                }
            }
        },
    )?;
    Ok(failed == 0)
}

fn otsl_matrix(text: &str, sentinels: &Sentinels) -> Result<OtslMatrix, String> {
    let seq = parse_with(text, sentinels).map_err(|e| e.to_string())?;
    OtslMatrix::infer(&seq).map_err(|e| e.to_string())
}

pub fn otsl2html(ctx: &mut Ctx, input: &Path) -> CmdResult {
    let s = ctx.sentinels;
    convert_lines(ctx, input, "html", |text| {
        otsl_matrix(text, &s).map(|m| otsl_to_html(&m).to_string())
    })
}

pub fn html2otsl(ctx: &mut Ctx, input: &Path) -> CmdResult {
    convert_lines(ctx, input, "otsl", |text| {
        filter_structure(text)
            .and_then(|tags| html_to_otsl(&tags))
            .map(|m| m.serialize())
            .map_err(|e| e.to_string())
    })
}

/// A line holding either HTML (starts with `<`) or OTSL.
fn structure(text: &str, sentinels: &Sentinels) -> Result<HtmlTagSequence, String> {
    if text.trim_start().starts_with('<') {
        filter_structure(text).map_err(|e| e.to_string())
    } else {
        otsl_matrix(text, sentinels).map(|m| otsl_to_html(&m))
    }
}

pub fn teds(ctx: &mut Ctx, gt: &Path, pred: &Path) -> CmdResult {
    let mut gt_lines = open_input(gt)?.lines();
    let mut pred_lines = open_input(pred)?.lines();
    let mut mismatch = false;
    let pairs = std::iter::from_fn(|| match (gt_lines.next(), pred_lines.next()) {
        (None, None) => None,
        (Some(a), Some(b)) => Some(a.and_then(|a| b.map(|b| (a, b)))),
        _ => {
            mismatch = true;
            None
        }
    });
    let s = ctx.sentinels;
    let (mut sum, mut count, mut failed) = (0.0f64, 0usize, 0usize);
    let mut chunk = Vec::new();
    let mut pairs = pairs.enumerate();
    loop {
        chunk.clear();
        for (i, pair) in pairs.by_ref().take(1024) {
            chunk.push((i + 1, pair?));
        }
        if chunk.is_empty() {
            break;
        }
        let scores: Vec<Result<f64, String>> = chunk
            .par_iter()
            .map(|(_, (g, p))| {
                let (_, g) = split_id(g);
                let (_, p) = split_id(p);
                let g = structure(g, &s).map_err(|e| format!("gt: {e}"))?;
                let p = structure(p, &s).map_err(|e| format!("pred: {e}"))?;
                teds_s(&g, &p).map_err(|e| e.to_string())
            })
            .collect();
        for ((n, _), res) in chunk.iter().zip(scores) {
            count += 1;
            let score = match &res {
                Ok(v) => *v,
                Err(e) => {
                    failed += 1;
                    warn(format!("line {n}: {e}"));
                    0.0
                }
            };
            sum += score;
            match ctx.format {
                Format::Json => {
                    let mut obj = json!({ "line": n, "teds_s": round4(score) });
                    if let Err(e) = &res {
                        obj["error"] = json!(e);
                    }
                    ctx.json(&obj)?;
                }
                Format::Text => ctx.line(&format!("{n}\t{score:.4}"))?,
            }
        }
    }
    drop(pairs);
    if mismatch {
        return Err(CliError::Content(format!(
            "{} and {} have different line counts",
            gt.display(),
            pred.display()
        )));
    }
    let mean = if count > 0 { sum / count as f64 } else { 0.0 };
    match ctx.format {
        Format::Json => {
            ctx.json(&json!({ "count": count, "failed": failed, "mean": round4(mean) }))?
        }
        Format::Text => ctx.line(&format!("mean\t{mean:.4}"))?,
    }
    Ok(failed == 0)
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

pub fn grid(ctx: &mut Ctx, input: &Path, args: &GridArgs) -> CmdResult {
    let config = args.config();
    let mut failed = 0usize;
    let mut emit = |ctx: &mut Ctx, id: &str, res: Result<(usize, usize), String>| match res {
        Ok((rows, cols)) => match ctx.format {
            Format::Json => ctx.json(&json!({ "id": id, "rows": rows, "cols": cols })),
            Format::Text => ctx.line(&format!("{id} {rows} {cols}")),
        },
        Err(e) => {
            failed += 1;
            warn(format!("{id}: {e}"));
            Ok(())
        }
    };
    if input.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(input)
            .map_err(|e| CliError::Io(format!("{}: {e}", input.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        let results: Vec<(String, Result<Grid, String>)> = files
            .par_iter()
            .map(|p| {
                let id = p
                    .file_stem()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned();
                let res = std::fs::read_to_string(p)
                    .map_err(|e| e.to_string())
                    .and_then(|s| parse_detections(&s).map_err(|e| e.to_string()))
                    .map(|d| {
                        let g = estimate_grid(&d, &config);
                        (g.rows, g.cols)
                    });
                (id, res)
            })
            .collect();
        for (id, res) in results {
            emit(ctx, &id, res)?;
        }
    } else {
        let reader = open_input(input)?;
        map_lines(
            reader,
            |n, line| {
                if line.trim().is_empty() {
                    return None;
                }
                Some(match parse_detection_line(line) {
                    Ok((id, d)) => {
                        let g = estimate_grid(&d, &config);
                        (id, Ok((g.rows, g.cols)))
                    }
                    Err(e) => (format!("line {n}"), Err(e.to_string())),
                })
            },
            |_, item| match item {
                Some((id, res)) => emit(ctx, &id, res),
                None => Ok(()),
            },
        )?;
    }
    Ok(failed == 0)
}

pub fn gridmetrics(ctx: &mut Ctx, pred: &Path, gt: &Path) -> CmdResult {
    let pred: HashMap<String, (usize, usize)> = read_grids(pred)?.into_iter().collect();
    let gt = read_grids(gt)?;
    let mut p = Vec::with_capacity(gt.len());
    let mut g = Vec::with_capacity(gt.len());
    for (id, grid) in &gt {
        let Some(&pg) = pred.get(id) else {
            return Err(CliError::Content(format!(
                "no predicted grid for id {id:?}"
            )));
        };
        p.push(pg);
        g.push(*grid);
    }
    if pred.len() != gt.len() {
        warn(format!(
            "{} predicted grids have no ground truth",
            pred.len() - gt.len()
        ));
    }
    let m = grid_match_metrics(&p, &g)?;
    match ctx.format {
        Format::Json => ctx.json(&m)?,
        Format::Text => {
            ctx.line(&format!("samples {}", m.samples))?;
            ctx.line(&format!("{:<12} {:>12} {:>12}", "", "exact (%)", "avg L1"))?;
            ctx.line(&format!(
                "{:<12} {:>12.2} {:>12.4}",
                "rows", m.exact_match_rows, m.l1_rows
            ))?;
            ctx.line(&format!(
                "{:<12} {:>12.2} {:>12.4}",
                "cols", m.exact_match_cols, m.l1_cols
            ))?;
            ctx.line(&format!(
                "{:<12} {:>12.2} {:>12.4}",
                "rows+cols", m.exact_match_both, m.l1_both
            ))?;
            ctx.line("# rows+cols L1 = mean over samples of (|dR| + |dC|) / 2")?;
        }
    }
    Ok(true)
}

fn group_keys(raw: &[String]) -> Result<Vec<GroupKey>, CliError> {
    let keys = raw
        .iter()
        .map(|k| k.parse::<GroupKey>())
        .collect::<Result<Vec<_>, _>>()?;
    let mut seen = HashSet::new();
    for k in &keys {
        if !seen.insert(k) {
            return Err(CliError::Content(format!(
                "group key {} given twice",
                k.name()
            )));
        }
    }
    Ok(keys)
}

#[derive(Default)]
struct StatsGroup {
    coverage: CoverageAccumulator,
    simple: usize,
    complex: usize,
}

#[derive(Serialize)]
struct StatsRow {
    group: String,
    simple: usize,
    complex: usize,
    coverage: Option<CoverageStats>,
}

pub fn stats(ctx: &mut Ctx, dataset: &Path, field: &str, group_by: &[String]) -> CmdResult {
    let field: OtslField = field.parse()?;
    let keys = group_keys(group_by)?;
    let mut overall = StatsGroup::default();
    let mut groups: BTreeMap<(GroupKey, String), StatsGroup> = BTreeMap::new();
    let mut warnings = 0usize;
    for record in RecordReader::open(dataset)? {
        let record = record?;
        let tokens = match field.get(&record) {
            None => {
                warnings += 1;
                warn(format!("{}: missing {}", record.id, field.name()));
                None
            }
            Some(text) => match parse_with(text, &ctx.sentinels) {
                Ok(seq) if !seq.is_empty() => Some(seq.tokens),
                Ok(_) => {
                    warnings += 1;
                    warn(format!("{}: empty {}", record.id, field.name()));
                    None
                }
                Err(e) => {
                    warnings += 1;
                    warn(format!("{}: {e}", record.id));
                    None
                }
            },
        };
        let complexity = match ground_truth(&record, &ctx.sentinels) {
            Ok(gt) => Some(gt.complexity),
            Err(e) => {
                warnings += 1;
                warn(e);
                None
            }
        };
        let update = |g: &mut StatsGroup| {
            if let Some(tokens) = &tokens {
                g.coverage.add(tokens);
            }
            match complexity {
                Some(Complexity::Simple) => g.simple += 1,
                Some(Complexity::Complex) => g.complex += 1,
                None => {}
            }
        };
        update(&mut overall);
        for &k in &keys {
            update(groups.entry((k, record.group_value(k))).or_default());
        }
    }
    let row = |name: String, g: &StatsGroup| StatsRow {
        group: name,
        simple: g.simple,
        complex: g.complex,
        coverage: g.coverage.finish().ok(),
    };
    let mut rows = vec![row("overall".into(), &overall)];
    rows.extend(
        groups
            .iter()
            .map(|((k, v), g)| row(format!("{}={v}", k.name()), g)),
    );
    match ctx.format {
        Format::Json => ctx.json(&json!({
            "field": field.name(),
            "warnings": warnings,
            "groups": rows,
        }))?,
        Format::Text => {
            for r in &rows {
                ctx.line(&format!(
                    "[{}] simple {} complex {} samples {}",
                    r.group,
                    r.simple,
                    r.complex,
                    r.coverage.as_ref().map_or(0, |c| c.samples)
                ))?;
                if let Some(c) = &r.coverage {
                    ctx.line(&format!(
                        "{:<6} {:>12} {:>14} {:>10}",
                        "token", "count", "avg occ (%)", "pooled (%)"
                    ))?;
                    for t in &c.tokens {
                        ctx.line(&format!(
                            "{:<6} {:>12} {:>14.4} {:>10.4}",
                            t.token.as_char(),
                            t.count,
                            t.avg_occupancy_pct,
                            t.pooled_pct
                        ))?;
                    }
                }
            }
        }
    }
    if overall.coverage.samples() == 0 {
        return Err(CliError::Content(format!("no record has {}", field.name())));
    }
    Ok(true)
}

enum Detections {
    Dir(DetectionDir),
    Map(HashMap<String, Vec<otslkit::Detection>>),
}

impl Detections {
    fn load(path: &Path) -> Result<Self, CliError> {
        if path.is_dir() {
            return Ok(Detections::Dir(DetectionDir(path.to_path_buf())));
        }
        Ok(Detections::Map(read_detection_stream(open_input(path)?)?))
    }

    fn source(&self) -> &dyn DetectionSource {
        match self {
            Detections::Dir(d) => d,
            Detections::Map(m) => m,
        }
    }
}

pub fn eval(
    ctx: &mut Ctx,
    dataset: &Path,
    detections: Option<&Path>,
    grid: &GridArgs,
    max_seq_len: usize,
    group_by: &[String],
    records_out: Option<&Path>,
) -> CmdResult {
    let config = EvalConfig {
        grid: grid.config(),
        align: AlignOptions {
            max_seq_len: max_len(max_seq_len),
            sentinels: ctx.sentinels,
        },
        group_by: group_keys(group_by)?,
        jobs: None,
        deterministic: ctx.deterministic,
    };
    config.check()?;
    let dets = detections.map(Detections::load).transpose()?;
    let source = dets.as_ref().map(Detections::source);
    let mut records_out = records_out.map(|p| create_output(Some(p))).transpose()?;

    let mut reader = RecordReader::open(dataset)?;
    let mut results: Vec<RecordResult> = Vec::new();
    let mut chunk = Vec::new();
    loop {
        chunk.clear();
        for r in reader.by_ref().take(1024) {
            chunk.push(r?);
        }
        if chunk.is_empty() {
            break;
        }
        let done: Vec<RecordResult> = chunk
            .par_iter()
            .map(|r| evaluate_record(r, source, &config))
            .collect();
        for r in done {
            if let Some(reason) = &r.failure {
                warn(format!("{}: {reason}", r.id));
            }
            if let Some(w) = records_out.as_mut() {
                serde_json::to_writer(&mut *w, &r)?;
                writeln!(w)?;
            }
            results.push(r);
        }
    }
    if let Some(mut w) = records_out {
        w.flush()?;
    }
    let mut report = aggregate(results, &config);
    let timing = timing_report(&report);
    report.records.clear();
    match ctx.format {
        Format::Json => ctx.json(&json!({ "report": report, "timing": timing }))?,
        Format::Text => {
            write!(ctx.out, "{report}")?;
            write!(ctx.out, "{timing}")?;
        }
    }
    Ok(true)
}
