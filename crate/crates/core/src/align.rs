//! Grid-based alignment: repair a raw predicted token string into a valid
//! `R x (C + 1)` matrix once the grid counts are known.
//!
//! Repairs run in a fixed order so later phases see final geometry:
//!
//! 1. length: truncate the tail, or pad the tail with `F`;
//! 2. `N` periodicity: the last slot of every row becomes `N`, any other `N`
//!    becomes `F`;
//! 3. grammar: one row-major pass replacing misplaced `L`, `U` and `X` with
//!    `F`. Every rule only looks left and up, at cells the pass has already
//!    finalised, so one pass is enough.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::otsl::{CellContext, OtslMatrix, OtslSequence, OtslToken, Sentinels};

/// Upper bound on the raw prediction length used by the pipeline defaults.
pub const DEFAULT_MAX_SEQ_LEN: usize = 224;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepairAction {
    Trimmed,
    Padded,
    ForcedN,
    NToF,
    LToF,
    UToF,
    XToF,
    DroppedChar,
}

impl RepairAction {
    pub fn name(self) -> &'static str {
        match self {
            RepairAction::Trimmed => "trimmed",
            RepairAction::Padded => "padded",
            RepairAction::ForcedN => "forced-N",
            RepairAction::NToF => "N-to-F",
            RepairAction::LToF => "L-to-F",
            RepairAction::UToF => "U-to-F",
            RepairAction::XToF => "X-to-F",
            RepairAction::DroppedChar => "dropped-char",
        }
    }

    fn to_fill(token: OtslToken) -> Self {
        match token {
            OtslToken::Left => RepairAction::LToF,
            OtslToken::Up => RepairAction::UToF,
            OtslToken::Cross => RepairAction::XToF,
            _ => RepairAction::NToF,
        }
    }
}

impl fmt::Display for RepairAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RepairEntry {
    /// Offset into the token string being repaired. For `dropped-char` this
    /// is the character offset in the raw text.
    pub position: usize,
    /// Grid coordinates, once the length phase has fixed the geometry.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell: Option<(usize, usize)>,
    pub action: RepairAction,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RepairLog {
    pub entries: Vec<RepairEntry>,
    pub counts: BTreeMap<RepairAction, usize>,
}

impl RepairLog {
    fn push(
        &mut self,
        position: usize,
        cell: Option<(usize, usize)>,
        action: RepairAction,
        detail: String,
    ) {
        *self.counts.entry(action).or_default() += 1;
        self.entries.push(RepairEntry {
            position,
            cell,
            action,
            detail,
        });
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn count(&self, action: RepairAction) -> usize {
        self.counts.get(&action).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlignOptions {
    /// Raw tokens beyond this length are trimmed before alignment.
    pub max_seq_len: Option<usize>,
    pub sentinels: Sentinels,
}

impl Default for AlignOptions {
    fn default() -> Self {
        Self {
            max_seq_len: None,
            sentinels: Sentinels::none(),
        }
    }
}

impl AlignOptions {
    /// Options matching the decoder limit used by the evaluation pipeline.
    pub fn pipeline() -> Self {
        Self {
            max_seq_len: Some(DEFAULT_MAX_SEQ_LEN),
            ..Self::default()
        }
    }
}

/// Repairs `raw` into a valid `rows x (cols + 1)` matrix.
pub fn align(raw: &OtslSequence, rows: usize, cols: usize) -> Result<(OtslMatrix, RepairLog)> {
    align_tokens(raw.tokens.clone(), rows, cols, None, RepairLog::default())
}

pub fn align_with(
    raw: &OtslSequence,
    rows: usize,
    cols: usize,
    options: &AlignOptions,
) -> Result<(OtslMatrix, RepairLog)> {
    align_tokens(
        raw.tokens.clone(),
        rows,
        cols,
        options.max_seq_len,
        RepairLog::default(),
    )
}

/// Parses and aligns a raw line. Characters outside the vocabulary are
/// dropped and logged instead of failing the parse.
pub fn align_text(line: &str, rows: usize, cols: usize) -> Result<(OtslMatrix, RepairLog)> {
    align_text_with(line, rows, cols, &AlignOptions::default())
}

pub fn align_text_with(
    line: &str,
    rows: usize,
    cols: usize,
    options: &AlignOptions,
) -> Result<(OtslMatrix, RepairLog)> {
    check_grid(rows, cols)?;
    let mut log = RepairLog::default();
    let mut tokens = Vec::with_capacity(line.len());
    for (position, c) in line.chars().enumerate() {
        if c.is_whitespace() || options.sentinels.is_sentinel(c) {
            continue;
        }
        match OtslToken::from_char(c) {
            Some(t) => tokens.push(t),
            None => log.push(
                position,
                None,
                RepairAction::DroppedChar,
                format!("dropped {c:?}"),
            ),
        }
    }
    align_tokens(tokens, rows, cols, options.max_seq_len, log)
}

fn check_grid(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::BadGrid { rows, cols });
    }
    Ok(())
}

fn align_tokens(
    mut tokens: Vec<OtslToken>,
    rows: usize,
    cols: usize,
    max_seq_len: Option<usize>,
    mut log: RepairLog,
) -> Result<(OtslMatrix, RepairLog)> {
    check_grid(rows, cols)?;
    let width = cols + 1;
    let total = rows * width;

    // Phase 1: length.
    let keep = max_seq_len.map_or(total, |cap| cap.min(total));
    if tokens.len() > keep {
        for (position, t) in tokens.iter().enumerate().skip(keep) {
            log.push(
                position,
                None,
                RepairAction::Trimmed,
                format!("trimmed {t}"),
            );
        }
        tokens.truncate(keep);
    }
    if tokens.len() < total {
        for position in tokens.len()..total {
            log.push(
                position,
                Some((position / width, position % width)),
                RepairAction::Padded,
                "padded with F".to_string(),
            );
        }
        tokens.resize(total, OtslToken::Fill);
    }

    // Phase 2: N periodicity.
    for (position, t) in tokens.iter_mut().enumerate() {
        let cell = (position / width, position % width);
        if cell.1 == cols {
            if *t != OtslToken::NewLine {
                log.push(
                    position,
                    Some(cell),
                    RepairAction::ForcedN,
                    format!("{t} replaced by N at row end"),
                );
                *t = OtslToken::NewLine;
            }
        } else if *t == OtslToken::NewLine {
            log.push(
                position,
                Some(cell),
                RepairAction::NToF,
                "N inside a row replaced by F".to_string(),
            );
            *t = OtslToken::Fill;
        }
    }

    // Phase 3: grammar.
    for position in 0..total {
        let ctx = CellContext::at(&tokens, width, position);
        if ctx.token.is_merge() && !ctx.is_valid() {
            log.push(
                position,
                Some((ctx.row, ctx.col)),
                RepairAction::to_fill(ctx.token),
                format!("misplaced {} replaced by F", ctx.token),
            );
            tokens[position] = OtslToken::Fill;
        }
    }

    Ok((OtslMatrix::from_valid_cells(rows, cols, tokens), log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::otsl::parse;

    fn run(s: &str, r: usize, c: usize) -> (String, RepairLog) {
        let (m, log) = align(&parse(s).unwrap(), r, c).unwrap();
        (m.serialize(), log)
    }

    #[test]
    fn pads_and_forces_newline() {
        let (s, log) = run("FLNFFNFFNFFNFF", 5, 2);
        assert_eq!(s, "FLNFFNFFNFFNFFN");
        assert_eq!(log.len(), 2);
        assert_eq!(log.count(RepairAction::Padded), 1);
        assert_eq!(log.count(RepairAction::ForcedN), 1);
    }

    #[test]
    fn misplaced_newline_becomes_fill() {
        let (s, log) = run("FNNFFN", 2, 2);
        assert_eq!(s, "FFNFFN");
        assert_eq!(log.len(), 1);
        assert_eq!(log.entries[0].action, RepairAction::NToF);
        assert_eq!(log.entries[0].position, 1);
    }

    #[test]
    fn valid_input_is_untouched() {
        let (s, log) = run("FLNFFN", 2, 2);
        assert_eq!(s, "FLNFFN");
        assert!(log.is_empty());
    }

    #[test]
    fn grammar_pass_trace() {
        let (s, log) = run("ULNXFN", 2, 2);
        assert_eq!(s, "FLNFFN");
        let actions: Vec<_> = log.entries.iter().map(|e| (e.cell, e.action)).collect();
        assert_eq!(
            actions,
            vec![
                (Some((0, 0)), RepairAction::UToF),
                (Some((1, 0)), RepairAction::XToF)
            ]
        );
    }

    #[test]
    fn repaired_left_merge_legitimises_the_run() {
        // L at (1,1) sits right of a U, so it becomes F and the L after it
        // then has a legal left neighbour.
        let (s, log) = run("FFFNULLN", 2, 3);
        assert_eq!(s, "FFFNUFLN");
        assert_eq!(log.len(), 1);
        assert_eq!(log.count(RepairAction::LToF), 1);
        let (s, log) = run("FFNXLN", 2, 2);
        assert_eq!(s, "FFNFLN");
        assert_eq!(log.count(RepairAction::XToF), 1);
    }

    #[test]
    fn trims_the_tail() {
        let (s, log) = run("FNFNFN", 2, 1);
        assert_eq!(s, "FNFN");
        assert_eq!(log.count(RepairAction::Trimmed), 2);
        assert_eq!(log.entries[0].position, 4);
    }

    #[test]
    fn max_len_caps_before_padding() {
        let opts = AlignOptions {
            max_seq_len: Some(2),
            ..AlignOptions::default()
        };
        let (m, log) = align_with(&parse("FLNFFN").unwrap(), 2, 2, &opts).unwrap();
        assert_eq!(m.serialize(), "FLNFFN");
        assert_eq!(log.count(RepairAction::Trimmed), 4);
        assert_eq!(log.count(RepairAction::Padded), 4);
    }

    #[test]
    fn align_text_drops_unknown_characters() {
        let (m, log) = align_text("F?LNFFN", 2, 2).unwrap();
        assert_eq!(m.serialize(), "FLNFFN");
        assert_eq!(log.len(), 1);
        assert_eq!(log.entries[0].action, RepairAction::DroppedChar);
        assert_eq!(log.entries[0].position, 1);

        let (m, log) = align_text("FLNFFN", 2, 2).unwrap();
        assert_eq!(m.serialize(), "FLNFFN");
        assert!(log.is_empty());
    }

    #[test]
    fn align_text_empty_input() {
        let (m, log) = align_text("", 1, 1).unwrap();
        assert_eq!(m.serialize(), "FN");
        assert_eq!(log.count(RepairAction::Padded), 2);
        assert_eq!(log.count(RepairAction::ForcedN), 1);
        assert_eq!(log.len(), 3);
    }

    #[test]
    fn bad_grid() {
        assert!(matches!(align_text("FN", 0, 1), Err(Error::BadGrid { .. })));
        assert!(matches!(align_text("FN", 1, 0), Err(Error::BadGrid { .. })));
        assert!(matches!(
            align(&parse("FN").unwrap(), 0, 3),
            Err(Error::BadGrid { .. })
        ));
    }

    #[test]
    fn sentinels_are_skipped_silently() {
        let opts = AlignOptions {
            sentinels: Sentinels {
                start: Some('^'),
                stop: Some('$'),
            },
            ..AlignOptions::default()
        };
        let (m, log) = align_text_with("^FLNFFN$", 2, 2, &opts).unwrap();
        assert_eq!(m.serialize(), "FLNFFN");
        assert!(log.is_empty());
    }
}
