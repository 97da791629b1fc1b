//! The OTSL table-structure language.
//!
//! A table with `R` rows and `C` columns is written as `R * (C + 1)` tokens in
//! row-major order: every row holds `C` cell tokens followed by a single `N`.
//! Merged cells are encoded by pointing back at their origin: `L` merges with
//! the cell to its left, `U` with the cell above and `X` with both.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OtslToken {
    /// `F`: a cell with content.
    Fill,
    /// `E`: a cell without content.
    Empty,
    /// `L`: merges with the left neighbour (column span).
    Left,
    /// `U`: merges with the upper neighbour (row span).
    Up,
    /// `X`: merges with both the left and the upper neighbour.
    Cross,
    /// `N`: ends the current row.
    NewLine,
}

impl OtslToken {
    pub const ALL: [OtslToken; 6] = [
        OtslToken::Fill,
        OtslToken::Empty,
        OtslToken::Left,
        OtslToken::Up,
        OtslToken::Cross,
        OtslToken::NewLine,
    ];

    pub fn from_char(c: char) -> Option<Self> {
        Some(match c {
            'F' => OtslToken::Fill,
            'E' => OtslToken::Empty,
            'L' => OtslToken::Left,
            'U' => OtslToken::Up,
            'X' => OtslToken::Cross,
            'N' => OtslToken::NewLine,
            _ => return None,
        })
    }

    pub fn as_char(self) -> char {
        match self {
            OtslToken::Fill => 'F',
            OtslToken::Empty => 'E',
            OtslToken::Left => 'L',
            OtslToken::Up => 'U',
            OtslToken::Cross => 'X',
            OtslToken::NewLine => 'N',
        }
    }

    /// Index into [`OtslToken::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    /// True for `F` and `E`, the tokens that open a cell.
    pub fn is_cell_origin(self) -> bool {
        matches!(self, OtslToken::Fill | OtslToken::Empty)
    }

    /// True for the merge tokens `L`, `U` and `X`.
    pub fn is_merge(self) -> bool {
        matches!(self, OtslToken::Left | OtslToken::Up | OtslToken::Cross)
    }
}

impl fmt::Display for OtslToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl Serialize for OtslToken {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_char(self.as_char())
    }
}

/// Characters removed by [`parse_with`] before mapping to tokens. These are
/// the start/stop markers some decoders wrap their output in.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Sentinels {
    pub start: Option<char>,
    pub stop: Option<char>,
}

impl Sentinels {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_sentinel(&self, c: char) -> bool {
        self.start == Some(c) || self.stop == Some(c)
    }
}

/// A raw token string, e.g. a model prediction. Carries no validity guarantee.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OtslSequence {
    pub tokens: Vec<OtslToken>,
    pub source_note: Option<String>,
}

impl OtslSequence {
    pub fn new(tokens: Vec<OtslToken>) -> Self {
        Self {
            tokens,
            source_note: None,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl fmt::Display for OtslSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.tokens.iter().try_for_each(|t| write!(f, "{t}"))
    }
}

impl std::str::FromStr for OtslSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse(s)
    }
}

/// Parses OTSL text with no sentinels configured.
pub fn parse(text: &str) -> Result<OtslSequence> {
    parse_with(text, &Sentinels::none())
}

/// Parses OTSL text, one token per character. Whitespace and the configured
/// sentinel characters are skipped; positions in errors are character offsets
/// into `text`.
pub fn parse_with(text: &str, sentinels: &Sentinels) -> Result<OtslSequence> {
    let mut tokens = Vec::with_capacity(text.len());
    for (position, character) in text.chars().enumerate() {
        if character.is_whitespace() || sentinels.is_sentinel(character) {
            continue;
        }
        match OtslToken::from_char(character) {
            Some(token) => tokens.push(token),
            None => {
                return Err(Error::UnknownToken {
                    position,
                    character,
                })
            }
        }
    }
    Ok(OtslSequence::new(tokens))
}

/// Grammar rules checked by [`validate`], in the order they are applied to
/// each cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    /// `N` appears exactly in the last column.
    NewlinePlacement,
    /// The first row holds no `U` or `X`.
    FirstRow,
    /// The first column holds no `L` or `X`.
    FirstColumn,
    /// The left neighbour of `L` is `F`, `E` or `L`.
    LeftMerge,
    /// The upper neighbour of `U` is `F`, `E`, `U` or `X`.
    UpMerge,
    /// The left neighbour of `X` is `X` or `U`, and its upper neighbour is `X` or `L`.
    CrossMerge,
}

impl Rule {
    pub const ALL: [Rule; 6] = [
        Rule::NewlinePlacement,
        Rule::FirstRow,
        Rule::FirstColumn,
        Rule::LeftMerge,
        Rule::UpMerge,
        Rule::CrossMerge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::NewlinePlacement => "n-placement",
            Rule::FirstRow => "first-row",
            Rule::FirstColumn => "first-column",
            Rule::LeftMerge => "left-merge",
            Rule::UpMerge => "up-merge",
            Rule::CrossMerge => "cross-merge",
        }
    }

    fn is_broken(self, cell: &CellContext) -> bool {
        use OtslToken::*;
        let t = cell.token;
        match self {
            Rule::NewlinePlacement => (cell.col + 1 == cell.width) != (t == NewLine),
            Rule::FirstRow => cell.row == 0 && matches!(t, Up | Cross),
            Rule::FirstColumn => cell.col == 0 && matches!(t, Left | Cross),
            Rule::LeftMerge => {
                t == Left && cell.left.is_some_and(|l| !matches!(l, Fill | Empty | Left))
            }
            Rule::UpMerge => {
                t == Up
                    && cell
                        .up
                        .is_some_and(|u| !matches!(u, Fill | Empty | Up | Cross))
            }
            Rule::CrossMerge => {
                t == Cross
                    && (cell.left.is_some_and(|l| !matches!(l, Cross | Up))
                        || cell.up.is_some_and(|u| !matches!(u, Cross | Left)))
            }
        }
    }

    fn describe(self, cell: &CellContext) -> String {
        let t = cell.token;
        let show = |n: Option<OtslToken>| n.map_or("none".to_string(), |n| n.to_string());
        match self {
            Rule::NewlinePlacement if t == OtslToken::NewLine => {
                "N outside the last column".to_string()
            }
            Rule::NewlinePlacement => format!("last column holds {t}, expected N"),
            Rule::FirstRow => format!("{t} cannot appear in the first row"),
            Rule::FirstColumn => format!("{t} cannot appear in the first column"),
            Rule::LeftMerge => format!("left neighbor of L is {}, not F, E or L", show(cell.left)),
            Rule::UpMerge => format!("upper neighbor of U is {}, not F, E, U or X", show(cell.up)),
            Rule::CrossMerge => {
                if cell
                    .left
                    .is_some_and(|l| !matches!(l, OtslToken::Cross | OtslToken::Up))
                {
                    format!("left neighbor of X is {}, not X or U", show(cell.left))
                } else {
                    format!("upper neighbor of X is {}, not X or L", show(cell.up))
                }
            }
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Rule {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

/// A cell together with the neighbours the grammar looks at.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CellContext {
    pub token: OtslToken,
    pub row: usize,
    pub col: usize,
    pub width: usize,
    pub left: Option<OtslToken>,
    pub up: Option<OtslToken>,
}

impl CellContext {
    pub(crate) fn at(cells: &[OtslToken], width: usize, index: usize) -> Self {
        let (row, col) = (index / width, index % width);
        CellContext {
            token: cells[index],
            row,
            col,
            width,
            left: (col > 0).then(|| cells[index - 1]),
            up: (row > 0).then(|| cells[index - width]),
        }
    }

    pub(crate) fn is_valid(&self) -> bool {
        Rule::ALL.iter().all(|r| !r.is_broken(self))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub row: usize,
    pub col: usize,
    pub token: OtslToken,
    pub rule: Rule,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}) {} [{}]: {}",
            self.row, self.col, self.token, self.rule, self.message
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            valid: violations.is_empty(),
            violations,
        }
    }
}

/// Checks a row-major grid of `width` columns (the `N` column included)
/// against every grammar rule and reports all violations.
///
/// A grid that is not a whole number of rows, or is narrower than two
/// columns, is reported as a single `n-placement` violation at (0, 0).
pub fn validate(cells: &[OtslToken], width: usize) -> ValidationReport {
    if width < 2 || cells.is_empty() || !cells.len().is_multiple_of(width) {
        return ValidationReport::from_violations(vec![Violation {
            row: 0,
            col: 0,
            token: cells.first().copied().unwrap_or(OtslToken::NewLine),
            rule: Rule::NewlinePlacement,
            message: format!(
                "{} tokens do not form a grid of width {width} (at least 1 row and 2 columns)",
                cells.len()
            ),
        }]);
    }
    let mut violations = Vec::new();
    for index in 0..cells.len() {
        let cell = CellContext::at(cells, width, index);
        for rule in Rule::ALL {
            if rule.is_broken(&cell) {
                violations.push(Violation {
                    row: cell.row,
                    col: cell.col,
                    token: cell.token,
                    rule,
                    message: rule.describe(&cell),
                });
            }
        }
    }
    ValidationReport::from_violations(violations)
}

/// Validates a grid given as a list of rows.
pub fn validate_rows(rows: &[Vec<OtslToken>]) -> ValidationReport {
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return validate(&[], 0);
    }
    let cells: Vec<OtslToken> = rows.iter().flatten().copied().collect();
    validate(&cells, width)
}

/// A valid OTSL table: `rows` rows of `cols + 1` tokens, last column all `N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OtslMatrix {
    rows: usize,
    cols: usize,
    cells: Vec<OtslToken>,
}

impl OtslMatrix {
    /// Builds a matrix from row-major tokens, checking the grammar.
    pub fn new(rows: usize, cols: usize, cells: Vec<OtslToken>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::BadGrid { rows, cols });
        }
        let expected = rows * (cols + 1);
        if cells.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: cells.len(),
            });
        }
        let report = validate(&cells, cols + 1);
        match report.violations.into_iter().next() {
            Some(v) => Err(Error::InvalidStructure(v)),
            None => Ok(Self { rows, cols, cells }),
        }
    }

    /// Skips validation; callers guarantee the grammar holds.
    pub(crate) fn from_valid_cells(rows: usize, cols: usize, cells: Vec<OtslToken>) -> Self {
        debug_assert!(validate(&cells, cols + 1).valid);
        Self { rows, cols, cells }
    }

    pub fn from_rows(rows: Vec<Vec<OtslToken>>) -> Result<Self> {
        let r = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|row| row.len() != width) {
            return Err(Error::LengthMismatch {
                expected: width,
                actual: bad.len(),
            });
        }
        Self::new(
            r,
            width.saturating_sub(1),
            rows.into_iter().flatten().collect(),
        )
    }

    /// Builds a matrix from a sequence, taking the column count from the
    /// position of the first `N`.
    pub fn infer(seq: &OtslSequence) -> Result<Self> {
        let width = seq
            .tokens
            .iter()
            .position(|&t| t == OtslToken::NewLine)
            .map(|p| p + 1)
            .ok_or(Error::BadGrid { rows: 0, cols: 0 })?;
        if width < 2 {
            return Err(Error::BadGrid { rows: 0, cols: 0 });
        }
        if !seq.len().is_multiple_of(width) {
            return Err(Error::LengthMismatch {
                expected: seq.len().div_ceil(width) * width,
                actual: seq.len(),
            });
        }
        Self::new(seq.len() / width, width - 1, seq.tokens.clone())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row length including the trailing `N`.
    pub fn width(&self) -> usize {
        self.cols + 1
    }

    pub fn cells(&self) -> &[OtslToken] {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> Option<OtslToken> {
        (row < self.rows && col < self.width()).then(|| self.cells[row * self.width() + col])
    }

    pub fn row(&self, row: usize) -> &[OtslToken] {
        let w = self.width();
        &self.cells[row * w..(row + 1) * w]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[OtslToken]> {
        self.cells.chunks(self.width())
    }

    pub fn to_rows(&self) -> Vec<Vec<OtslToken>> {
        self.iter_rows().map(<[_]>::to_vec).collect()
    }

    pub fn to_sequence(&self) -> OtslSequence {
        OtslSequence::new(self.cells.clone())
    }

    /// Row-major concatenation of all tokens.
    pub fn serialize(&self) -> String {
        self.cells.iter().map(|t| t.as_char()).collect()
    }

    /// A table is complex when it has at least one merged cell.
    pub fn is_complex(&self) -> bool {
        self.cells.iter().any(|t| t.is_merge())
    }

    pub fn validate(&self) -> ValidationReport {
        validate(&self.cells, self.width())
    }

    pub fn count(&self, token: OtslToken) -> usize {
        self.cells.iter().filter(|&&t| t == token).count()
    }
}

impl fmt::Display for OtslMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

/// Reshapes a sequence into an `rows x (cols + 1)` matrix. The sequence must
/// already be a valid table of that shape; use [`crate::align`] otherwise.
pub fn to_matrix(seq: &OtslSequence, rows: usize, cols: usize) -> Result<OtslMatrix> {
    OtslMatrix::new(rows, cols, seq.tokens.clone())
}

/// Shorthand for [`OtslMatrix::is_complex`].
pub fn is_complex(m: &OtslMatrix) -> bool {
    m.is_complex()
}

/// Seeded generator of valid matrices.
///
/// Cells are visited row-major. At each free slot a merge is started with
/// probability `span_prob`: its width and height are drawn uniformly from
/// the free rectangle anchored there, and it is written as an origin cell
/// with `L` along the top row, `U` down the left column and `X` inside.
/// Origin cells are `E` with probability `empty_prob` and `F` otherwise.
pub fn random_valid(
    rows: usize,
    cols: usize,
    seed: u64,
    span_prob: f64,
    empty_prob: f64,
) -> Result<OtslMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::BadGrid { rows, cols });
    }
    for (name, p) in [("span_prob", span_prob), ("empty_prob", empty_prob)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = cols + 1;
    let mut cells: Vec<Option<OtslToken>> = vec![None; rows * width];
    for r in 0..rows {
        cells[r * width + cols] = Some(OtslToken::NewLine);
    }

    for r in 0..rows {
        for c in 0..cols {
            if cells[r * width + c].is_some() {
                continue;
            }
            let origin = if rng.gen_bool(empty_prob) {
                OtslToken::Empty
            } else {
                OtslToken::Fill
            };
            let (mut h, mut w) = (1, 1);
            if rng.gen_bool(span_prob) {
                let max_w = (c..cols)
                    .take_while(|&cc| cells[r * width + cc].is_none())
                    .count();
                w = rng.gen_range(1..=max_w);
                let max_h = (r..rows)
                    .take_while(|&rr| (c..c + w).all(|cc| cells[rr * width + cc].is_none()))
                    .count();
                h = rng.gen_range(1..=max_h);
            }
            for dr in 0..h {
                for dc in 0..w {
                    let token = match (dr, dc) {
                        (0, 0) => origin,
                        (0, _) => OtslToken::Left,
                        (_, 0) => OtslToken::Up,
                        _ => OtslToken::Cross,
                    };
                    cells[(r + dr) * width + c + dc] = Some(token);
                }
            }
        }
    }
    let cells = cells
        .into_iter()
        .map(|t| t.expect("every slot is filled"))
        .collect();
    Ok(OtslMatrix::from_valid_cells(rows, cols, cells))
}

#[cfg(test)]
mod tests {
    use super::*;
    use OtslToken::*;

    fn m(rows: &[&str]) -> Vec<Vec<OtslToken>> {
        rows.iter().map(|r| parse(r).unwrap().tokens).collect()
    }

    #[test]
    fn parse_examples() {
        assert_eq!(parse("FLN").unwrap().tokens, vec![Fill, Left, NewLine]);
        assert!(parse("").unwrap().is_empty());
        match parse("FQN") {
            Err(Error::UnknownToken {
                position,
                character,
            }) => {
                assert_eq!((position, character), (1, 'Q'))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_strips_whitespace_and_sentinels() {
        let s = Sentinels {
            start: Some('<'),
            stop: Some('>'),
        };
        assert_eq!(parse_with("< FL N >", &s).unwrap().to_string(), "FLN");
        assert!(matches!(
            parse("<FLN>"),
            Err(Error::UnknownToken {
                position: 0,
                character: '<'
            })
        ));
    }

    #[test]
    fn to_matrix_examples() {
        let mat = to_matrix(&parse("FLNFFN").unwrap(), 2, 2).unwrap();
        assert_eq!(mat.to_rows(), m(&["FLN", "FFN"]));
        assert!(matches!(
            to_matrix(&parse("FLN").unwrap(), 2, 2),
            Err(Error::LengthMismatch {
                expected: 6,
                actual: 3
            })
        ));
        match to_matrix(&parse("FNNFFN").unwrap(), 2, 2) {
            Err(Error::InvalidStructure(v)) => {
                assert_eq!((v.row, v.col, v.token), (0, 1, NewLine));
                assert_eq!(v.rule, Rule::NewlinePlacement);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            to_matrix(&parse("").unwrap(), 0, 2),
            Err(Error::BadGrid { .. })
        ));
    }

    #[test]
    fn validate_examples() {
        assert!(validate_rows(&m(&["FLN", "FFN"])).valid);

        let r = validate_rows(&m(&["LFN"]));
        assert!(!r.valid);
        assert_eq!(r.violations.len(), 1);
        let v = &r.violations[0];
        assert_eq!(
            (v.row, v.col, v.token, v.rule.name()),
            (0, 0, Left, "first-column")
        );

        let r = validate_rows(&m(&["FFN", "UXN"]));
        assert_eq!(r.violations.len(), 1);
        let v = &r.violations[0];
        assert_eq!((v.row, v.col, v.rule), (1, 1, Rule::CrossMerge));
        assert!(v.message.contains("upper neighbor of X is F"));
    }

    #[test]
    fn validate_reports_every_violation() {
        // X at the origin breaks both the first-row and first-column rules,
        // and the missing N breaks placement.
        let r = validate_rows(&m(&["XF"]));
        let rules: Vec<_> = r.violations.iter().map(|v| v.rule).collect();
        assert_eq!(
            rules,
            vec![Rule::FirstRow, Rule::FirstColumn, Rule::NewlinePlacement]
        );
    }

    #[test]
    fn validate_rejects_bad_shapes() {
        assert!(!validate(&[], 2).valid);
        assert!(!validate(&[NewLine], 1).valid);
        assert!(!validate(&[Fill, NewLine, Fill], 2).valid);
        assert!(!validate_rows(&[vec![Fill, NewLine], vec![NewLine]]).valid);
    }

    #[test]
    fn neighbour_rules() {
        assert!(!validate_rows(&m(&["FFN", "FLN", "FUN"])).valid); // U under L
        assert!(validate_rows(&m(&["FLLN", "UXXN"])).valid);
        assert!(!validate_rows(&m(&["FFN", "ULN"])).valid); // L right of U
        assert!(validate_rows(&m(&["EN", "UN"])).valid);
    }

    #[test]
    fn serialize_examples() {
        let mat = OtslMatrix::from_rows(m(&["FLN", "FFN"])).unwrap();
        assert_eq!(mat.serialize(), "FLNFFN");
        assert_eq!(OtslMatrix::from_rows(m(&["FN"])).unwrap().serialize(), "FN");
        assert_eq!(OtslMatrix::from_rows(m(&["EN"])).unwrap().serialize(), "EN");
    }

    #[test]
    fn complexity_examples() {
        assert!(OtslMatrix::from_rows(m(&["FLN", "FFN"]))
            .unwrap()
            .is_complex());
        assert!(!OtslMatrix::from_rows(m(&["FFN", "FFN"]))
            .unwrap()
            .is_complex());
        assert!(OtslMatrix::from_rows(m(&["FN", "UN"]))
            .unwrap()
            .is_complex());
    }

    #[test]
    fn infer_shape_from_first_newline() {
        let mat = OtslMatrix::infer(&parse("FLNFFN").unwrap()).unwrap();
        assert_eq!((mat.rows(), mat.cols()), (2, 2));
        assert!(OtslMatrix::infer(&parse("FLNFF").unwrap()).is_err());
        assert!(OtslMatrix::infer(&parse("FF").unwrap()).is_err());
        assert!(OtslMatrix::infer(&parse("NN").unwrap()).is_err());
    }

    #[test]
    fn random_valid_examples() {
        for seed in 0..50 {
            let mat = random_valid(1, 1, seed, 0.0, 0.5).unwrap();
            let s = mat.serialize();
            assert!(s == "FN" || s == "EN", "{s}");
        }
        let mat = random_valid(3, 3, 7, 0.0, 0.3).unwrap();
        assert!(!mat.is_complex());
        assert_eq!(
            random_valid(3, 3, 7, 0.4, 0.3).unwrap(),
            random_valid(3, 3, 7, 0.4, 0.3).unwrap()
        );
        assert!(random_valid(0, 3, 7, 0.4, 0.3).is_err());
        assert!(random_valid(3, 3, 7, 1.5, 0.3).is_err());
    }

    #[test]
    fn random_valid_passes_validate() {
        for seed in 1..=1000 {
            let mat = random_valid(20, 20, seed, 0.3, 0.1).unwrap();
            assert!(mat.validate().valid, "seed {seed}: {mat}");
        }
    }

    #[test]
    fn random_valid_with_full_span_probability_still_tiles() {
        let mat = random_valid(6, 6, 3, 1.0, 0.0).unwrap();
        assert!(mat.validate().valid);
        assert!(mat.is_complex());
    }
}
