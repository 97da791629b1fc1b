//! Conversion between OTSL matrices and content-free HTML tag sequences.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::otsl::{validate, OtslMatrix, OtslToken};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TagName {
    Html,
    Table,
    Tbody,
    Tr,
    Td,
}

impl TagName {
    pub fn as_str(self) -> &'static str {
        match self {
            TagName::Html => "html",
            TagName::Table => "table",
            TagName::Tbody => "tbody",
            TagName::Tr => "tr",
            TagName::Td => "td",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "html" => TagName::Html,
            "table" => TagName::Table,
            "tbody" => TagName::Tbody,
            "tr" => TagName::Tr,
            "td" => TagName::Td,
            _ => return None,
        })
    }
}

impl fmt::Display for TagName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One structure tag. Span attributes only appear on opening `td` tags and
/// are stored only when greater than 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HtmlTag {
    pub name: TagName,
    pub closing: bool,
    pub colspan: Option<u32>,
    pub rowspan: Option<u32>,
}

impl HtmlTag {
    pub fn open(name: TagName) -> Self {
        Self {
            name,
            closing: false,
            colspan: None,
            rowspan: None,
        }
    }

    pub fn close(name: TagName) -> Self {
        Self {
            closing: true,
            ..Self::open(name)
        }
    }

    pub fn cell(cell: HtmlCell) -> Self {
        Self {
            colspan: (cell.colspan > 1).then_some(cell.colspan),
            rowspan: (cell.rowspan > 1).then_some(cell.rowspan),
            ..Self::open(TagName::Td)
        }
    }
}

impl fmt::Display for HtmlTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.closing {
            return write!(f, "</{}>", self.name);
        }
        write!(f, "<{}", self.name)?;
        if let Some(r) = self.rowspan {
            write!(f, " rowspan={r}")?;
        }
        if let Some(c) = self.colspan {
            write!(f, " colspan={c}")?;
        }
        f.write_str(">")
    }
}

/// A `td` reduced to its spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct HtmlCell {
    pub rowspan: u32,
    pub colspan: u32,
}

impl HtmlCell {
    pub const PLAIN: HtmlCell = HtmlCell {
        rowspan: 1,
        colspan: 1,
    };

    pub fn is_spanning(&self) -> bool {
        self.rowspan > 1 || self.colspan > 1
    }
}

impl Default for HtmlCell {
    fn default() -> Self {
        Self::PLAIN
    }
}

/// An ordered list of structure tags. Display renders the exact byte form
/// (`<html><table><tbody><tr><td colspan=2></td></tr>...`).
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct HtmlTagSequence {
    pub tags: Vec<HtmlTag>,
}

impl HtmlTagSequence {
    /// Canonical `html > table > tbody > tr* > td*` sequence for the given rows.
    pub fn from_rows(rows: &[Vec<HtmlCell>]) -> Self {
        let cells: usize = rows.iter().map(Vec::len).sum();
        let mut tags = Vec::with_capacity(8 + 2 * rows.len() + 2 * cells);
        tags.extend([
            HtmlTag::open(TagName::Html),
            HtmlTag::open(TagName::Table),
            HtmlTag::open(TagName::Tbody),
        ]);
        for row in rows {
            tags.push(HtmlTag::open(TagName::Tr));
            for &cell in row {
                tags.push(HtmlTag::cell(cell));
                tags.push(HtmlTag::close(TagName::Td));
            }
            tags.push(HtmlTag::close(TagName::Tr));
        }
        tags.extend([
            HtmlTag::close(TagName::Tbody),
            HtmlTag::close(TagName::Table),
            HtmlTag::close(TagName::Html),
        ]);
        Self { tags }
    }

    /// Parses the structure grammar. Span values may be quoted or unquoted;
    /// text between tags is ignored. Nesting is checked by [`Self::rows`].
    pub fn parse(text: &str) -> Result<Self> {
        let mut tags = Vec::new();
        for raw in lex(text)? {
            let name = TagName::from_name(&raw.name)
                .ok_or_else(|| Error::MalformedHtml(format!("unexpected tag <{}>", raw.name)))?;
            let mut tag = if raw.closing {
                HtmlTag::close(name)
            } else {
                HtmlTag::open(name)
            };
            if !raw.closing {
                let cell = raw.spans()?;
                if cell.is_spanning() && name != TagName::Td {
                    return Err(Error::MalformedHtml(format!("span attribute on <{name}>")));
                }
                tag.colspan = (cell.colspan > 1).then_some(cell.colspan);
                tag.rowspan = (cell.rowspan > 1).then_some(cell.rowspan);
            }
            tags.push(tag);
            if raw.self_closing {
                tags.push(HtmlTag::close(name));
            }
        }
        Ok(Self { tags })
    }

    /// Checks the sequence against the structure grammar and returns its
    /// rows of cells.
    pub fn rows(&self) -> Result<Vec<Vec<HtmlCell>>> {
        let mut it = self.tags.iter().peekable();
        {
            let mut expect = |name: TagName, closing: bool| -> Result<()> {
                match it.next() {
                    Some(t) if t.name == name && t.closing == closing => Ok(()),
                    Some(t) => Err(Error::MalformedHtml(format!(
                        "expected {}, found {t}",
                        HtmlTag {
                            closing,
                            ..HtmlTag::open(name)
                        }
                    ))),
                    None => Err(Error::MalformedHtml(format!(
                        "expected <{}{name}>, found end of input",
                        if closing { "/" } else { "" }
                    ))),
                }
            };
            expect(TagName::Html, false)?;
            expect(TagName::Table, false)?;
            expect(TagName::Tbody, false)?;
        }

        let mut rows = Vec::new();
        let malformed = |what: String| Error::MalformedHtml(what);
        loop {
            match it.next() {
                Some(t) if t.name == TagName::Tr && !t.closing => {
                    let mut row = Vec::new();
                    loop {
                        match it.next() {
                            Some(t) if t.name == TagName::Td && !t.closing => {
                                match it.next() {
                                    Some(c) if c.name == TagName::Td && c.closing => {}
                                    other => {
                                        return Err(malformed(format!(
                                            "unclosed <td>, found {}",
                                            describe(other)
                                        )))
                                    }
                                }
                                row.push(HtmlCell {
                                    rowspan: t.rowspan.unwrap_or(1),
                                    colspan: t.colspan.unwrap_or(1),
                                });
                            }
                            Some(t) if t.name == TagName::Tr && t.closing => break,
                            other => {
                                return Err(malformed(format!(
                                    "expected <td> or </tr>, found {}",
                                    describe(other)
                                )))
                            }
                        }
                    }
                    rows.push(row);
                }
                Some(t) if t.name == TagName::Tbody && t.closing => break,
                other => {
                    return Err(malformed(format!(
                        "expected <tr> or </tbody>, found {}",
                        describe(other)
                    )))
                }
            }
        }
        for name in [TagName::Table, TagName::Html] {
            match it.next() {
                Some(t) if t.name == name && t.closing => {}
                other => {
                    return Err(malformed(format!(
                        "expected </{name}>, found {}",
                        describe(other)
                    )))
                }
            }
        }
        if let Some(extra) = it.next() {
            return Err(malformed(format!("trailing tag {extra}")));
        }
        Ok(rows)
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

fn describe(tag: Option<&HtmlTag>) -> String {
    tag.map_or_else(|| "end of input".to_string(), |t| t.to_string())
}

impl fmt::Display for HtmlTagSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.tags.iter().try_for_each(|tag| write!(f, "{tag}"))
    }
}

impl std::str::FromStr for HtmlTagSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// Extra span of a cell origin: contiguous `L` to its right and contiguous
/// `U` below it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CellSpan {
    pub hspan_extra: usize,
    pub vspan_extra: usize,
}

impl CellSpan {
    pub fn colspan(&self) -> usize {
        self.hspan_extra + 1
    }

    pub fn rowspan(&self) -> usize {
        self.vspan_extra + 1
    }
}

/// Spans of the entry at (`row`, `col`). Entries other than `F` and `E`
/// report no span.
pub fn get_cell_spans(m: &OtslMatrix, row: usize, col: usize) -> Result<CellSpan> {
    let entry = m.get(row, col).ok_or(Error::IndexOutOfBounds {
        row,
        col,
        rows: m.rows(),
        width: m.width(),
    })?;
    if !entry.is_cell_origin() {
        return Ok(CellSpan::default());
    }
    let hspan_extra = m.row(row)[col + 1..]
        .iter()
        .take_while(|&&t| t == OtslToken::Left)
        .count();
    let vspan_extra = (row + 1..m.rows())
        .take_while(|&r| m.row(r)[col] == OtslToken::Up)
        .count();
    Ok(CellSpan {
        hspan_extra,
        vspan_extra,
    })
}

/// Emits the HTML structure of a valid matrix: the shell, then per row a
/// `<tr>`, one `td` per `F`/`E` entry (with its spans), nothing for merge
/// entries, and `</tr>` at each `N`.
pub fn otsl_to_html(m: &OtslMatrix) -> HtmlTagSequence {
    let mut tags = Vec::with_capacity(6 + m.cells().len() * 2);
    tags.extend([
        HtmlTag::open(TagName::Html),
        HtmlTag::open(TagName::Table),
        HtmlTag::open(TagName::Tbody),
    ]);
    for i in 0..m.rows() {
        tags.push(HtmlTag::open(TagName::Tr));
        for (j, &entry) in m.row(i).iter().enumerate() {
            if entry.is_cell_origin() {
                let span = get_cell_spans(m, i, j).expect("index within the matrix");
                tags.push(HtmlTag {
                    colspan: (span.hspan_extra != 0).then(|| span.colspan() as u32),
                    rowspan: (span.vspan_extra != 0).then(|| span.rowspan() as u32),
                    ..HtmlTag::open(TagName::Td)
                });
                tags.push(HtmlTag::close(TagName::Td));
            } else if entry == OtslToken::NewLine {
                tags.push(HtmlTag::close(TagName::Tr));
            }
        }
    }
    tags.extend([
        HtmlTag::close(TagName::Tbody),
        HtmlTag::close(TagName::Table),
        HtmlTag::close(TagName::Html),
    ]);
    HtmlTagSequence { tags }
}

/// Like [`otsl_to_html`] for an unchecked row-major grid of `width` columns.
pub fn grid_to_html(cells: &[OtslToken], width: usize) -> Result<HtmlTagSequence> {
    let report = validate(cells, width);
    if let Some(v) = report.violations.into_iter().next() {
        return Err(Error::InvalidStructure(v));
    }
    let m = OtslMatrix::new(cells.len() / width, width - 1, cells.to_vec())?;
    Ok(otsl_to_html(&m))
}

/// Rebuilds the matrix from a structure sequence. Each `td` claims the first
/// free slot of its row and covers `rowspan x colspan` slots; every cell is
/// reconstructed as `F` since empty and filled cells look identical here.
pub fn html_to_otsl(tags: &HtmlTagSequence) -> Result<OtslMatrix> {
    rows_to_otsl(&tags.rows()?)
}

pub fn rows_to_otsl(rows: &[Vec<HtmlCell>]) -> Result<OtslMatrix> {
    let geometry = |msg: String| Error::InconsistentGeometry(msg);
    let n_rows = rows.len();
    if n_rows == 0 {
        return Err(geometry("table has no rows".into()));
    }
    let mut grid: Vec<Vec<Option<OtslToken>>> = vec![Vec::new(); n_rows];
    for (i, row) in rows.iter().enumerate() {
        let mut cursor = 0;
        for cell in row {
            while grid[i].get(cursor).is_some_and(Option::is_some) {
                cursor += 1;
            }
            let (h, w) = (cell.rowspan as usize, cell.colspan as usize);
            if h == 0 || w == 0 {
                return Err(geometry(format!("zero span in row {i}")));
            }
            if i + h > n_rows {
                return Err(geometry(format!(
                    "rowspan {h} at row {i} exceeds the table's {n_rows} rows"
                )));
            }
            for dr in 0..h {
                let target = &mut grid[i + dr];
                if target.len() < cursor + w {
                    target.resize(cursor + w, None);
                }
                for dc in 0..w {
                    let slot = &mut target[cursor + dc];
                    if slot.is_some() {
                        return Err(geometry(format!(
                            "overlapping spans at ({}, {})",
                            i + dr,
                            cursor + dc
                        )));
                    }
                    *slot = Some(match (dr, dc) {
                        (0, 0) => OtslToken::Fill,
                        (0, _) => OtslToken::Left,
                        (_, 0) => OtslToken::Up,
                        _ => OtslToken::Cross,
                    });
                }
            }
            cursor += w;
        }
    }
    let n_cols = grid.iter().map(Vec::len).max().unwrap_or(0);
    if n_cols == 0 {
        return Err(geometry("table has no columns".into()));
    }
    let mut cells = Vec::with_capacity(n_rows * (n_cols + 1));
    for (i, row) in grid.into_iter().enumerate() {
        let covered = row.iter().filter(|s| s.is_some()).count();
        if covered != n_cols {
            return Err(geometry(format!(
                "row {i} covers {covered} of {n_cols} columns"
            )));
        }
        cells.extend(row.into_iter().flatten());
        cells.push(OtslToken::NewLine);
    }
    OtslMatrix::new(n_rows, n_cols, cells).map_err(|e| geometry(e.to_string()))
}

/// Reduces an HTML table (possibly with content) to its structure: text and
/// non-table tags are dropped, `th` becomes `td`, header and body sections
/// collapse into a single `tbody`, and only span attributes are kept.
pub fn filter_structure(html: &str) -> Result<HtmlTagSequence> {
    Ok(HtmlTagSequence::from_rows(&structure_rows(html)?))
}

/// Rows of cells extracted by the same rules as [`filter_structure`].
pub fn structure_rows(html: &str) -> Result<Vec<Vec<HtmlCell>>> {
    const KEPT: [&str; 7] = ["html", "table", "thead", "tbody", "tr", "td", "th"];
    let mut stack: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<HtmlCell>> = Vec::new();
    let mut in_row = false;
    let mut tables = 0usize;

    for raw in lex(html)? {
        if !KEPT.contains(&raw.name.as_str()) {
            continue;
        }
        let name = raw.name.as_str();
        if raw.closing {
            match stack.pop() {
                Some(open) if open == name => {}
                Some(open) => {
                    return Err(Error::MalformedHtml(format!("</{name}> closes <{open}>")))
                }
                None => return Err(Error::MalformedHtml(format!("stray </{name}>"))),
            }
            match name {
                "tr" => in_row = false,
                "table" => tables -= 1,
                _ => {}
            }
            continue;
        }
        match name {
            "table" => {
                if tables > 0 {
                    return Err(Error::MalformedHtml("nested <table>".into()));
                }
                tables += 1;
            }
            "tr" => {
                if in_row {
                    return Err(Error::MalformedHtml("nested <tr>".into()));
                }
                in_row = true;
                rows.push(Vec::new());
            }
            "td" | "th" => {
                if !in_row || stack.last().is_some_and(|t| t == "td" || t == "th") {
                    return Err(Error::MalformedHtml(format!("<{name}> outside a row")));
                }
                rows.last_mut().expect("inside a row").push(raw.spans()?);
            }
            _ => {}
        }
        if raw.self_closing {
            if name == "tr" {
                in_row = false;
            } else if name == "table" {
                tables -= 1;
            }
        } else {
            stack.push(raw.name);
        }
    }
    if let Some(open) = stack.pop() {
        return Err(Error::MalformedHtml(format!("unclosed <{open}>")));
    }
    Ok(rows)
}

#[derive(Debug)]
struct RawTag {
    name: String,
    closing: bool,
    self_closing: bool,
    attrs: Vec<(String, String)>,
}

impl RawTag {
    fn attr(&self, key: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn spans(&self) -> Result<HtmlCell> {
        let span = |key: &str| -> Result<u32> {
            match self.attr(key) {
                None => Ok(1),
                Some(v) => match v.trim().parse::<u32>() {
                    Ok(n) if n >= 1 => Ok(n),
                    _ => Err(Error::MalformedHtml(format!("bad {key} value {v:?}"))),
                },
            }
        };
        Ok(HtmlCell {
            rowspan: span("rowspan")?,
            colspan: span("colspan")?,
        })
    }
}

/// Minimal tag scanner: yields element tags with lowercased names and
/// attributes, skipping text, comments, doctypes and processing instructions.
fn lex(html: &str) -> Result<Vec<RawTag>> {
    let bytes = html.as_bytes();
    let mut tags = Vec::new();
    let mut i = 0;
    while let Some(off) = html[i..].find('<') {
        i += off;
        let rest = &html[i..];
        if rest.starts_with("<!--") {
            let end = rest
                .find("-->")
                .ok_or_else(|| Error::MalformedHtml("unterminated comment".into()))?;
            i += end + 3;
            continue;
        }
        if rest.starts_with("<!") || rest.starts_with("<?") {
            let end = rest
                .find('>')
                .ok_or_else(|| Error::MalformedHtml("unterminated declaration".into()))?;
            i += end + 1;
            continue;
        }
        let mut j = i + 1;
        let closing = bytes.get(j) == Some(&b'/');
        if closing {
            j += 1;
        }
        if !bytes.get(j).is_some_and(u8::is_ascii_alphabetic) {
            // A bare '<' in text.
            i += 1;
            continue;
        }
        let name_start = j;
        while bytes
            .get(j)
            .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'-' || *b == b':')
        {
            j += 1;
        }
        let name = html[name_start..j].to_ascii_lowercase();
        let mut attrs = Vec::new();
        let mut self_closing = false;
        loop {
            while bytes.get(j).is_some_and(u8::is_ascii_whitespace) {
                j += 1;
            }
            match bytes.get(j) {
                None => return Err(Error::MalformedHtml(format!("unterminated tag <{name}"))),
                Some(b'>') => {
                    j += 1;
                    break;
                }
                Some(b'/') => {
                    if bytes.get(j + 1) == Some(&b'>') {
                        self_closing = true;
                        j += 2;
                        break;
                    }
                    j += 1;
                    continue;
                }
                _ => {}
            }
            let key_start = j;
            while bytes
                .get(j)
                .is_some_and(|b| !b.is_ascii_whitespace() && !matches!(b, b'=' | b'>' | b'/'))
            {
                j += 1;
            }
            let key = html[key_start..j].to_ascii_lowercase();
            while bytes.get(j).is_some_and(u8::is_ascii_whitespace) {
                j += 1;
            }
            let mut value = String::new();
            if bytes.get(j) == Some(&b'=') {
                j += 1;
                while bytes.get(j).is_some_and(u8::is_ascii_whitespace) {
                    j += 1;
                }
                match bytes.get(j) {
                    Some(&q @ (b'"' | b'\'')) => {
                        let close = html[j + 1..].find(q as char).ok_or_else(|| {
                            Error::MalformedHtml(format!("unterminated attribute in <{name}>"))
                        })?;
                        value = html[j + 1..j + 1 + close].to_string();
                        j += close + 2;
                    }
                    _ => {
                        let v_start = j;
                        while bytes
                            .get(j)
                            .is_some_and(|b| !b.is_ascii_whitespace() && *b != b'>')
                        {
                            j += 1;
                        }
                        value = html[v_start..j].to_string();
                    }
                }
            }
            if !key.is_empty() {
                attrs.push((key, value));
            }
        }
        tags.push(RawTag {
            name,
            closing,
            self_closing,
            attrs,
        });
        i = j;
    }
    Ok(tags)
}
