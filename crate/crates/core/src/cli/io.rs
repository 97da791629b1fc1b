use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;

/// `(rows, cols)`.
pub type Grid = (usize, usize);

/// Lines handed to the worker pool at a time.
const CHUNK: usize = 1024;

#[derive(Debug)]
pub enum CliError {
    /// Missing files, unreadable input, closed output.
    Io(String),
    /// Input that parses as nothing sensible.
    Content(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 2,
            CliError::Content(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) | CliError::Content(m) => f.write_str(m),
        }
    }
}

impl From<otslkit::Error> for CliError {
    fn from(e: otslkit::Error) -> Self {
        match e {
            otslkit::Error::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Content(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Content(e.to_string())
    }
}

pub fn open_input(path: &Path) -> Result<Box<dyn BufRead>, CliError> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(io::stdin().lock()));
    }
    let file = File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(Box::new(BufReader::new(file)))
}

pub fn create_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) => {
            let file =
                File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

/// Maps `f` over the lines of `reader` in parallel chunks and feeds the
/// results to `sink` in input order. Line numbers are 1-based.
pub fn map_lines<T, F, S>(reader: impl BufRead, f: F, mut sink: S) -> Result<(), CliError>
where
    T: Send,
    F: Fn(usize, &str) -> T + Sync,
    S: FnMut(usize, T) -> Result<(), CliError>,
{
    let mut lines = reader.lines().enumerate();
    let mut chunk: Vec<(usize, String)> = Vec::with_capacity(CHUNK);
    loop {
        chunk.clear();
        for (i, line) in lines.by_ref().take(CHUNK) {
            chunk.push((i + 1, line?));
        }
        if chunk.is_empty() {
            return Ok(());
        }
        let out: Vec<T> = chunk.par_iter().map(|(n, l)| f(*n, l)).collect();
        for ((n, _), t) in chunk.iter().zip(out) {
            sink(*n, t)?;
        }
    }
}

/// Splits `id<TAB>payload`; lines without a tab have no id.
pub fn split_id(line: &str) -> (Option<&str>, &str) {
    match line.split_once('\t') {
        Some((id, rest)) => (Some(id), rest),
        None => (None, line),
    }
}

#[derive(Deserialize)]
struct GridLine {
    id: String,
    rows: usize,
    cols: usize,
}

/// Reads grids as JSONL `{"id","rows","cols"}` or whitespace-separated
/// `id R C`, in file order.
pub fn read_grids(path: &Path) -> Result<Vec<(String, Grid)>, CliError> {
    let mut out = Vec::new();
    let mut seen = HashMap::new();
    for (i, line) in open_input(path)?.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let bad = |m: String| CliError::Content(format!("{}:{}: {m}", path.display(), i + 1));
        let (id, grid) = if text.starts_with('{') {
            let g: GridLine = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
            (g.id, (g.rows, g.cols))
        } else {
            let parts: Vec<&str> = text.split_whitespace().collect();
            let [id, r, c] = parts[..] else {
                return Err(bad("expected `id rows cols`".into()));
            };
            let num = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("{s:?}: {e}")));
            (id.to_string(), (num(r)?, num(c)?))
        };
        if seen.insert(id.clone(), i + 1).is_some() {
            return Err(bad(format!("duplicate id {id:?}")));
        }
        out.push((id, grid));
    }
    Ok(out)
}
