//! Argument definitions for the `otslkit` binary.

pub mod commands;
pub mod io;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use otslkit::align::DEFAULT_MAX_SEQ_LEN;
use otslkit::grid::{DEFAULT_ROW_NMS_IOU, DEFAULT_SCORE_THRESHOLD};

#[derive(Parser, Debug)]
#[command(name = "otslkit", version, about = "OTSL table-structure toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,
    /// Write output here instead of stdout
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
    /// Worker threads
    #[arg(long, env = "OTSLKIT_JOBS", global = true)]
    pub jobs: Option<usize>,
    /// Zero all timing fields
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Start-of-sequence character to ignore in OTSL input
    #[arg(long, global = true)]
    pub start_token: Option<char>,
    /// End-of-sequence character to ignore in OTSL input
    #[arg(long, global = true)]
    pub stop_token: Option<char>,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct GridArgs {
    /// Minimum detection score kept
    #[arg(long, default_value_t = DEFAULT_SCORE_THRESHOLD)]
    pub score_threshold: f64,
    /// IoU above which overlapping row boxes are suppressed
    #[arg(long, default_value_t = DEFAULT_ROW_NMS_IOU)]
    pub nms_iou: f64,
    /// Also suppress overlapping column boxes at this IoU
    #[arg(long)]
    pub col_nms_iou: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check OTSL lines against the grammar
    Validate {
        input: PathBuf,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        cols: Option<usize>,
    },
    /// Repair predicted OTSL lines onto a known grid
    Align {
        /// Lines of `OTSL` or `id<TAB>OTSL`
        input: PathBuf,
        #[arg(long, requires = "cols", conflicts_with = "grid_file")]
        rows: Option<usize>,
        #[arg(long, requires = "rows")]
        cols: Option<usize>,
        /// Per-id grids: JSONL {"id","rows","cols"} or `id R C` lines
        #[arg(long, required_unless_present = "rows")]
        grid_file: Option<PathBuf>,
        /// Trim raw sequences to this many tokens first (0 disables)
        #[arg(long, default_value_t = DEFAULT_MAX_SEQ_LEN)]
        max_len: usize,
        /// Write repair diagnostics as JSONL here
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Convert OTSL lines to HTML structure tags
    Otsl2html { input: PathBuf },
    /// Convert HTML tables (one per line) to OTSL
    Html2otsl { input: PathBuf },
    /// Score predicted structures against ground truth, line by line
    Teds { gt: PathBuf, pred: PathBuf },
    /// Count rows and columns from detector output
    Grid {
        /// Directory of per-image JSON files, or JSONL {"id","detections"}
        input: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Compare estimated grids with ground-truth grids
    Gridmetrics { pred: PathBuf, gt: PathBuf },
    /// Token coverage and simple/complex counts of a dataset
    Stats {
        dataset: PathBuf,
        #[arg(long, default_value = "gt_otsl")]
        field: String,
        #[arg(long, value_delimiter = ',')]
        group_by: Vec<String>,
    },
    /// Run the full pipeline over a dataset and report TEDS-S
    Eval {
        dataset: PathBuf,
        /// Directory of per-image JSON files, or JSONL {"id","detections"}
        #[arg(long)]
        detections: Option<PathBuf>,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = DEFAULT_MAX_SEQ_LEN)]
        max_len: usize,
        #[arg(long, value_delimiter = ',')]
        group_by: Vec<String>,
        /// Write per-record results as JSONL here
        #[arg(long)]
        records_out: Option<PathBuf>,
    },
}
