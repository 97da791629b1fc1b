//! OTSL table-structure toolkit.
//!
//! * [`otsl`]: the token language, parsing and validation
//! * [`align`]: repair of a predicted sequence onto a known grid
//! * [`convert`]: OTSL to and from HTML structure tags
//! * [`teds`]: structure-only tree edit distance similarity
//! * [`grid`]: row/column counts from detector output
//! * [`dataset`]: records, coverage statistics and batch evaluation

pub mod align;
pub mod convert;
pub mod dataset;
pub mod error;
pub mod grid;
pub mod otsl;
pub mod teds;

pub use align::{align, align_text, align_with, AlignOptions, RepairAction, RepairLog};
pub use convert::{filter_structure, html_to_otsl, otsl_to_html, HtmlTagSequence};
pub use error::{Error, Result};
pub use grid::{estimate_grid, grid_match_metrics, BBox, Detection, GridConfig};
pub use otsl::{parse, validate, OtslMatrix, OtslSequence, OtslToken};
pub use teds::{teds_s, tree_edit_distance, TableTree};
