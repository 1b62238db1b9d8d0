//! Sliding-window gridification.
//!
//! Window `i` holds frames `i·s .. i·s+k−1` with `k = cols × rows`. The last
//! window is pulled back to `T−k` so the final frame is always covered, and a
//! video shorter than `k` yields one window padded with copies of its last
//! frame. Each window is composed row-major into one image without resampling.

mod compose;
mod config;
mod index;
mod plan;
mod tokens;

pub use compose::{compose_all, compose_grid, composite_size, extract_cell, extract_cell_from, GridImage};
pub use config::{parse_grid_config, GridConfig};
pub use index::{frame_index_of_cell, frame_index_of_patch};
pub use plan::{plan_windows, WindowPlan};
pub use tokens::{
    approx_text_tokens, estimate_tokens, estimate_tokens_from, visual_tokens, TokenBudget,
    TokenizerModel,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GridError {
    #[error("malformed grid spec `{spec}`: {reason}")]
    ParseError { spec: String, reason: String },
    #[error("stride {stride} is outside 1..={k}")]
    InvalidStride { stride: usize, k: usize },
    #[error("window plan does not fit the sequence: {0}")]
    PlanMismatch(String),
    #[error("cell ({r}, {c}) is outside a {rows}x{cols} grid")]
    CellOutOfRange { r: usize, c: usize, rows: usize, cols: usize },
    #[error("column {c} is not below the column count {cols}")]
    InvalidCell { c: usize, cols: usize },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid tokenizer model: {0}")]
    InvalidModel(String),
    #[error("cannot plan windows over an empty sequence")]
    EmptySequence,
}
