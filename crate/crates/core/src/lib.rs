//! Video temporal grounding through sliding-window frame grids.
//!
//! A video is sampled into a [`FrameSequence`], cut into overlapping or tiled
//! windows of `k = cols × rows` frames, and every window is laid out row-major
//! into one composite image at original resolution. Each grid is paired with a
//! single textual time anchor (`from Frame 0 to Frame 11.`) and the pairs are
//! interleaved into a prompt for a chat-style vision-language backend. Replies
//! of the form `From x to y` are parsed back into intervals and scored with
//! R@m and mIoU.
//!
//! ```text
//! frames ──► sample_uniform ──► plan_windows ──► compose_grid ──► manifest.jsonl
//!                                                     │
//!                         composite_timestamp ◄───────┘
//!                                  │
//!                     assemble_interleaved ──► Backend ──► parse_grounding_answer
//!                                                                   │
//!                                                 frames_to_seconds ─► evaluate
//! ```

pub mod client;
pub mod eval;
pub mod gridify;
pub mod ingest;
pub mod manifest;
pub mod prompt;
pub mod synthetic;

use serde::{Deserialize, Serialize};

pub use client::{Backend, BackendConfig, ClientError, HttpBackend, MockBackend, ModelReply};
pub use eval::{
    evaluate, frames_to_seconds, iou, parse_grounding_answer, EvalError, EvalReport,
    GroundingSample, TemporalInterval,
};
pub use gridify::{
    compose_all, compose_grid, estimate_tokens, extract_cell, frame_index_of_cell, frame_index_of_patch,
    plan_windows, GridConfig, GridError, GridImage, TokenBudget, TokenizerModel, WindowPlan,
};
pub use ingest::{load_frame_directory, sample_uniform, FrameSequence, IngestError, SampleTarget};
pub use manifest::GridRecord;
pub use prompt::{
    assemble_interleaved, composite_timestamp, emit_instruction_dataset, render_vtg_query,
    InstructionRecord, PromptElement, PromptError, PromptSequence,
};

/// Unit in which timestamps are advertised to the model and answers are read back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    #[default]
    Frames,
    Seconds,
}

impl std::fmt::Display for TimeUnit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TimeUnit::Frames => f.write_str("frames"),
            TimeUnit::Seconds => f.write_str("seconds"),
        }
    }
}

impl std::str::FromStr for TimeUnit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "frames" | "frame" => Ok(TimeUnit::Frames),
            "seconds" | "second" | "s" => Ok(TimeUnit::Seconds),
            other => Err(format!("unknown time unit `{other}` (expected frames|seconds)")),
        }
    }
}
