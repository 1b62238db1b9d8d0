//! Answer parsing, interval conversion, IoU metrics and benchmark annotation loaders.

mod datasets;
mod metrics;
mod parse;

pub use datasets::{
    load_activitynet_captions, load_charades_sta, parse_activitynet_captions, parse_charades_sta,
    LoadedAnnotations,
};
pub use metrics::{evaluate, iou, EvalReport, SampleScore, DEFAULT_THRESHOLDS};
pub use parse::{parse_grounding_answer, parse_grounding_answer_as};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::FrameSequence;
use crate::TimeUnit;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no interval found in answer `{0}`")]
    ParseFailure(String),
    #[error("invalid interval: {0}")]
    InvalidInterval(String),
    #[error("sample map is empty")]
    InvalidSequence,
    #[error("cannot compare an interval in {0} with one in {1}")]
    UnitMismatch(TimeUnit, TimeUnit),
    #[error("sample id `{0}` appears more than once")]
    DuplicateSample(String),
    #[error("annotation schema error for `{video_id}`: {reason}")]
    SchemaError { video_id: String, reason: String },
    #[error("malformed annotation JSON: {0}")]
    Json(String),
    #[error("io error on {path}: {source}")]
    IoError {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A closed span `[start, end]` in frames or seconds. Endpoints are finite,
/// non-negative and ordered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalInterval {
    pub start: f64,
    pub end: f64,
    pub unit: TimeUnit,
}

impl TemporalInterval {
    /// Validates and normalizes; reversed endpoints are swapped.
    pub fn new(start: f64, end: f64, unit: TimeUnit) -> Result<Self, EvalError> {
        if !(start.is_finite() && end.is_finite()) || start < 0.0 || end < 0.0 {
            return Err(EvalError::InvalidInterval(format!(
                "[{start}, {end}] must be finite and non-negative"
            )));
        }
        let (start, end) = if start <= end { (start, end) } else { (end, start) };
        Ok(Self { start, end, unit })
    }

    pub fn seconds(start: f64, end: f64) -> Result<Self, EvalError> {
        Self::new(start, end, TimeUnit::Seconds)
    }

    pub fn frames(start: f64, end: f64) -> Result<Self, EvalError> {
        Self::new(start, end, TimeUnit::Frames)
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

/// One grounding query with its ground-truth span in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingSample {
    /// Unique per dataset: `<video_id>#<n>` where `n` counts queries of that video.
    pub id: String,
    pub video_id: String,
    pub query: String,
    pub gt: TemporalInterval,
    /// Video length when the annotation format carries it.
    pub duration: Option<f64>,
}

/// Converts a frame-index interval to seconds through a table of frame times:
/// the start takes the time of frame `⌊start⌋`, the end of frame `⌈end⌉`, both
/// clamped to the last frame.
pub fn frames_to_seconds_with(interval: &TemporalInterval, times: &[f64]) -> Result<TemporalInterval, EvalError> {
    if interval.unit != TimeUnit::Frames {
        return Err(EvalError::UnitMismatch(interval.unit, TimeUnit::Frames));
    }
    let last = times.len().checked_sub(1).ok_or(EvalError::InvalidSequence)?;
    let lookup = |v: f64| times[(v.min(last as f64)) as usize];
    TemporalInterval::seconds(lookup(interval.start.floor()), lookup(interval.end.ceil()))
}

pub fn frames_to_seconds(interval: &TemporalInterval, seq: &FrameSequence) -> Result<TemporalInterval, EvalError> {
    frames_to_seconds_with(interval, &seq.times())
}
