//! On-disk records for composed grids and per-video sample maps, both JSON lines.
//!
//! Image paths in a manifest are relative to the manifest's directory so a
//! grid tree can be moved or compared byte-for-byte across machines.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridify::{GridConfig, GridImage};
use crate::ingest::FrameSequence;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const SAMPLE_MAP_FILE: &str = "samples.jsonl";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One composed grid as listed in `manifest.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub video_id: String,
    pub window_index: usize,
    pub start_frame: usize,
    pub end_frame: usize,
    pub start_time_s: f64,
    pub end_time_s: f64,
    pub pad_count: usize,
    pub image_path: PathBuf,
    pub cols: usize,
    pub rows: usize,
    #[serde(default)]
    pub gutter_px: u32,
}

impl GridRecord {
    pub fn from_grid(grid: &GridImage, image_path: impl Into<PathBuf>) -> Self {
        let cfg = grid.config();
        Self {
            video_id: grid.video_id().to_string(),
            window_index: grid.plan().window_index,
            start_frame: grid.start_frame(),
            end_frame: grid.end_frame(),
            start_time_s: grid.start_time(),
            end_time_s: grid.end_time(),
            pad_count: grid.plan().pad_count,
            image_path: image_path.into(),
            cols: cfg.cols(),
            rows: cfg.rows(),
            gutter_px: cfg.gutter_px(),
        }
    }

    /// Grid layout of this record. The stride is not recorded, so `k` stands in for it.
    pub fn layout(&self) -> Option<GridConfig> {
        let k = self.cols.checked_mul(self.rows)?;
        GridConfig::new(self.cols, self.rows, k)
            .ok()
            .map(|c| c.with_gutter(self.gutter_px))
    }

    /// Global frame index held by window slot `slot` (padded slots repeat `end_frame`).
    pub fn frame_at_slot(&self, slot: usize) -> usize {
        (self.start_frame + slot).min(self.end_frame)
    }

    /// Copy with `image_path` joined onto `base`.
    pub fn located(&self, base: &Path) -> Self {
        Self {
            image_path: base.join(&self.image_path),
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<(), String> {
        if self.cols == 0 || self.rows == 0 {
            return Err("cols and rows must be at least 1".into());
        }
        if self.end_frame < self.start_frame {
            return Err("end_frame precedes start_frame".into());
        }
        let k = self
            .cols
            .checked_mul(self.rows)
            .ok_or_else(|| "grid too large".to_string())?;
        if self.pad_count >= k {
            return Err("pad_count leaves no real frame".into());
        }
        if !(self.start_time_s.is_finite() && self.end_time_s.is_finite())
            || self.start_time_s > self.end_time_s
        {
            return Err("times must be finite and ordered".into());
        }
        Ok(())
    }
}

/// Relative path of a window's image inside a grid tree.
pub fn grid_image_rel_path(video_id: &str, window_index: usize) -> PathBuf {
    Path::new(video_id).join(format!("w{window_index:04}.png"))
}

/// Frame times of one sampled video, so answers in frames can be mapped to seconds later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMap {
    pub video_id: String,
    pub sample_fps: f64,
    pub duration_s: f64,
    pub times: Vec<f64>,
}

impl SampleMap {
    pub fn from_sequence(seq: &FrameSequence) -> Self {
        Self {
            video_id: seq.video_id().to_string(),
            sample_fps: seq.sample_fps(),
            duration_s: seq.duration(),
            times: seq.times(),
        }
    }
}

fn parse_lines<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, ManifestError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ManifestError::Malformed {
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Parses manifest text; every record is validated.
pub fn parse_manifest(text: &str) -> Result<Vec<GridRecord>, ManifestError> {
    let records: Vec<GridRecord> = parse_lines(text)?;
    for (i, r) in records.iter().enumerate() {
        r.validate().map_err(|reason| ManifestError::Malformed { line: i + 1, reason })?;
    }
    Ok(records)
}

pub fn parse_sample_maps(text: &str) -> Result<Vec<SampleMap>, ManifestError> {
    let maps: Vec<SampleMap> = parse_lines(text)?;
    for (i, m) in maps.iter().enumerate() {
        let ordered = m.times.windows(2).all(|w| w[0] < w[1]);
        if m.times.is_empty() || !ordered || m.times.iter().any(|t| !t.is_finite()) {
            return Err(ManifestError::Malformed {
                line: i + 1,
                reason: "times must be non-empty, finite and strictly increasing".into(),
            });
        }
    }
    Ok(maps)
}

fn read(path: &Path) -> Result<String, ManifestError> {
    fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_manifest(path: &Path) -> Result<Vec<GridRecord>, ManifestError> {
    parse_manifest(&read(path)?)
}

/// Reads a manifest and resolves every image path against the manifest's directory.
pub fn read_manifest_located(path: &Path) -> Result<Vec<GridRecord>, ManifestError> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    Ok(read_manifest(path)?.iter().map(|r| r.located(base)).collect())
}

pub fn read_sample_maps(path: &Path) -> Result<Vec<SampleMap>, ManifestError> {
    parse_sample_maps(&read(path)?)
}

/// Writes one JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), ManifestError> {
    let io = |source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("records serialize");
        out.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(io)?;
    file.write_all(&out).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> GridRecord {
        GridRecord {
            video_id: "AO8RW".into(),
            window_index: 1,
            start_frame: 7,
            end_frame: 18,
            start_time_s: 7.0,
            end_time_s: 18.0,
            pad_count: 0,
            image_path: grid_image_rel_path("AO8RW", 1),
            cols: 4,
            rows: 3,
            gutter_px: 0,
        }
    }

    #[test]
    fn json_field_names() {
        let v: serde_json::Value = serde_json::to_value(record()).unwrap();
        for key in ["video_id", "window_index", "start_frame", "end_frame", "start_time_s",
                    "end_time_s", "pad_count", "image_path", "cols", "rows"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["image_path"], "AO8RW/w0001.png");
    }

    #[test]
    fn round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        write_jsonl(&path, &[record(), record()]).unwrap();
        let back = read_manifest(&path).unwrap();
        assert_eq!(back, vec![record(), record()]);
        let located = read_manifest_located(&path).unwrap();
        assert_eq!(located[0].image_path, dir.path().join("AO8RW/w0001.png"));
    }

    #[test]
    fn gutter_defaults_to_zero() {
        let line = r#"{"video_id":"v","window_index":0,"start_frame":0,"end_frame":4,"start_time_s":0,"end_time_s":4,"pad_count":7,"image_path":"v/w0000.png","cols":4,"rows":3}"#;
        let recs = parse_manifest(line).unwrap();
        assert_eq!(recs[0].gutter_px, 0);
        assert_eq!(recs[0].frame_at_slot(2), 2);
        assert_eq!(recs[0].frame_at_slot(9), 4);
    }

    #[test]
    fn invalid_records_rejected() {
        let mut r = record();
        r.end_frame = 3;
        let text = serde_json::to_string(&r).unwrap();
        assert!(matches!(parse_manifest(&text), Err(ManifestError::Malformed { line: 1, .. })));
        assert!(parse_manifest("{not json").is_err());
        assert!(parse_manifest("\n\n").unwrap().is_empty());
        assert!(parse_sample_maps(r#"{"video_id":"v","sample_fps":1,"duration_s":2,"times":[1,0]}"#).is_err());
    }
}
