//! Frame ingestion: frame directories, sidecar metadata, uniform resampling and
//! the external decoder contract.
//!
//! A frame directory is laid out as `<video_id>/%06d.<ext>` with an optional
//! `meta.json` sidecar carrying `{duration_s, fps}`. Container demuxing is never
//! done in process; [`decode_to_frame_directory`] shells out to a decoder that
//! writes this layout.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Name of the optional sidecar next to the frame images.
pub const META_FILE: &str = "meta.json";

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("no frames found in {0}")]
    NoFrames(PathBuf),
    #[error("frame {index} is {found:?}, expected {expected:?}")]
    ResolutionMismatch {
        index: usize,
        expected: (u32, u32),
        found: (u32, u32),
    },
    #[error("failed to decode {path}: {reason}")]
    DecodeError { path: PathBuf, reason: String },
    #[error("invalid sampling target: {0}")]
    InvalidTarget(String),
    #[error("two frame files map to frame number {0}")]
    DuplicateFrame(u64),
    #[error("source times must be finite and strictly increasing (frame {0})")]
    NonMonotoneTime(usize),
    #[error("invalid frame metadata: {0}")]
    InvalidMeta(String),
    #[error("invalid source video `{id}`: {reason}")]
    InvalidSource { id: String, reason: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Sidecar metadata stored as `meta.json` in a frame directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
}

impl FrameMeta {
    /// Parses and validates sidecar JSON. Non-positive or non-finite values are rejected.
    pub fn from_json(text: &str) -> Result<Self, IngestError> {
        let meta: FrameMeta =
            serde_json::from_str(text).map_err(|e| IngestError::InvalidMeta(e.to_string()))?;
        if let Some(fps) = meta.fps {
            if !(fps.is_finite() && fps > 0.0) {
                return Err(IngestError::InvalidMeta(format!("fps must be > 0, got {fps}")));
            }
        }
        if let Some(d) = meta.duration_s {
            if !(d.is_finite() && d > 0.0) {
                return Err(IngestError::InvalidMeta(format!(
                    "duration_s must be > 0, got {d}"
                )));
            }
        }
        Ok(meta)
    }
}

/// A video known by id, duration and native rate, whose frames live at `frame_locator`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceVideo {
    pub id: String,
    pub duration_s: f64,
    pub native_fps: f64,
    pub frame_locator: PathBuf,
}

impl SourceVideo {
    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |reason: &str| IngestError::InvalidSource {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(bad("duration must be > 0"));
        }
        if !(self.native_fps.is_finite() && self.native_fps > 0.0) {
            return Err(bad("native fps must be > 0"));
        }
        Ok(())
    }

    pub fn open(&self) -> Result<FrameSequence, IngestError> {
        self.validate()?;
        let mut seq = load_frame_directory(&self.frame_locator, Some(self.native_fps))?;
        seq.video_id = self.id.clone();
        seq.duration_s = Some(self.duration_s);
        Ok(seq)
    }
}

/// One sampled frame. Pixel data is shared so resampling never copies images.
#[derive(Debug, Clone)]
pub struct Frame {
    pub index: usize,
    pub source_time: f64,
    pub image: Arc<RgbImage>,
}

/// Ordered, uniformly sized, strictly time-increasing frames of one video.
#[derive(Debug, Clone)]
pub struct FrameSequence {
    video_id: String,
    frames: Vec<Frame>,
    sample_fps: f64,
    width: u32,
    height: u32,
    duration_s: Option<f64>,
}

impl FrameSequence {
    /// Builds a sequence, re-numbering frames `0..T` and checking every invariant.
    pub fn new(
        video_id: impl Into<String>,
        frames: Vec<(f64, Arc<RgbImage>)>,
        sample_fps: f64,
    ) -> Result<Self, IngestError> {
        let video_id = video_id.into();
        if frames.is_empty() {
            return Err(IngestError::NoFrames(PathBuf::from(&video_id)));
        }
        if !(sample_fps.is_finite() && sample_fps > 0.0) {
            return Err(IngestError::InvalidTarget(format!(
                "sample fps must be > 0, got {sample_fps}"
            )));
        }
        let (width, height) = frames[0].1.dimensions();
        let mut prev = f64::NEG_INFINITY;
        for (i, (t, img)) in frames.iter().enumerate() {
            if img.dimensions() != (width, height) {
                return Err(IngestError::ResolutionMismatch {
                    index: i,
                    expected: (width, height),
                    found: img.dimensions(),
                });
            }
            if !t.is_finite() || *t <= prev {
                return Err(IngestError::NonMonotoneTime(i));
            }
            prev = *t;
        }
        let frames = frames
            .into_iter()
            .enumerate()
            .map(|(index, (source_time, image))| Frame {
                index,
                source_time,
                image,
            })
            .collect();
        Ok(Self {
            video_id,
            frames,
            sample_fps,
            width,
            height,
            duration_s: None,
        })
    }

    /// Builds a sequence at a constant rate: frame `i` sits at `i / fps` seconds.
    pub fn from_images(
        video_id: impl Into<String>,
        images: Vec<RgbImage>,
        fps: f64,
    ) -> Result<Self, IngestError> {
        let frames = images
            .into_iter()
            .enumerate()
            .map(|(i, img)| (i as f64 / fps, Arc::new(img)))
            .collect();
        Self::new(video_id, frames, fps)
    }

    pub fn with_duration(mut self, duration_s: f64) -> Self {
        self.duration_s = Some(duration_s);
        self
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame(&self, index: usize) -> Option<&Frame> {
        self.frames.get(index)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    /// Always false; kept for the `len`/`is_empty` pairing.
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn sample_fps(&self) -> f64 {
        self.sample_fps
    }

    pub fn resolution(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    /// Source time of every frame, in order. This is the sample map used to
    /// move between frame indices and seconds.
    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.source_time).collect()
    }

    /// Declared duration if known, otherwise one frame period past the last frame.
    pub fn duration(&self) -> f64 {
        self.duration_s.unwrap_or_else(|| {
            self.frames.last().map(|f| f.source_time).unwrap_or(0.0) + 1.0 / self.sample_fps
        })
    }
}

/// Parses a frame filename like `000012.png` into its frame number.
fn frame_number(path: &Path) -> Option<u64> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    if !IMAGE_EXTENSIONS.contains(&ext.as_str()) {
        return None;
    }
    let stem = path.file_stem()?.to_str()?;
    if stem.is_empty() || !stem.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    stem.parse().ok()
}

/// Lists the frame files of a directory in numeric order.
pub fn list_frame_files(dir: &Path) -> Result<Vec<PathBuf>, IngestError> {
    let mut numbered = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if !path.is_file() {
            continue;
        }
        if let Some(n) = frame_number(&path) {
            numbered.push((n, path));
        }
    }
    numbered.sort();
    if let Some(w) = numbered.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(IngestError::DuplicateFrame(w[0].0));
    }
    Ok(numbered.into_iter().map(|(_, p)| p).collect())
}

pub fn read_frame_meta(dir: &Path) -> Result<Option<FrameMeta>, IngestError> {
    let path = dir.join(META_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    FrameMeta::from_json(&text).map(Some)
}

pub fn decode_frame(path: &Path) -> Result<RgbImage, IngestError> {
    image::open(path)
        .map(|img| img.to_rgb8())
        .map_err(|e| IngestError::DecodeError {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
}

/// Loads every numbered frame of `dir`. The video id is the directory name.
///
/// Frame `i` (position in numeric order) gets `source_time = i / fps`, where the
/// rate comes from the sidecar, then `fps_hint`, then 1.0.
pub fn load_frame_directory(dir: &Path, fps_hint: Option<f64>) -> Result<FrameSequence, IngestError> {
    if let Some(h) = fps_hint {
        if !(h.is_finite() && h > 0.0) {
            return Err(IngestError::InvalidTarget(format!("fps hint must be > 0, got {h}")));
        }
    }
    let meta = read_frame_meta(dir)?.unwrap_or_default();
    let fps = meta.fps.or(fps_hint).unwrap_or(1.0);
    let files = list_frame_files(dir)?;
    if files.is_empty() {
        return Err(IngestError::NoFrames(dir.to_path_buf()));
    }
    let mut frames = Vec::with_capacity(files.len());
    let mut expected = None;
    for (i, path) in files.iter().enumerate() {
        let img = decode_frame(path)?;
        match expected {
            None => expected = Some(img.dimensions()),
            Some(dims) if dims != img.dimensions() => {
                return Err(IngestError::ResolutionMismatch {
                    index: i,
                    expected: dims,
                    found: img.dimensions(),
                })
            }
            Some(_) => {}
        }
        frames.push((i as f64 / fps, Arc::new(img)));
    }
    let video_id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut seq = FrameSequence::new(video_id, frames, fps)?;
    seq.duration_s = meta.duration_s;
    Ok(seq)
}

/// Writes a sequence as a lossless frame directory (`%06d.png` plus `meta.json`).
pub fn write_frame_directory(seq: &FrameSequence, dir: &Path) -> Result<(), IngestError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for frame in seq.frames() {
        let path = dir.join(format!("{:06}.png", frame.index));
        frame
            .image
            .save(&path)
            .map_err(|e| IngestError::DecodeError {
                path: path.clone(),
                reason: e.to_string(),
            })?;
    }
    let meta = FrameMeta {
        duration_s: seq.duration_s,
        fps: Some(seq.sample_fps),
    };
    let path = dir.join(META_FILE);
    let body = serde_json::to_string_pretty(&meta).expect("meta serializes");
    fs::write(&path, body).map_err(io_err(&path))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleTarget {
    Count(usize),
    Fps(f64),
}

/// Uniformly resamples a sequence.
///
/// Count mode picks source indices `round(j·(T−1)/(T'−1))`; a count above `T`
/// clamps to `T` and a count of one picks the middle frame. Fps mode walks a
/// time grid from the first frame at `1/fps` steps and keeps the nearest frame
/// to each grid point, dropping repeats. Source times are preserved and frames
/// are re-numbered from zero.
pub fn sample_uniform(seq: &FrameSequence, target: SampleTarget) -> Result<FrameSequence, IngestError> {
    let picks = match target {
        SampleTarget::Count(0) => {
            return Err(IngestError::InvalidTarget("frame count must be > 0".into()))
        }
        SampleTarget::Count(n) => count_indices(seq.len(), n),
        SampleTarget::Fps(fps) => {
            if !(fps.is_finite() && fps > 0.0) {
                return Err(IngestError::InvalidTarget(format!("fps must be > 0, got {fps}")));
            }
            fps_indices(&seq.times(), fps)
        }
    };
    let frames: Vec<_> = picks
        .iter()
        .map(|&i| {
            let f = &seq.frames[i];
            (f.source_time, Arc::clone(&f.image))
        })
        .collect();
    let sample_fps = if frames.len() > 1 {
        let span = frames[frames.len() - 1].0 - frames[0].0;
        (frames.len() - 1) as f64 / span
    } else {
        seq.sample_fps
    };
    let mut out = FrameSequence::new(seq.video_id.clone(), frames, sample_fps)?;
    out.duration_s = seq.duration_s;
    Ok(out)
}

fn count_indices(total: usize, count: usize) -> Vec<usize> {
    let count = count.min(total);
    if count == 1 {
        return vec![(total - 1) / 2];
    }
    let (span, steps) = ((total - 1) as u128, (count - 1) as u128);
    // round-half-up of j·span/steps in exact integer arithmetic
    (0..count as u128)
        .map(|j| ((2 * j * span + steps) / (2 * steps)) as usize)
        .collect()
}

fn fps_indices(times: &[f64], fps: f64) -> Vec<usize> {
    let first = times[0];
    let last = times[times.len() - 1];
    let step = 1.0 / fps;
    let tolerance = 1e-9 * (1.0 + last.abs());
    let mut picks: Vec<usize> = Vec::new();
    let mut j = 0u64;
    loop {
        let t = first + j as f64 * step;
        if t > last + tolerance {
            break;
        }
        let i = nearest_index(times, t);
        if picks.last() != Some(&i) {
            picks.push(i);
        }
        j += 1;
    }
    picks
}

/// Index of the time closest to `t`; ties resolve to the earlier frame.
pub(crate) fn nearest_index(times: &[f64], t: f64) -> usize {
    let upper = times.partition_point(|&x| x < t);
    if upper == 0 {
        return 0;
    }
    if upper == times.len() {
        return times.len() - 1;
    }
    if t - times[upper - 1] <= times[upper] - t {
        upper - 1
    } else {
        upper
    }
}

/// How an external decoder is invoked. `{input}`, `{output}` and `{fps}` in
/// the argument list are substituted before spawning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderCommand {
    pub program: String,
    pub args: Vec<String>,
}

impl Default for DecoderCommand {
    fn default() -> Self {
        Self {
            program: "ffmpeg".into(),
            args: [
                "-loglevel",
                "error",
                "-nostdin",
                "-y",
                "-i",
                "{input}",
                "-vf",
                "fps={fps}",
                "-start_number",
                "0",
                "{output}/%06d.png",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        }
    }
}

/// Runs the decoder to turn `input` into a frame directory at `out_dir`.
///
/// A `meta.json` with the requested rate is written unless the decoder left one.
pub fn decode_to_frame_directory(
    decoder: &DecoderCommand,
    input: &Path,
    out_dir: &Path,
    fps: f64,
) -> Result<PathBuf, IngestError> {
    if !(fps.is_finite() && fps > 0.0) {
        return Err(IngestError::InvalidTarget(format!("fps must be > 0, got {fps}")));
    }
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let fps_text = format!("{fps}");
    let args: Vec<String> = decoder
        .args
        .iter()
        .map(|a| {
            a.replace("{input}", &input.to_string_lossy())
                .replace("{output}", &out_dir.to_string_lossy())
                .replace("{fps}", &fps_text)
        })
        .collect();
    let output = Command::new(&decoder.program)
        .args(&args)
        .output()
        .map_err(|e| IngestError::DecodeError {
            path: input.to_path_buf(),
            reason: format!("could not spawn `{}`: {e}", decoder.program),
        })?;
    if !output.status.success() {
        return Err(IngestError::DecodeError {
            path: input.to_path_buf(),
            reason: format!(
                "`{}` exited with {}: {}",
                decoder.program,
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            ),
        });
    }
    let meta_path = out_dir.join(META_FILE);
    if !meta_path.exists() {
        let body = serde_json::to_string_pretty(&FrameMeta {
            duration_s: None,
            fps: Some(fps),
        })
        .expect("meta serializes");
        fs::write(&meta_path, body).map_err(io_err(&meta_path))?;
    }
    Ok(out_dir.to_path_buf())
}
