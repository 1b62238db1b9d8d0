//! Composite timestamps, interleaved prompts and instruction records.
//!
//! Every grid gets one text anchor naming the span it covers, and the anchors
//! alternate with the grid images:
//!
//! ```text
//! "from Frame 0 to Frame 11."  [grid 0]  "from Frame 7 to Frame 18."  [grid 1]  ...  question
//! ```

use std::collections::HashMap;
use std::io::Cursor;
use std::path::PathBuf;

use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::GroundingSample;
use crate::gridify::{plan_windows, GridConfig, GridError, GridImage};
use crate::ingest::{nearest_index, FrameSequence};
use crate::manifest::{grid_image_rel_path, GridRecord};
use crate::TimeUnit;

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("cannot build a prompt without grids")]
    EmptyPrompt,
    #[error("query is empty")]
    EmptyQuery,
    #[error("no frames loaded for video `{0}`")]
    MissingVideo(String),
    #[error("prompt elements must alternate text, image, ... starting with text: {0}")]
    Alternation(String),
    #[error("windows are not in temporal order: {0}")]
    Unordered(String),
    #[error("failed to encode grid image: {0}")]
    ImageEncode(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

mod base64_bytes {
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&base64::engine::general_purpose::STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        base64::engine::general_purpose::STANDARD
            .decode(text)
            .map_err(serde::de::Error::custom)
    }
}

/// Where the pixels of an image element come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ImageRef {
    Path {
        path: PathBuf,
    },
    Inline {
        mime_type: String,
        #[serde(with = "base64_bytes")]
        data: Vec<u8>,
    },
}

impl ImageRef {
    /// `data:` URL for inline transport.
    pub fn data_url(&self) -> std::io::Result<String> {
        let (mime, bytes) = match self {
            ImageRef::Path { path } => (mime_for(path), std::fs::read(path)?),
            ImageRef::Inline { mime_type, data } => (mime_type.as_str(), data.clone()),
        };
        Ok(format!(
            "data:{mime};base64,{}",
            base64::engine::general_purpose::STANDARD.encode(bytes)
        ))
    }
}

fn mime_for(path: &std::path::Path) -> &'static str {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("jpg") | Some("jpeg") => "image/jpeg",
        _ => "image/png",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PromptElement {
    Text { text: String },
    Image(ImageRef),
}

impl PromptElement {
    pub fn text(text: impl Into<String>) -> Self {
        PromptElement::Text { text: text.into() }
    }

    pub fn image_path(path: impl Into<PathBuf>) -> Self {
        PromptElement::Image(ImageRef::Path { path: path.into() })
    }
}

#[derive(Debug, Clone, Deserialize)]
struct RawPromptSequence {
    #[serde(default)]
    system: Option<String>,
    content: Vec<PromptElement>,
    query: String,
}

/// Timestamp/image pairs followed by the question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPromptSequence")]
pub struct PromptSequence {
    #[serde(rename = "system", skip_serializing_if = "Option::is_none")]
    system_text: Option<String>,
    #[serde(rename = "content")]
    elements: Vec<PromptElement>,
    #[serde(rename = "query")]
    query_text: String,
}

impl TryFrom<RawPromptSequence> for PromptSequence {
    type Error = PromptError;

    fn try_from(raw: RawPromptSequence) -> Result<Self, Self::Error> {
        PromptSequence::new(raw.content, raw.query, raw.system)
    }
}

impl PromptSequence {
    pub fn new(
        elements: Vec<PromptElement>,
        query_text: impl Into<String>,
        system_text: Option<String>,
    ) -> Result<Self, PromptError> {
        if !elements.len().is_multiple_of(2) {
            return Err(PromptError::Alternation(format!(
                "{} elements is odd",
                elements.len()
            )));
        }
        for (i, el) in elements.iter().enumerate() {
            let ok = matches!(
                (i % 2, el),
                (0, PromptElement::Text { .. }) | (1, PromptElement::Image(_))
            );
            if !ok {
                return Err(PromptError::Alternation(format!("element {i} has the wrong kind")));
            }
        }
        Ok(Self {
            system_text,
            elements,
            query_text: query_text.into(),
        })
    }

    pub fn with_system(mut self, system_text: impl Into<String>) -> Self {
        self.system_text = Some(system_text.into());
        self
    }

    pub fn elements(&self) -> &[PromptElement] {
        &self.elements
    }

    pub fn system_text(&self) -> Option<&str> {
        self.system_text.as_deref()
    }

    pub fn query_text(&self) -> &str {
        &self.query_text
    }

    pub fn grid_count(&self) -> usize {
        self.elements.len() / 2
    }

    /// `(timestamp, image)` pairs in prompt order.
    pub fn pairs(&self) -> impl Iterator<Item = (&str, &ImageRef)> {
        self.elements.chunks_exact(2).map(|pair| match pair {
            [PromptElement::Text { text }, PromptElement::Image(img)] => (text.as_str(), img),
            _ => unreachable!("alternation checked at construction"),
        })
    }

    /// Content parts as sent to a chat backend: the pairs, then the question as a final text part.
    pub fn content_parts(&self) -> Vec<PromptElement> {
        let mut parts = self.elements.clone();
        parts.push(PromptElement::text(self.query_text.clone()));
        parts
    }
}

/// Anything that can stand in a prompt as one grid: an in-memory composite or a manifest row.
pub trait PromptWindow {
    fn window_index(&self) -> usize;
    fn frame_span(&self) -> (usize, usize);
    fn time_span(&self) -> (f64, f64);
    fn image_ref(&self) -> Result<ImageRef, PromptError>;
}

impl PromptWindow for GridImage {
    fn window_index(&self) -> usize {
        self.plan().window_index
    }

    fn frame_span(&self) -> (usize, usize) {
        (self.start_frame(), self.end_frame())
    }

    fn time_span(&self) -> (f64, f64) {
        (self.start_time(), self.end_time())
    }

    fn image_ref(&self) -> Result<ImageRef, PromptError> {
        let mut data = Vec::new();
        self.image()
            .write_to(&mut Cursor::new(&mut data), image::ImageFormat::Png)
            .map_err(|e| PromptError::ImageEncode(e.to_string()))?;
        Ok(ImageRef::Inline {
            mime_type: "image/png".into(),
            data,
        })
    }
}

impl PromptWindow for GridRecord {
    fn window_index(&self) -> usize {
        self.window_index
    }

    fn frame_span(&self) -> (usize, usize) {
        (self.start_frame, self.end_frame)
    }

    fn time_span(&self) -> (f64, f64) {
        (self.start_time_s, self.end_time_s)
    }

    fn image_ref(&self) -> Result<ImageRef, PromptError> {
        Ok(ImageRef::Path {
            path: self.image_path.clone(),
        })
    }
}

pub fn format_timestamp(frames: (usize, usize), times: (f64, f64), unit: TimeUnit) -> String {
    match unit {
        TimeUnit::Frames => format!("from Frame {} to Frame {}.", frames.0, frames.1),
        TimeUnit::Seconds => format!("from {:.1}s to {:.1}s.", times.0, times.1),
    }
}

/// The text anchor placed before a grid. Padded cells are not part of the span.
pub fn composite_timestamp<W: PromptWindow + ?Sized>(grid: &W, unit: TimeUnit) -> String {
    format_timestamp(grid.frame_span(), grid.time_span(), unit)
}

/// Interleaves timestamps and grids in window order and appends `query` as the
/// closing question (usually the output of [`render_vtg_query`]).
pub fn assemble_interleaved<W: PromptWindow>(
    grids: &[W],
    unit: TimeUnit,
    query: &str,
) -> Result<PromptSequence, PromptError> {
    if grids.is_empty() {
        return Err(PromptError::EmptyPrompt);
    }
    let mut ordered: Vec<&W> = grids.iter().collect();
    ordered.sort_by_key(|g| g.window_index());
    for pair in ordered.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a.window_index() == b.window_index() {
            return Err(PromptError::Unordered(format!(
                "window {} appears twice",
                a.window_index()
            )));
        }
        if b.frame_span().0 < a.frame_span().0 || b.time_span().0 < a.time_span().0 {
            return Err(PromptError::Unordered(format!(
                "window {} starts before window {}",
                b.window_index(),
                a.window_index()
            )));
        }
    }
    let mut elements = Vec::with_capacity(2 * ordered.len());
    for grid in ordered {
        elements.push(PromptElement::text(composite_timestamp(grid, unit)));
        elements.push(PromptElement::Image(grid.image_ref()?));
    }
    PromptSequence::new(elements, query, None)
}

/// Fills the grounding question template. Trailing sentence punctuation on the
/// query is dropped so the question ends in a single `?`.
pub fn render_vtg_query(query: &str, unit: TimeUnit) -> Result<String, PromptError> {
    let q = query
        .trim()
        .trim_end_matches(|c: char| matches!(c, '.' | '?' | '!') || c.is_whitespace());
    if q.is_empty() {
        return Err(PromptError::EmptyQuery);
    }
    let noun = match unit {
        TimeUnit::Frames => "frames",
        TimeUnit::Seconds => "seconds",
    };
    Ok(format!("During which {noun} can we see {q}?"))
}

pub fn render_answer(start: usize, end: usize) -> String {
    format!("From {start} to {end}")
}

/// One supervised example: the grids of a video, their anchors, the question and the answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionRecord {
    pub video_id: String,
    pub images: Vec<PathBuf>,
    pub timestamps: Vec<String>,
    pub question: String,
    pub answer: String,
    pub gt_interval_frames: (usize, usize),
}

/// Nearest frame to `t`, ties resolved towards the later frame.
fn nearest_index_late(times: &[f64], t: f64) -> usize {
    let i = nearest_index(times, t);
    match times.get(i + 1) {
        Some(&next) if next - t == t - times[i] => i + 1,
        _ => i,
    }
}

/// Maps a ground-truth span in seconds onto sampled frame indices: each
/// boundary goes to its nearest sampled frame (start ties early, end ties late).
pub fn seconds_to_frame_span(times: &[f64], start_s: f64, end_s: f64) -> (usize, usize) {
    let start = nearest_index(times, start_s);
    let end = nearest_index_late(times, end_s).max(start);
    (start, end)
}

/// Builds instruction records in the frame-index answer space. Image paths are
/// relative to the grid tree written by gridification.
pub fn emit_instruction_dataset(
    annotations: &[GroundingSample],
    sequences: &HashMap<String, FrameSequence>,
    config: &GridConfig,
) -> Result<Vec<InstructionRecord>, PromptError> {
    let mut records = Vec::with_capacity(annotations.len());
    for sample in annotations {
        let seq = sequences
            .get(&sample.video_id)
            .ok_or_else(|| PromptError::MissingVideo(sample.video_id.clone()))?;
        let duration = sample.duration.unwrap_or_else(|| seq.duration());
        let (mut start, mut end) = (sample.gt.start, sample.gt.end);
        if start < 0.0 || end > duration {
            log::warn!(
                "{}: ground truth [{start}, {end}] exceeds duration {duration}; clamping",
                sample.id
            );
            start = start.clamp(0.0, duration);
            end = end.clamp(0.0, duration);
        }
        let times = seq.times();
        let gt = seconds_to_frame_span(&times, start, end);
        let plans = plan_windows(seq.len(), config)?;
        let images = plans
            .iter()
            .map(|p| grid_image_rel_path(&sample.video_id, p.window_index))
            .collect();
        let timestamps = plans
            .iter()
            .map(|p| {
                let span = (p.start_frame, p.end_frame());
                format_timestamp(span, (times[span.0], times[span.1]), TimeUnit::Frames)
            })
            .collect();
        records.push(InstructionRecord {
            video_id: sample.video_id.clone(),
            images,
            timestamps,
            question: render_vtg_query(&sample.query, TimeUnit::Frames)?,
            answer: render_answer(gt.0, gt.1),
            gt_interval_frames: gt,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::TemporalInterval;
    use image::{Rgb, RgbImage};

    fn record(window_index: usize, start: usize, end: usize) -> GridRecord {
        GridRecord {
            video_id: "v".into(),
            window_index,
            start_frame: start,
            end_frame: end,
            start_time_s: start as f64,
            end_time_s: end as f64,
            pad_count: 0,
            image_path: grid_image_rel_path("v", window_index),
            cols: 4,
            rows: 3,
            gutter_px: 0,
        }
    }

    fn seq(n: usize, fps: f64) -> FrameSequence {
        let images = (0..n).map(|_| RgbImage::from_pixel(2, 2, Rgb([1, 2, 3]))).collect();
        FrameSequence::from_images("v", images, fps).unwrap()
    }

    fn sample(start: f64, end: f64) -> GroundingSample {
        GroundingSample {
            id: "v#0".into(),
            video_id: "v".into(),
            query: "a person opens a door.".into(),
            gt: TemporalInterval::seconds(start, end).unwrap(),
            duration: None,
        }
    }

    #[test]
    fn timestamps() {
        assert_eq!(composite_timestamp(&record(0, 0, 11), TimeUnit::Frames), "from Frame 0 to Frame 11.");
        assert_eq!(composite_timestamp(&record(0, 0, 11), TimeUnit::Seconds), "from 0.0s to 11.0s.");
        let mut padded = record(0, 0, 4);
        padded.pad_count = 7;
        assert_eq!(composite_timestamp(&padded, TimeUnit::Frames), "from Frame 0 to Frame 4.");
    }

    #[test]
    fn interleaving_counts() {
        let grids = [record(0, 0, 11), record(1, 7, 18), record(2, 12, 23)];
        let p = assemble_interleaved(&grids, TimeUnit::Frames, "Q?").unwrap();
        assert_eq!(p.elements().len(), 6);
        assert_eq!(p.grid_count(), 3);
        assert_eq!(p.query_text(), "Q?");
        assert_eq!(p.content_parts().len(), 7);
        let one = assemble_interleaved(&grids[..1], TimeUnit::Frames, "Q?").unwrap();
        assert_eq!(
            one.elements(),
            &[PromptElement::text("from Frame 0 to Frame 11."), PromptElement::image_path("v/w0000.png")]
        );
    }

    #[test]
    fn out_of_order_grids_are_sorted() {
        let grids = [record(2, 12, 23), record(0, 0, 11), record(1, 7, 18)];
        let p = assemble_interleaved(&grids, TimeUnit::Frames, "Q").unwrap();
        let stamps: Vec<&str> = p.pairs().map(|(t, _)| t).collect();
        assert_eq!(stamps, ["from Frame 0 to Frame 11.", "from Frame 7 to Frame 18.", "from Frame 12 to Frame 23."]);
    }

    #[test]
    fn assembly_errors() {
        let none: [GridRecord; 0] = [];
        assert_eq!(assemble_interleaved(&none, TimeUnit::Frames, "Q"), Err(PromptError::EmptyPrompt));
        let dup = [record(0, 0, 11), record(0, 0, 11)];
        assert!(matches!(assemble_interleaved(&dup, TimeUnit::Frames, "Q"), Err(PromptError::Unordered(_))));
        let backwards = [record(0, 10, 11), record(1, 0, 11)];
        assert!(matches!(assemble_interleaved(&backwards, TimeUnit::Frames, "Q"), Err(PromptError::Unordered(_))));
    }

    #[test]
    fn alternation_enforced() {
        let bad = vec![PromptElement::image_path("a.png"), PromptElement::text("t")];
        assert!(matches!(PromptSequence::new(bad, "q", None), Err(PromptError::Alternation(_))));
        let odd = vec![PromptElement::text("t")];
        assert!(matches!(PromptSequence::new(odd, "q", None), Err(PromptError::Alternation(_))));
        assert!(serde_json::from_str::<PromptSequence>(
            r#"{"content":[{"type":"image","path":"a.png"},{"type":"text","text":"x"}],"query":"q"}"#
        ).is_err());
    }

    #[test]
    fn json_shape() {
        let p = assemble_interleaved(&[record(0, 0, 11)], TimeUnit::Frames, "Q")
            .unwrap()
            .with_system("be brief");
        let v = serde_json::to_value(&p).unwrap();
        assert_eq!(
            v,
            serde_json::json!({
                "system": "be brief",
                "content": [
                    {"type": "text", "text": "from Frame 0 to Frame 11."},
                    {"type": "image", "path": "v/w0000.png"}
                ],
                "query": "Q"
            })
        );
        let back: PromptSequence = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn inline_images_serialize_as_base64() {
        let el = PromptElement::Image(ImageRef::Inline { mime_type: "image/png".into(), data: vec![1, 2, 3] });
        let v = serde_json::to_value(&el).unwrap();
        assert_eq!(v, serde_json::json!({"type": "image", "mime_type": "image/png", "data": "AQID"}));
        assert_eq!(serde_json::from_value::<PromptElement>(v).unwrap(), el);
        assert_eq!(
            ImageRef::Inline { mime_type: "image/png".into(), data: vec![1, 2, 3] }.data_url().unwrap(),
            "data:image/png;base64,AQID"
        );
    }

    #[test]
    fn query_template() {
        assert_eq!(
            render_vtg_query("a person is putting a picture onto the wall", TimeUnit::Frames).unwrap(),
            "During which frames can we see a person is putting a picture onto the wall?"
        );
        assert_eq!(render_vtg_query("X", TimeUnit::Seconds).unwrap(), "During which seconds can we see X?");
        assert_eq!(
            render_vtg_query("a person opens a door. ", TimeUnit::Frames).unwrap(),
            "During which frames can we see a person opens a door?"
        );
        assert_eq!(render_vtg_query("", TimeUnit::Frames), Err(PromptError::EmptyQuery));
        assert_eq!(render_vtg_query(" ?. ", TimeUnit::Frames), Err(PromptError::EmptyQuery));
    }

    #[test]
    fn instruction_answers() {
        let mut seqs = HashMap::new();
        seqs.insert("v".to_string(), seq(24, 1.0));
        let cfg = GridConfig::new(4, 3, 7).unwrap();

        let recs = emit_instruction_dataset(&[sample(4.0, 10.0)], &seqs, &cfg).unwrap();
        assert_eq!(recs[0].answer, "From 4 to 10");
        assert_eq!(recs[0].gt_interval_frames, (4, 10));
        assert_eq!(recs[0].question, "During which frames can we see a person opens a door?");
        assert_eq!(recs[0].images.len(), 3);
        assert_eq!(recs[0].timestamps[1], "from Frame 7 to Frame 18.");

        let recs = emit_instruction_dataset(&[sample(0.0, 24.0)], &seqs, &cfg).unwrap();
        assert_eq!(recs[0].answer, "From 0 to 23");

        let recs = emit_instruction_dataset(&[sample(6.95, 7.05)], &seqs, &cfg).unwrap();
        assert_eq!(recs[0].answer, "From 7 to 7");

        let mut far = sample(3.0, 90.0);
        far.duration = Some(24.0);
        let recs = emit_instruction_dataset(&[far], &seqs, &cfg).unwrap();
        assert_eq!(recs[0].gt_interval_frames, (3, 23));
    }

    #[test]
    fn missing_video() {
        let seqs = HashMap::new();
        let cfg = GridConfig::new(1, 1, 1).unwrap();
        assert_eq!(
            emit_instruction_dataset(&[sample(0.0, 1.0)], &seqs, &cfg),
            Err(PromptError::MissingVideo("v".into()))
        );
    }

    #[test]
    fn boundary_ties() {
        let times = [0.0, 1.0, 2.0];
        assert_eq!(seconds_to_frame_span(&times, 0.5, 0.5), (0, 1));
        assert_eq!(seconds_to_frame_span(&times, 1.5, 1.2), (1, 1));
    }
}
