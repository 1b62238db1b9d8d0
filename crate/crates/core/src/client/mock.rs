use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::LazyLock;

use image::{Rgb, RgbImage};
use regex::Regex;

use super::{Backend, ClientError, ModelReply};
use crate::gridify::extract_cell_from;
use crate::manifest::GridRecord;
use crate::prompt::{render_answer, ImageRef, PromptSequence};
use crate::synthetic::MARKER_COLOR;

static HEX_COLOR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"#([0-9a-fA-F]{6})\b").expect("valid pattern"));

#[derive(Debug, Clone, PartialEq)]
pub struct MockOutcome {
    pub reply: ModelReply,
    /// No cell carried the marker colour; the reply is then `From 0 to 0`.
    pub no_target: bool,
}

/// Offline backend that answers grounding questions by looking at the grids.
///
/// Every cell of every prompt image is cut out using the manifest geometry;
/// cells painted entirely in the marker colour are targets, and the reply spans
/// the smallest to largest target frame index. The marker defaults to
/// [`MARKER_COLOR`] and can be overridden by a `#rrggbb` token in the query.
/// Grids must be stored losslessly.
pub struct MockBackend {
    records: HashMap<PathBuf, GridRecord>,
}

impl MockBackend {
    /// `records` must carry the same image paths the prompts will reference.
    pub fn new(records: impl IntoIterator<Item = GridRecord>) -> Self {
        Self {
            records: records
                .into_iter()
                .map(|r| (r.image_path.clone(), r))
                .collect(),
        }
    }

    fn marker(query: &str) -> Rgb<u8> {
        HEX_COLOR
            .captures(query)
            .and_then(|c| u32::from_str_radix(&c[1], 16).ok())
            .map(|v| Rgb([(v >> 16) as u8, (v >> 8) as u8, v as u8]))
            .unwrap_or(Rgb(MARKER_COLOR))
    }

    fn marked_frames(&self, record: &GridRecord, image: &RgbImage, marker: Rgb<u8>) -> Result<Vec<usize>, ClientError> {
        let bad = |reason: String| ClientError::BackendError(format!(
            "grid {}: {reason}",
            record.image_path.display()
        ));
        let layout = record.layout().ok_or_else(|| bad("invalid layout".into()))?;
        let (w, h) = image.dimensions();
        let gutters = |n: usize| (n as u32 - 1) * record.gutter_px;
        let (cw, ch) = (
            w.saturating_sub(gutters(record.cols)) / record.cols as u32,
            h.saturating_sub(gutters(record.rows)) / record.rows as u32,
        );
        let mut found = Vec::new();
        for slot in 0..layout.k() {
            let cell = extract_cell_from(image, (cw, ch), slot / record.cols, slot % record.cols, &layout)
                .map_err(|e| bad(e.to_string()))?;
            if cw > 0 && ch > 0 && cell.pixels().all(|p| *p == marker) {
                found.push(record.frame_at_slot(slot));
            }
        }
        Ok(found)
    }

    pub fn respond(&self, seq: &PromptSequence) -> Result<MockOutcome, ClientError> {
        let marker = Self::marker(seq.query_text());
        let mut lo = usize::MAX;
        let mut hi = 0;
        for (_, image_ref) in seq.pairs() {
            let ImageRef::Path { path } = image_ref else {
                return Err(ClientError::BackendError(
                    "mock backend only reads file-backed grids".into(),
                ));
            };
            let record = self.records.get(path).ok_or_else(|| {
                ClientError::BackendError(format!("{} is not in the grid manifest", path.display()))
            })?;
            let image = image::open(path)
                .map_err(|e| ClientError::Image {
                    path: path.clone(),
                    reason: e.to_string(),
                })?
                .to_rgb8();
            for f in self.marked_frames(record, &image, marker)? {
                lo = lo.min(f);
                hi = hi.max(f);
            }
        }
        let no_target = lo == usize::MAX;
        let text = if no_target { render_answer(0, 0) } else { render_answer(lo, hi) };
        Ok(MockOutcome {
            reply: ModelReply {
                text,
                latency_s: 0.0,
                token_usage: None,
            },
            no_target,
        })
    }
}

impl Backend for MockBackend {
    fn send(&self, seq: &PromptSequence) -> Result<ModelReply, ClientError> {
        let outcome = self.respond(seq)?;
        if outcome.no_target {
            log::warn!("mock backend found no marker cells");
        }
        Ok(outcome.reply)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridify::{compose_all, GridConfig};
    use crate::manifest::grid_image_rel_path;
    use crate::prompt::{assemble_interleaved, render_vtg_query};
    use crate::synthetic::{marker_query, marker_video};
    use crate::TimeUnit;

    fn run(total: usize, marked: Option<(usize, usize)>, cfg: &str, gutter: u32) -> MockOutcome {
        let dir = tempfile::tempdir().unwrap();
        let cfg: GridConfig = cfg.parse::<GridConfig>().unwrap().with_gutter(gutter);
        let seq = marker_video("vid", total, (6, 4), marked, 1.0);
        let records: Vec<GridRecord> = compose_all(&seq, &cfg)
            .unwrap()
            .iter()
            .map(|g| {
                let path = dir.path().join(grid_image_rel_path("vid", g.plan().window_index));
                std::fs::create_dir_all(path.parent().unwrap()).unwrap();
                g.image().save(&path).unwrap();
                GridRecord::from_grid(g, path)
            })
            .collect();
        let query = render_vtg_query(&marker_query(), TimeUnit::Frames).unwrap();
        let prompt = assemble_interleaved(&records, TimeUnit::Frames, &query).unwrap();
        let mock = MockBackend::new(records);
        let first = mock.respond(&prompt).unwrap();
        assert_eq!(mock.respond(&prompt).unwrap(), first, "mock must be deterministic");
        first
    }

    #[test]
    fn finds_marked_span() {
        let out = run(24, Some((5, 9)), "g43_s7", 0);
        assert_eq!(out.reply.text, "From 5 to 9");
        assert!(!out.no_target);
    }

    #[test]
    fn all_marked() {
        assert_eq!(run(17, Some((0, 16)), "g22_s3", 1).reply.text, "From 0 to 16");
    }

    #[test]
    fn padded_short_video() {
        assert_eq!(run(5, Some((3, 4)), "g43_s12", 0).reply.text, "From 3 to 4");
    }

    #[test]
    fn no_marker() {
        let out = run(10, None, "g22_s4", 0);
        assert!(out.no_target);
        assert_eq!(out.reply.text, "From 0 to 0");
    }

    #[test]
    fn query_colour_override() {
        assert_eq!(MockBackend::marker("see #00ff10 now"), Rgb([0, 255, 16]));
        assert_eq!(MockBackend::marker("plain"), Rgb(MARKER_COLOR));
    }

    #[test]
    fn unknown_image_rejected() {
        let mock = MockBackend::new([]);
        let prompt = PromptSequence::new(
            vec![crate::prompt::PromptElement::text("t"), crate::prompt::PromptElement::image_path("nope.png")],
            "q",
            None,
        )
        .unwrap();
        assert!(matches!(mock.respond(&prompt), Err(ClientError::BackendError(_))));
    }
}
