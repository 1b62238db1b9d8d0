//! Seeded marker-video corpora for offline end-to-end runs with the mock backend.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vtgrid::ingest::write_frame_directory;
use vtgrid::synthetic::{marker_query, marker_video};

use crate::error::{io_error, CliError};

const RATES: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
const SIZES: [(u32, u32); 3] = [(32, 24), (48, 48), (64, 48)];

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusVideo {
    pub video_id: String,
    pub total: usize,
    pub fps: f64,
    pub dims: (u32, u32),
    /// Inclusive span of marker frames.
    pub marked: (usize, usize),
}

pub fn plan_marker_corpus(videos: usize, max_frames: usize, seed: u64) -> Vec<CorpusVideo> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..videos)
        .map(|i| {
            let total = rng.gen_range(1..=max_frames.max(1));
            let a = rng.gen_range(0..total);
            let b = rng.gen_range(a..total);
            CorpusVideo {
                video_id: format!("syn{i:04}"),
                total,
                fps: RATES[rng.gen_range(0..RATES.len())],
                dims: SIZES[rng.gen_range(0..SIZES.len())],
                marked: (a, b),
            }
        })
        .collect()
}

/// Writes `frames/<video_id>/` for every planned video and a Charades-STA style
/// `annotations.txt` whose spans are the marker frames in seconds. Returns the
/// annotation path.
pub fn write_marker_corpus(dir: &Path, videos: &[CorpusVideo]) -> Result<PathBuf, CliError> {
    let frames = dir.join("frames");
    let mut annotations = String::new();
    for v in videos {
        let seq = marker_video(&v.video_id, v.total, v.dims, Some(v.marked), v.fps);
        write_frame_directory(&seq, &frames.join(&v.video_id))?;
        let (a, b) = (v.marked.0 as f64 / v.fps, v.marked.1 as f64 / v.fps);
        writeln!(annotations, "{} {a} {b}##{}", v.video_id, marker_query()).expect("string write");
    }
    let path = dir.join("annotations.txt");
    fs::write(&path, annotations).map_err(|e| io_error(&path, e))?;
    Ok(path)
}
