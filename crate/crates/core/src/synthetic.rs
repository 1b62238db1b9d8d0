//! Deterministic synthetic videos for fixtures and offline end-to-end runs.
//!
//! Marker videos paint every frame a solid colour. Ordinary frames encode their
//! index in the red and green channels with blue fixed at 64; target frames are
//! [`MARKER_COLOR`]. Patterned videos fill every pixel from a seeded hash so that
//! any misplaced byte shows up in round-trip checks.

use image::{Rgb, RgbImage};

use crate::ingest::FrameSequence;

pub const MARKER_COLOR: [u8; 3] = [255, 0, 255];

/// Colour of ordinary frame `index`; never equal to the marker.
pub fn index_color(index: usize) -> [u8; 3] {
    [(index % 251) as u8, ((index / 251) % 251) as u8, 64]
}

/// A query naming the marker colour, understood by the mock backend.
pub fn marker_query() -> String {
    "the frames painted solid magenta (#ff00ff)".to_string()
}

/// `total` solid frames of size `dims` at `fps`; frames in the inclusive `marked` span get the marker.
pub fn marker_video(
    video_id: &str,
    total: usize,
    dims: (u32, u32),
    marked: Option<(usize, usize)>,
    fps: f64,
) -> FrameSequence {
    let images = (0..total)
        .map(|i| {
            let hit = marked.is_some_and(|(a, b)| a <= i && i <= b);
            let color = if hit { MARKER_COLOR } else { index_color(i) };
            RgbImage::from_pixel(dims.0, dims.1, Rgb(color))
        })
        .collect();
    FrameSequence::from_images(video_id, images, fps).expect("synthetic frames are valid")
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One frame whose bytes depend on `(seed, frame, position)`.
pub fn patterned_frame(seed: u64, frame: usize, dims: (u32, u32)) -> RgbImage {
    let base = mix(seed ^ mix(frame as u64));
    let len = dims.0 as usize * dims.1 as usize * 3;
    let mut buf = Vec::with_capacity(len + 8);
    let mut i = 0u64;
    while buf.len() < len {
        buf.extend_from_slice(&mix(base.wrapping_add(i)).to_le_bytes());
        i += 1;
    }
    buf.truncate(len);
    RgbImage::from_raw(dims.0, dims.1, buf).expect("buffer sized to frame")
}

pub fn patterned_video(video_id: &str, seed: u64, total: usize, dims: (u32, u32), fps: f64) -> FrameSequence {
    let images = (0..total).map(|f| patterned_frame(seed, f, dims)).collect();
    FrameSequence::from_images(video_id, images, fps).expect("synthetic frames are valid")
}
