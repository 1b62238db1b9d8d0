#![no_main]
use libfuzzer_sys::fuzz_target;
use vtgrid::eval::{frames_to_seconds_with, TemporalInterval};
use vtgrid::manifest::parse_sample_maps;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(maps) = parse_sample_maps(&text) {
        for m in &maps {
            let last = (m.times.len() - 1) as f64;
            let iv = TemporalInterval::frames(0.0, last + 3.0).unwrap();
            let _ = frames_to_seconds_with(&iv, &m.times);
        }
    }
});
