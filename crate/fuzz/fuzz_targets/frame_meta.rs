#![no_main]
use libfuzzer_sys::fuzz_target;
use vtgrid::ingest::FrameMeta;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(meta) = FrameMeta::from_json(&text) {
        assert!(meta.fps.is_none_or(|f| f.is_finite() && f > 0.0));
        assert!(meta.duration_s.is_none_or(|d| d.is_finite() && d > 0.0));
    }
});
