#![no_main]
use libfuzzer_sys::fuzz_target;
use vtgrid::eval::parse_grounding_answer_as;
use vtgrid::TimeUnit;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    for unit in [TimeUnit::Frames, TimeUnit::Seconds] {
        if let Ok(iv) = parse_grounding_answer_as(s, unit) {
            assert!(iv.start.is_finite() && iv.end.is_finite());
            assert!(0.0 <= iv.start && iv.start <= iv.end);
        }
    }
});
