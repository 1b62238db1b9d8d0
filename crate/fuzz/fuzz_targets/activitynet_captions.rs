#![no_main]
use libfuzzer_sys::fuzz_target;
use vtgrid::eval::parse_activitynet_captions;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(samples) = parse_activitynet_captions(&text) {
        for s in &samples {
            let d = s.duration.expect("duration is carried");
            assert!(0.0 <= s.gt.start && s.gt.start <= s.gt.end && s.gt.end <= d);
        }
    }
});
