#![no_main]
use libfuzzer_sys::fuzz_target;
use vtgrid::eval::parse_charades_sta;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let loaded = parse_charades_sta(&text);
    for s in &loaded.samples {
        assert!(s.gt.start <= s.gt.end);
        assert!(!s.query.is_empty());
    }
});
