#![no_main]
use libfuzzer_sys::fuzz_target;
use vtgrid::manifest::parse_manifest;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(records) = parse_manifest(&text) {
        for r in &records {
            assert!(r.start_frame <= r.end_frame);
            let _ = r.layout();
            let _ = r.frame_at_slot(r.cols.saturating_mul(r.rows));
        }
        let lines: Vec<String> = records.iter().map(|r| serde_json::to_string(r).unwrap()).collect();
        assert_eq!(parse_manifest(&lines.join("\n")).unwrap(), records);
    }
});
