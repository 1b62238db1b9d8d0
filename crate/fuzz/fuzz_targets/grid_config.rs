#![no_main]
use libfuzzer_sys::fuzz_target;
use vtgrid::gridify::parse_grid_config;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_grid_config(s) {
        assert!(cfg.stride() >= 1 && cfg.stride() <= cfg.k());
        assert_eq!(parse_grid_config(&cfg.to_string()), Ok(cfg));
    }
});
