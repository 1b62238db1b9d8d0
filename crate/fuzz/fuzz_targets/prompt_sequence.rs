#![no_main]
use libfuzzer_sys::fuzz_target;
use vtgrid::prompt::PromptSequence;

fuzz_target!(|data: &[u8]| {
    if let Ok(seq) = serde_json::from_slice::<PromptSequence>(data) {
        assert_eq!(seq.pairs().count(), seq.grid_count());
        let again = serde_json::to_vec(&seq).unwrap();
        assert_eq!(serde_json::from_slice::<PromptSequence>(&again).unwrap(), seq);
    }
});
