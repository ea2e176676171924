#![no_main]

use ecg_arrhythmia::wfdb::{parse_annotations, write_annotations};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(anns) = parse_annotations(data, None) else {
        return;
    };
    assert!(anns.windows(2).all(|w| w[0].sample_index < w[1].sample_index));
    // codes outside 1..=49 parse but cannot be written back
    if let Ok(bytes) = write_annotations(&anns) {
        assert_eq!(parse_annotations(&bytes, None).unwrap(), anns);
    }
});
