#![no_main]

use ecg_arrhythmia::features::{parse_feature_rows, write_feature_rows};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rows) = parse_feature_rows(text) {
        let again = parse_feature_rows(&write_feature_rows(&rows)).expect("written rows parse");
        assert_eq!(again, rows);
    }
});
