#![no_main]

use ecg_arrhythmia::nn::{model_from_text, model_to_text};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = model_from_text(text) {
        let again = model_from_text(&model_to_text(&model)).expect("written model parses");
        assert_eq!(again, model);
    }
});
