#![no_main]

use ecg_arrhythmia::wfdb::{parse_header, write_header};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(h) = parse_header(data) {
        assert_eq!(h.signals.len(), h.n_signals);
        assert!(h.sampling_frequency > 0.0);
        parse_header(write_header(&h).as_bytes()).expect("written header parses");
    }
});
