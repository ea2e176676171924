#![no_main]

use ecg_arrhythmia::wfdb::{decode_format212, encode_format212, packed_len, SAMPLE_MAX, SAMPLE_MIN};
use libfuzzer_sys::fuzz_target;

// First two bytes: sample count (little endian). The rest: packed samples.
fuzz_target!(|data: &[u8]| {
    let Some((n, packed)) = data.split_first_chunk::<2>() else {
        return;
    };
    let n = u16::from_le_bytes(*n) as usize;
    let Ok(values) = decode_format212(packed, n) else {
        assert!(packed.len() < packed_len(n));
        return;
    };
    assert_eq!(values.len(), n);
    assert!(values.iter().all(|v| (SAMPLE_MIN..=SAMPLE_MAX).contains(v)));
    let again = encode_format212(&values).expect("decoded samples are in range");
    assert_eq!(decode_format212(&again, n).unwrap(), values);
});
