#![no_main]

use ecg_arrhythmia::wfdb::decode_record;
use libfuzzer_sys::fuzz_target;

// Layout: header length (u32 LE), sample length (u32 LE), header, samples,
// annotations (the rest, absent when empty).
fuzz_target!(|data: &[u8]| {
    let Some((lens, rest)) = data.split_first_chunk::<8>() else {
        return;
    };
    let h = u32::from_le_bytes(lens[..4].try_into().unwrap()) as usize;
    let s = u32::from_le_bytes(lens[4..].try_into().unwrap()) as usize;
    if h.saturating_add(s) > rest.len() {
        return;
    }
    let (header, rest) = rest.split_at(h);
    let (samples, ann) = rest.split_at(s);
    let ann = (!ann.is_empty()).then_some(ann);
    if let Ok(rec) = decode_record(header, samples, ann) {
        assert_eq!(rec.signals.len(), rec.header.n_signals);
        assert!(rec.signals.iter().all(|sig| sig.len() == rec.header.n_samples));
        assert!(rec.annotations.iter().all(|a| a.sample_index < rec.header.n_samples));
    }
});
