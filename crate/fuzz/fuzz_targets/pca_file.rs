#![no_main]

use ecg_arrhythmia::features::PcaModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(pca) = PcaModel::from_text(text) {
        let again = PcaModel::from_text(&pca.to_text()).expect("written basis parses");
        assert_eq!(again, pca);
        let x = vec![1.0; pca.dim()];
        assert_eq!(pca.project(&x).len(), pca.n_components());
    }
});
