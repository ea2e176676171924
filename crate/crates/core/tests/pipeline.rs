use ecg_arrhythmia::config::{ClassifierMode, DetectorMode, PipelineConfig};
use ecg_arrhythmia::metrics::{run_experiment, ExperimentError};
use ecg_arrhythmia::synth::{pulse_fixture, synthesize_ecg, SynthConfig};
use ecg_arrhythmia::wfdb::{read_record, write_record};

#[test]
fn records_survive_the_filesystem() {
    let dir = tempfile::tempdir().unwrap();
    let rec = synthesize_ecg(&SynthConfig {
        n_beats: 120,
        seed: 11,
        ..SynthConfig::default()
    })
    .to_record("syn");
    let hea = write_record(&rec, dir.path()).unwrap();
    assert_eq!(read_record(&hea).unwrap(), rec);
    assert_eq!(read_record(&dir.path().join("syn")).unwrap(), rec);
}

fn write_records(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    (0..3)
        .map(|i| {
            let rec = synthesize_ecg(&SynthConfig {
                n_beats: 300,
                seed: 20 + i,
                ..SynthConfig::default()
            })
            .to_record(&format!("r{i}"));
            write_record(&rec, dir).unwrap().with_extension("")
        })
        .collect()
}

#[test]
fn experiment_from_files_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.data.records = write_records(dir.path());
    cfg.training.seed = Some(5);
    for detector in [DetectorMode::Annotations, DetectorMode::UniDwt] {
        cfg.detector.mode = detector;
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.report_text(), b.report_text());
        assert_eq!(a.verdicts_csv(), b.verdicts_csv());
        assert_eq!(a.mse_csv(), b.mse_csv());
        assert_eq!(a.per_record.len(), 3);
        let acc = a.pooled.accuracy.unwrap();
        assert!(
            *acc.numer() as f64 / *acc.denom() as f64 > 0.95,
            "{detector}: {}",
            a.pooled
        );
    }
}

#[test]
fn self_learner_catches_dropouts_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let rec = pulse_fixture("drop", 500.0, 345, 40, &[12, 25]);
    let base = write_record(&rec, dir.path()).unwrap().with_extension("");
    let mut cfg = PipelineConfig::default();
    cfg.data.records = vec![base];
    cfg.classifier.mode = ClassifierMode::SelfLearner;
    let result = run_experiment(&cfg).unwrap();
    let c = result.pooled.counts;
    assert_eq!((c.tp, c.fn_, c.fp), (2, 0, 0), "{}", result.pooled);
}

#[test]
fn missing_files_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.data.records = vec![dir.path().join("a"), dir.path().join("b")];
    cfg.training.seed = Some(1);
    match run_experiment(&cfg) {
        Err(ExperimentError::MissingRecords(paths)) => assert_eq!(paths.len(), 2),
        other => panic!("expected missing records, got {other:?}"),
    }
}
