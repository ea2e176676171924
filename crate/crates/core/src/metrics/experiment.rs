use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{ClassifierMode, ConfigError, DetectorMode, PipelineConfig, SplitPolicy};
use crate::dsp::detect_r_peaks;
use crate::features::{beat_contexts, featurize, fit_pca, BeatContext, FeatureError, PcaModel, PCA_COMPONENTS};
use crate::fixed::QFormat;
use crate::nn::{
    model_from_text, quantize_model, train, BeatClass, MlpModel, NnError, Sample, TrainOptions, TrainReport,
    DEFAULT_INPUTS, DEFAULT_OUTPUTS,
};
use crate::selflearn::{AnomalyKind, Phase, SelfLearnError, SelfLearner};
use crate::wfdb::{read_record, BeatLabel, EcgRecord, WfdbError};

use super::{compute_metrics, match_beats, window_samples, ConfusionCounts, MatchEntry, MetricsError, MetricsReport};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("missing record files:\n{}", .0.iter().map(|p| format!("  {}", p.display())).collect::<Vec<_>>().join("\n"))]
    MissingRecords(Vec<PathBuf>),
    #[error("no records configured")]
    NoRecords,
    #[error("record {record}: {source}")]
    Wfdb { record: String, source: WfdbError },
    #[error("record {record} has no channel {channel}")]
    NoChannel { record: String, channel: usize },
    #[error("record {record}: {source}")]
    Features { record: String, source: FeatureError },
    #[error("record {record}: {source}")]
    SelfLearn { record: String, source: SelfLearnError },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("training needs a seed (set training.seed or pass --seed)")]
    MissingSeed,
    #[error("{path}: {message}")]
    Artifact { path: PathBuf, message: String },
    #[error("{scope}: {source}")]
    Metrics { scope: String, source: MetricsError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Normal,
    Arrhythmia,
}

impl Verdict {
    fn from_flag(flag: bool) -> Self {
        if flag {
            Verdict::Arrhythmia
        } else {
            Verdict::Normal
        }
    }

    fn name(self) -> &'static str {
        match self {
            Verdict::Normal => "normal",
            Verdict::Arrhythmia => "arrhythmia",
        }
    }
}

/// One scored decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerdictRow {
    pub record: String,
    pub sample_index: usize,
    /// Annotated class, or `None` for a detection with no annotated beat.
    pub truth: Option<Verdict>,
    pub predicted: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordReport {
    pub record: String,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRun {
    /// Record name, or `pooled`.
    pub label: String,
    pub report: TrainReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub per_record: Vec<RecordReport>,
    pub pooled: MetricsReport,
    pub training: Vec<TrainingRun>,
    pub verdicts: Vec<VerdictRow>,
}

impl ExperimentResult {
    /// Pooled report first, then one section per record.
    pub fn report_text(&self) -> String {
        let mut out = String::from("[pooled]\n");
        let _ = write!(out, "{}", self.pooled);
        for r in &self.per_record {
            let _ = write!(out, "\n[record {}]\n{}", r.record, r.report);
        }
        out
    }

    pub fn verdicts_csv(&self) -> String {
        let mut out = String::from("record,sample_index,truth,predicted\n");
        for v in &self.verdicts {
            let truth = v.truth.map_or("none", Verdict::name);
            let _ = writeln!(out, "{},{},{},{}", v.record, v.sample_index, truth, v.predicted.name());
        }
        out
    }

    pub fn mse_csv(&self) -> String {
        let mut out = String::from("run,epoch,mse\n");
        for run in &self.training {
            for (epoch, mse) in run.report.mse_history.iter().enumerate() {
                let _ = writeln!(out, "{},{epoch},{mse:?}", run.label);
            }
        }
        out
    }
}

/// Loads every configured record and runs the experiment.
pub fn run_experiment(config: &PipelineConfig) -> Result<ExperimentResult, ExperimentError> {
    config.validate()?;
    if config.data.records.is_empty() {
        return Err(ExperimentError::NoRecords);
    }
    let header_path = |p: &Path| {
        if p.extension().is_some_and(|e| e == "hea") {
            p.to_path_buf()
        } else {
            p.with_extension("hea")
        }
    };
    let missing: Vec<PathBuf> = config
        .data
        .records
        .iter()
        .map(|p| header_path(p))
        .filter(|p| !p.is_file())
        .collect();
    if !missing.is_empty() {
        return Err(ExperimentError::MissingRecords(missing));
    }
    let records = config
        .data
        .records
        .iter()
        .map(|p| {
            read_record(p).map_err(|source| ExperimentError::Wfdb {
                record: p.display().to_string(),
                source,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    run_experiment_on(&records, config)
}

/// A record reduced to what classification and scoring need: one channel,
/// its peaks (annotated or detected) and their alignment to the annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedRecord {
    pub name: String,
    pub signal: Vec<f64>,
    pub fs: f64,
    /// Annotated beats (position, label).
    pub truth: Vec<(usize, BeatLabel)>,
    pub peaks: Vec<usize>,
    /// For each peak, the annotation it was matched to.
    pub peak_annotation: Vec<Option<usize>>,
    /// For each annotation, the peak it was matched to.
    pub annotation_peak: Vec<Option<usize>>,
    /// First sample of the test part.
    pub split: usize,
}

impl PreparedRecord {
    pub fn new(record: &EcgRecord, config: &PipelineConfig) -> Result<Self, ExperimentError> {
        let name = record.name().to_string();
        let channel = config.data.channel;
        let signal = record.channel_f64(channel).ok_or_else(|| ExperimentError::NoChannel {
            record: name.clone(),
            channel,
        })?;
        let fs = record.sampling_frequency();
        let truth = record.labelled_beats();
        let truth_idx: Vec<usize> = truth.iter().map(|b| b.0).collect();
        let peaks = match config.detector.mode {
            DetectorMode::Annotations => truth_idx.clone(),
            DetectorMode::UniDwt => detect_r_peaks(&signal, fs).r_indices,
        };
        let window = window_samples(config.evaluation.match_window_ms, fs);
        let mut peak_annotation = vec![None; peaks.len()];
        let mut annotation_peak = vec![None; truth.len()];
        for e in match_beats(&peaks, &truth_idx, window) {
            if let MatchEntry::Matched { annotation, prediction } = e {
                peak_annotation[prediction] = Some(annotation);
                annotation_peak[annotation] = Some(prediction);
            }
        }
        let split = (signal.len() as f64 * config.training.train_fraction).floor() as usize;
        Ok(PreparedRecord {
            name,
            signal,
            fs,
            truth,
            peaks,
            peak_annotation,
            annotation_peak,
            split,
        })
    }

    /// Label of the annotation matched to peak `p`; unmatched peaks are ignored.
    pub fn peak_label(&self, p: usize) -> BeatLabel {
        self.peak_annotation[p].map_or(BeatLabel::Ignore, |a| self.truth[a].1)
    }

    /// Feature contexts for every usable peak, paired with the peak index.
    pub fn contexts(&self) -> Vec<(usize, BeatContext)> {
        let labelled: Vec<(usize, BeatLabel)> = self
            .peaks
            .iter()
            .enumerate()
            .map(|(p, &r)| (r, self.peak_label(p)))
            .collect();
        beat_contexts(&self.signal, &labelled, self.fs)
            .into_iter()
            .map(|c| {
                let p = self
                    .peaks
                    .binary_search(&c.window.r_index)
                    .expect("context comes from a peak");
                (p, c)
            })
            .collect()
    }

    /// Labelled contexts from the training part.
    pub fn training_windows<'a>(&self, contexts: &'a [(usize, BeatContext)]) -> impl Iterator<Item = &'a BeatContext> {
        let split = self.split;
        contexts
            .iter()
            .map(|(_, c)| c)
            .filter(move |c| c.window.r_index < split && c.label != BeatLabel::Ignore)
    }

    /// Scores per-peak predictions against the annotated beats from `from`
    /// onward. A missed annotated beat counts as predicted normal; an extra
    /// detection counts only when it raises an alarm.
    fn score(
        &self,
        from: usize,
        peak_verdict: &[Option<Verdict>],
        missed_beat_verdict: impl Fn(usize) -> Option<Verdict>,
        rows: &mut Vec<VerdictRow>,
    ) -> ConfusionCounts {
        let mut counts = ConfusionCounts::default();
        let mut scored: Vec<VerdictRow> = Vec::new();
        for (a, &(pos, label)) in self.truth.iter().enumerate() {
            if pos < from {
                continue;
            }
            let predicted = match self.annotation_peak[a] {
                Some(p) => peak_verdict[p],
                None => missed_beat_verdict(a),
            };
            let Some(predicted) = predicted else { continue };
            let actual = label == BeatLabel::Arrhythmia;
            counts.record(predicted == Verdict::Arrhythmia, actual);
            scored.push(VerdictRow {
                record: self.name.clone(),
                sample_index: pos,
                truth: Some(Verdict::from_flag(actual)),
                predicted,
            });
        }
        for (p, &pos) in self.peaks.iter().enumerate() {
            if pos < from || self.peak_annotation[p].is_some() {
                continue;
            }
            if peak_verdict[p] == Some(Verdict::Arrhythmia) {
                counts.fp += 1;
                scored.push(VerdictRow {
                    record: self.name.clone(),
                    sample_index: pos,
                    truth: None,
                    predicted: Verdict::Arrhythmia,
                });
            }
        }
        scored.sort_by_key(|r| (r.sample_index, r.truth.is_none()));
        rows.extend(scored);
        counts
    }
}

enum Classifier {
    Network(MlpModel),
    /// Training data held a single class; every beat gets that class.
    Constant(BeatClass),
}

impl Classifier {
    fn predict(&self, x: &[f64]) -> Result<BeatClass, NnError> {
        match self {
            Classifier::Network(m) => m.predict(x),
            Classifier::Constant(c) => Ok(*c),
        }
    }
}

fn feature_error(record: &str) -> impl Fn(FeatureError) -> ExperimentError + '_ {
    move |source| ExperimentError::Features {
        record: record.to_string(),
        source,
    }
}

pub fn class_of(label: BeatLabel) -> BeatClass {
    if label == BeatLabel::Arrhythmia {
        BeatClass::Arrhythmia
    } else {
        BeatClass::Normal
    }
}

fn fit_classifier(
    label: &str,
    samples: &[Sample],
    config: &PipelineConfig,
    format: QFormat,
    runs: &mut Vec<TrainingRun>,
) -> Result<Classifier, ExperimentError> {
    let seed = config.training.seed.ok_or(ExperimentError::MissingSeed)?;
    let (hidden_act, output_act) = config.classifier.mode.activations();
    let shape = MlpModel::zeros(
        DEFAULT_INPUTS,
        config.classifier.hidden,
        DEFAULT_OUTPUTS,
        hidden_act,
        output_act,
    )?;
    let options = TrainOptions {
        max_epochs: config.training.max_epochs,
        seed,
        ..TrainOptions::default()
    };
    let (model, report) = match train(&shape, samples, &options) {
        Ok(r) => r,
        Err(NnError::SingleClass) => {
            let only = samples[0].class();
            log::warn!("{label}: training data holds only {only:?} beats; predicting that class throughout");
            return Ok(Classifier::Constant(only));
        }
        Err(e) => return Err(e.into()),
    };
    runs.push(TrainingRun {
        label: label.to_string(),
        report,
    });
    Ok(Classifier::Network(match config.classifier.mode {
        ClassifierMode::Fixed => quantize_model(&model, format).0,
        _ => model,
    }))
}

fn read_artifact(path: &Path) -> Result<String, ExperimentError> {
    fs::read_to_string(path).map_err(|e| ExperimentError::Artifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn load_pretrained(config: &PipelineConfig) -> Result<Option<(PcaModel, Classifier)>, ExperimentError> {
    let (Some(model_path), Some(pca_path)) = (&config.classifier.model, &config.classifier.pca) else {
        return Ok(None);
    };
    let model = model_from_text(&read_artifact(model_path)?).map_err(|e| ExperimentError::Artifact {
        path: model_path.clone(),
        message: e.to_string(),
    })?;
    let pca = PcaModel::from_text(&read_artifact(pca_path)?).map_err(|e| ExperimentError::Artifact {
        path: pca_path.clone(),
        message: e.to_string(),
    })?;
    Ok(Some((pca, Classifier::Network(model))))
}

fn samples_for(pca: &PcaModel, contexts: &[&BeatContext], record: &str) -> Result<Vec<Sample>, ExperimentError> {
    contexts
        .iter()
        .map(|c| {
            let fv = featurize(pca, c).map_err(feature_error(record))?;
            Ok(Sample::labelled(fv.to_array().to_vec(), class_of(c.label)))
        })
        .collect()
}

fn network_experiment(
    prepared: &[PreparedRecord],
    config: &PipelineConfig,
    runs: &mut Vec<TrainingRun>,
    rows: &mut Vec<VerdictRow>,
) -> Result<Vec<ConfusionCounts>, ExperimentError> {
    let format = config.q_format()?;
    let contexts: Vec<Vec<(usize, BeatContext)>> = prepared.iter().map(PreparedRecord::contexts).collect();
    let pretrained = load_pretrained(config)?;

    let fit = |label: &str, train_ctx: Vec<&BeatContext>, runs: &mut Vec<TrainingRun>| {
        let windows: Vec<_> = train_ctx.iter().map(|c| c.window.clone()).collect();
        let pca = fit_pca(&windows, PCA_COMPONENTS).map_err(feature_error(label))?;
        let samples = samples_for(&pca, &train_ctx, label)?;
        if samples.is_empty() {
            return Err(ExperimentError::Nn(NnError::EmptyDataset));
        }
        let classifier = fit_classifier(label, &samples, config, format, runs)?;
        Ok::<_, ExperimentError>((pca, classifier))
    };

    let mut per_record_models: Vec<(PcaModel, Classifier)> = Vec::new();
    let shared = match (pretrained, config.training.split) {
        (Some(p), _) => Some(p),
        (None, SplitPolicy::Pooled) => {
            let train_ctx = prepared
                .iter()
                .zip(&contexts)
                .flat_map(|(p, c)| p.training_windows(c))
                .collect();
            Some(fit("pooled", train_ctx, runs)?)
        }
        (None, SplitPolicy::PerRecord) => {
            for (p, c) in prepared.iter().zip(&contexts) {
                per_record_models.push(fit(&p.name, p.training_windows(c).collect(), runs)?);
            }
            None
        }
    };

    let mut counts = Vec::with_capacity(prepared.len());
    for (i, (p, ctx)) in prepared.iter().zip(&contexts).enumerate() {
        let (pca, classifier) = match &shared {
            Some(s) => s,
            None => &per_record_models[i],
        };
        let mut verdicts = vec![None; p.peaks.len()];
        for (peak, c) in ctx {
            if c.window.r_index < p.split {
                continue;
            }
            let fv = featurize(pca, c).map_err(feature_error(&p.name))?;
            let class = classifier.predict(&fv.to_array())?;
            verdicts[*peak] = Some(Verdict::from_flag(class == BeatClass::Arrhythmia));
        }
        counts.push(p.score(p.split, &verdicts, |_| Some(Verdict::Normal), rows));
    }
    Ok(counts)
}

fn self_learner_experiment(
    prepared: &[PreparedRecord],
    config: &PipelineConfig,
    rows: &mut Vec<VerdictRow>,
) -> Result<Vec<ConfusionCounts>, ExperimentError> {
    let tol = config.self_learner.tolerance;
    let mut counts = Vec::with_capacity(prepared.len());
    for p in prepared {
        let err = |source| ExperimentError::SelfLearn {
            record: p.name.clone(),
            source,
        };
        let mut learner = SelfLearner::new(tol).map_err(err)?;
        let mut verdicts = vec![None; p.peaks.len()];
        let mut missing = Vec::new();
        let mut monitor_start = None;
        for (i, &peak) in p.peaks.iter().enumerate() {
            let monitoring = learner.phase() == Phase::Monitoring;
            let event = learner.observe_peak(peak);
            if monitoring {
                monitor_start.get_or_insert(peak);
                let flagged = matches!(&event, Some(e) if e.kind == AnomalyKind::IntervalDeviation);
                verdicts[i] = Some(Verdict::from_flag(flagged));
            }
            if let Some(e) = event.filter(|e| e.kind == AnomalyKind::MissingBeat) {
                missing.push(e.sample_index);
            }
        }
        let Some(start) = monitor_start else {
            return Err(err(SelfLearnError::NoStableRhythm {
                seen: p.peaks.len().saturating_sub(1),
            }));
        };
        // a missing beat belongs to the annotated beat that ends the gap
        let mut flagged_by_gap = vec![false; p.truth.len()];
        for s in &missing {
            let a = p.truth.partition_point(|b| b.0 < *s);
            if let Some(f) = flagged_by_gap.get_mut(a) {
                *f = true;
            }
        }
        for (a, f) in flagged_by_gap.iter().enumerate() {
            if *f {
                if let Some(peak) = p.annotation_peak[a] {
                    verdicts[peak] = Some(Verdict::Arrhythmia);
                }
            }
        }
        counts.push(p.score(start, &verdicts, |a| Some(Verdict::from_flag(flagged_by_gap[a])), rows));
    }
    Ok(counts)
}

/// Runs the configured pipeline over in-memory records. Output depends only
/// on the records and the configuration.
pub fn run_experiment_on(records: &[EcgRecord], config: &PipelineConfig) -> Result<ExperimentResult, ExperimentError> {
    config.validate()?;
    if records.is_empty() {
        return Err(ExperimentError::NoRecords);
    }
    let prepared = records
        .iter()
        .map(|r| PreparedRecord::new(r, config))
        .collect::<Result<Vec<_>, _>>()?;
    let mut training = Vec::new();
    let mut verdicts = Vec::new();
    let counts = if config.classifier.mode.trains() {
        network_experiment(&prepared, config, &mut training, &mut verdicts)?
    } else {
        self_learner_experiment(&prepared, config, &mut verdicts)?
    };
    let echo = config.echo();
    let per_record = prepared
        .iter()
        .zip(&counts)
        .map(|(p, &c)| {
            let report = compute_metrics(c).map_err(|source| ExperimentError::Metrics {
                scope: p.name.clone(),
                source,
            })?;
            Ok(RecordReport {
                record: p.name.clone(),
                report: report.with_config(echo.clone()),
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let pooled = compute_metrics(counts.iter().copied().sum())
        .map_err(|source| ExperimentError::Metrics {
            scope: "pooled".into(),
            source,
        })?
        .with_config(echo);
    Ok(ExperimentResult {
        per_record,
        pooled,
        training,
        verdicts,
    })
}

/// Classification quality of one quantization of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub format: QFormat,
    /// Beats whose fixed-point class differs from the annotation.
    pub false_classifications: usize,
    /// Beats whose fixed-point class differs from the real-valued PLA network.
    pub disagreements: usize,
    pub saturated_parameters: usize,
}

/// Quantizes `model` (PLA activations) at each fraction width and counts
/// errors on `data`. `total_bits` stays fixed.
pub fn fraction_bit_sweep(
    model: &MlpModel,
    data: &[Sample],
    total_bits: u32,
    frac_bits: impl IntoIterator<Item = u32>,
) -> Result<Vec<SweepPoint>, ExperimentError> {
    let (hidden, output) = ClassifierMode::Pla.activations();
    let mut reference = crate::nn::to_real(model);
    reference.hidden_activation = hidden;
    reference.output_activation = output;
    let expected = data
        .iter()
        .map(|s| reference.predict(&s.input))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::new();
    for f in frac_bits {
        let format = QFormat::new(total_bits, f).map_err(ConfigError::from)?;
        let (q, report) = quantize_model(&reference, format);
        let mut false_classifications = 0;
        let mut disagreements = 0;
        for (s, &e) in data.iter().zip(&expected) {
            let c = q.predict(&s.input)?;
            false_classifications += usize::from(c != s.class());
            disagreements += usize::from(c != e);
        }
        out.push(SweepPoint {
            format,
            false_classifications,
            disagreements,
            saturated_parameters: report.saturated,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synthesize_ecg, SynthConfig};
    use crate::wfdb::{parse_header, Annotation};

    fn pulse_record(positions: &[usize], arrhythmic: &[usize], len: usize) -> EcgRecord {
        let x = crate::synth::pulse_train(positions, len, 1000.0, 4.0);
        let header = parse_header(format!("p 1 500 {len}\np.dat 212 200 11 0\n").as_bytes()).unwrap();
        EcgRecord {
            header,
            signals: vec![x.iter().map(|v| v.round() as i16).collect()],
            annotations: positions
                .iter()
                .map(|&p| Annotation::new(p, if arrhythmic.contains(&p) { 5 } else { 1 }))
                .collect(),
        }
    }

    fn self_learner_config() -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        cfg.classifier.mode = ClassifierMode::SelfLearner;
        cfg
    }

    #[test]
    fn self_learner_on_dropout_fixture() {
        let mut peaks: Vec<usize> = (0..40).map(|k| 200 + 345 * k).collect();
        peaks.remove(25);
        peaks.remove(12);
        // the beat ending each gap is the annotated anomaly
        let after_gaps = [peaks[12], peaks[24]];
        let rec = pulse_record(&peaks, &after_gaps, 200 + 345 * 40);
        for mode in [DetectorMode::Annotations, DetectorMode::UniDwt] {
            let mut cfg = self_learner_config();
            cfg.detector.mode = mode;
            let res = run_experiment_on(std::slice::from_ref(&rec), &cfg).unwrap();
            let c = res.pooled.counts;
            assert_eq!((c.tp, c.fn_, c.fp), (2, 0, 0), "{mode}");
            assert_eq!(res.pooled.sensitivity, Some(1.into()));
            assert_eq!(res.pooled.specificity, Some(1.into()));
        }
    }

    #[test]
    fn network_experiment_is_deterministic() {
        let ecg = synthesize_ecg(&SynthConfig {
            n_beats: 400,
            seed: 5,
            ..SynthConfig::default()
        });
        let rec = ecg.to_record("s5");
        let mut cfg = PipelineConfig::default();
        cfg.training.seed = Some(3);
        cfg.training.max_epochs = 60;
        let a = run_experiment_on(std::slice::from_ref(&rec), &cfg).unwrap();
        let b = run_experiment_on(std::slice::from_ref(&rec), &cfg).unwrap();
        assert_eq!(a.report_text(), b.report_text());
        assert_eq!(a.verdicts_csv(), b.verdicts_csv());
        assert_eq!(a.training.len(), 1);
        assert!(a.pooled.counts.total() > 150);
        assert!(a.report_text().contains("frac_bits = 12"));
    }

    #[test]
    fn training_without_seed_fails() {
        let rec = synthesize_ecg(&SynthConfig::default()).to_record("s");
        let err = run_experiment_on(&[rec], &PipelineConfig::default()).unwrap_err();
        assert!(matches!(err, ExperimentError::MissingSeed));
    }

    #[test]
    fn missing_files_are_listed() {
        let mut cfg = PipelineConfig::default();
        cfg.data.records = vec!["/nonexistent/a".into(), "/nonexistent/b".into()];
        let err = run_experiment(&cfg).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("/nonexistent/a.hea") && text.contains("/nonexistent/b.hea"));
    }
}
