mod manifest;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ecg_arrhythmia::activation::{max_pla_error, platanh, PLA_BORDERS};
use ecg_arrhythmia::config::{ClassifierMode, DetectorMode, PipelineConfig, SplitPolicy};
use ecg_arrhythmia::dsp::{detect_r_peaks_with, DetectorParams};
use ecg_arrhythmia::features::{
    featurize, fit_pca, parse_feature_rows, write_feature_rows, FeatureRow, PcaModel, HALF_WINDOW, PCA_COMPONENTS,
    WINDOW_LEN,
};
use ecg_arrhythmia::fixed::QFormat;
use ecg_arrhythmia::metrics::{
    class_of, compute_metrics, fraction_bit_sweep, run_experiment, ConfusionCounts, PreparedRecord,
};
use ecg_arrhythmia::nn::{
    model_from_text, model_to_text, quantize_model, train, BeatClass, MlpModel, Sample, TrainOptions, DEFAULT_HIDDEN,
    DEFAULT_INPUTS, DEFAULT_OUTPUTS,
};
use ecg_arrhythmia::selflearn::{missing_beat_timeout, monitor, write_anomaly_log, SelfLearner};
use ecg_arrhythmia::synth::{pulse_fixture, synthesize_ecg, SynthConfig};
use ecg_arrhythmia::wfdb::{code_symbol, label_beat, read_record, write_record, BeatLabel, EcgRecord};

use manifest::Run;

const FIXED_LAYOUT: &str = "\
Fixed feature layout: 181-sample beat window (90 samples either side of R),
10 principal components plus the previous and next R-R intervals (12 inputs).
Defaults: 6 hidden neurons, Q format W=24 F=12, self-learner tolerance 0.15.

Every command that writes files also writes <command>.manifest.toml to its
output directory: the argv, resolved settings and SHA-256 of inputs and outputs.";

#[derive(Parser)]
#[command(name = "ecg-arrhythmia", version, about = "ECG arrhythmia detection pipeline", after_help = FIXED_LAYOUT)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode a WFDB record and dump its samples and annotations as CSV.
    Ingest {
        #[command(flatten)]
        record: RecordArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detect R peaks.
    Detect {
        #[command(flatten)]
        record: RecordArg,
        #[command(flatten)]
        detector: DetectorArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cut beat windows, fit or apply a PCA basis, write feature files.
    Features(FeaturesArgs),
    /// Train the classifier on a feature file.
    Train(TrainArgs),
    /// Classify the beats of a feature file.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the self-learning R-R monitor over one record.
    Selflearn {
        #[command(flatten)]
        record: RecordArg,
        /// Allowed deviation as a fraction of the learned R-R interval.
        #[arg(long, default_value_t = 0.15)]
        tolerance: f64,
        #[arg(long)]
        peaks_from_annotations: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a configured experiment and write metrics reports.
    Evaluate(EvaluateArgs),
    /// Count classification errors of a quantized network per fraction width.
    SweepFractionBits(SweepArgs),
    /// Maximum error of the piecewise-linear tanh over a grid.
    ActivationError {
        #[arg(long, default_value_t = 1e-4)]
        grid_step: f64,
        /// The grid covers [-range, range].
        #[arg(long, default_value_t = 6.0)]
        range: f64,
        /// Also write the error curve here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic WFDB record.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RecordArg {
    /// Record base path, e.g. mitdb/100 (with or without .hea).
    #[arg(long)]
    record: PathBuf,
    /// Signal channel to analyse.
    #[arg(long, default_value_t = 0)]
    channel: usize,
}

#[derive(Args)]
struct DetectorArgs {
    /// Use annotated beat positions instead of detecting peaks.
    #[arg(long)]
    peaks_from_annotations: bool,
    /// Trigger threshold as a fraction of the rolling energy maximum.
    #[arg(long, default_value_t = 0.4)]
    threshold_ratio: f64,
    /// Rolling-maximum window, seconds.
    #[arg(long, default_value_t = 2.0)]
    window_s: f64,
    /// Half-width of the raw-signal peak search, milliseconds.
    #[arg(long, default_value_t = 50.0)]
    search_ms: f64,
    #[arg(long, default_value_t = 200.0)]
    refractory_ms: f64,
}

#[derive(Args)]
struct FeaturesArgs {
    /// Record base paths; repeat for several records.
    #[arg(long = "record", required = true)]
    records: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    channel: usize,
    #[arg(long)]
    peaks_from_annotations: bool,
    /// Fraction of each record (from the start) used for training.
    #[arg(long, default_value_t = 0.5)]
    train_fraction: f64,
    /// Apply this PCA basis instead of fitting one on the training beats.
    #[arg(long)]
    pca: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum NetMode {
    Exact,
    Pla,
    Fixed,
}

impl NetMode {
    fn classifier(self) -> ClassifierMode {
        match self {
            NetMode::Exact => ClassifierMode::Exact,
            NetMode::Pla => ClassifierMode::Pla,
            NetMode::Fixed => ClassifierMode::Fixed,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    features: PathBuf,
    /// Seed for weight initialization (required).
    #[arg(long)]
    seed: u64,
    /// exact: tanh/Ntanh; pla: PLA tanh/Ntanh; fixed: pla then quantized.
    #[arg(long, value_enum, default_value_t = NetMode::Fixed)]
    mode: NetMode,
    /// Hidden neurons.
    #[arg(long, default_value_t = DEFAULT_HIDDEN)]
    hidden: usize,
    /// Fixed-point word length W.
    #[arg(long, default_value_t = 24)]
    total_bits: u32,
    /// Fixed-point fraction bits F.
    #[arg(long, default_value_t = 12)]
    frac_bits: u32,
    #[arg(long, default_value_t = 500)]
    max_epochs: usize,
    /// Train on the data as given, without replicating minority beats.
    #[arg(long)]
    no_balance: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// TOML pipeline configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides training.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides detector.mode (ann or uni-dwt).
    #[arg(long)]
    detector: Option<DetectorMode>,
    /// Overrides classifier.mode (exact, pla, fixed or self-learner).
    #[arg(long)]
    classifier: Option<ClassifierMode>,
    /// Overrides training.split (per-record or pooled).
    #[arg(long)]
    split: Option<SplitPolicy>,
    /// Overrides self_learner.tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Replaces data.records; repeat for several records.
    #[arg(long = "record")]
    records: Vec<PathBuf>,
    /// Writes report.txt, verdicts.csv, mse.csv and config.toml here.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Test feature file.
    #[arg(long)]
    features: PathBuf,
    /// Trained network to quantize.
    #[arg(long, conflicts_with = "train")]
    model: Option<PathBuf>,
    /// Train a PLA network per hidden size on this feature file instead.
    #[arg(long, requires = "seed")]
    train: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Hidden sizes to train with --train, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "6")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 500)]
    max_epochs: usize,
    #[arg(long, default_value_t = 6)]
    min_frac: u32,
    #[arg(long, default_value_t = 14)]
    max_frac: u32,
    /// Word length W, held fixed while F varies.
    #[arg(long, default_value_t = 24)]
    total_bits: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    /// Normal and premature ventricular beats with noise and baseline wander.
    Ecg,
    /// Gaussian pulses at a fixed period with optional dropped peaks.
    Pulses,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value_t = SynthKind::Ecg)]
    kind: SynthKind,
    #[arg(long, default_value = "synth")]
    name: String,
    /// Sampling frequency; defaults to 360 for ecg and 500 for pulses.
    #[arg(long)]
    fs: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// ecg: number of beats.
    #[arg(long, default_value_t = 300)]
    beats: usize,
    /// ecg: probability of a ventricular beat.
    #[arg(long, default_value_t = 0.15)]
    arrhythmia_rate: f64,
    /// pulses: period in samples.
    #[arg(long, default_value_t = 345)]
    period: usize,
    /// pulses: number of pulse slots.
    #[arg(long, default_value_t = 20)]
    peaks: usize,
    /// pulses: 0-based slot to leave empty; repeatable.
    #[arg(long = "drop")]
    dropped: Vec<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn load_record(path: &Path) -> Result<EcgRecord> {
    read_record(path).with_context(|| format!("reading record {}", path.display()))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn base_config(detector: DetectorMode, channel: usize, train_fraction: f64) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.detector.mode = detector;
    cfg.data.channel = channel;
    cfg.training.train_fraction = train_fraction;
    cfg
}

fn detector_mode(from_annotations: bool) -> DetectorMode {
    if from_annotations {
        DetectorMode::Annotations
    } else {
        DetectorMode::UniDwt
    }
}

fn label_name(label: BeatLabel) -> &'static str {
    match label {
        BeatLabel::Normal => "normal",
        BeatLabel::Arrhythmia => "arrhythmia",
        BeatLabel::Ignore => "ignore",
    }
}

fn class_name(class: BeatClass) -> &'static str {
    match class {
        BeatClass::Normal => "normal",
        BeatClass::Arrhythmia => "arrhythmia",
    }
}

fn ingest(args: RecordArg, out: &Path) -> Result<()> {
    let rec = load_record(&args.record)?;
    let mut run = Run::new("ingest", out)?;
    run.record_inputs(&args.record, &rec.header.signals[0].file_name);
    let name = rec.name().to_string();

    let mut signals = String::from("sample");
    for ch in 0..rec.signals.len() {
        let _ = write!(signals, ",ch{ch}");
    }
    signals.push('\n');
    for i in 0..rec.header.n_samples {
        let _ = write!(signals, "{i}");
        for s in &rec.signals {
            let _ = write!(signals, ",{}", s[i]);
        }
        signals.push('\n');
    }
    run.write(&format!("{name}.signals.csv"), signals)?;

    let mut ann = String::from("sample_index,symbol,label\n");
    for a in &rec.annotations {
        let _ = writeln!(
            ann,
            "{},{},{}",
            a.sample_index,
            code_symbol(a.code),
            label_name(label_beat(a.code))
        );
    }
    run.write(&format!("{name}.annotations.csv"), ann)?;

    let beats = rec.labelled_beats();
    let arrhythmic = beats.iter().filter(|b| b.1 == BeatLabel::Arrhythmia).count();
    println!(
        "{name}: {} signals, {} samples at {} Hz, {} beats ({} arrhythmic)",
        rec.header.n_signals,
        rec.header.n_samples,
        rec.sampling_frequency(),
        beats.len(),
        arrhythmic
    );
    run.setting("record", args.record.display());
    run.finish()?;
    Ok(())
}

fn detect(args: RecordArg, det: DetectorArgs, out: &Path) -> Result<()> {
    let rec = load_record(&args.record)?;
    let signal = rec
        .channel_f64(args.channel)
        .with_context(|| format!("record has no channel {}", args.channel))?;
    let fs = rec.sampling_frequency();
    let mut run = Run::new("detect", out)?;
    run.record_inputs(&args.record, &rec.header.signals[0].file_name);
    let peaks = if det.peaks_from_annotations {
        rec.labelled_beats().into_iter().map(|b| b.0).collect()
    } else {
        let params = DetectorParams {
            threshold_ratio: det.threshold_ratio,
            window_s: det.window_s,
            search_ms: det.search_ms,
            refractory_ms: det.refractory_ms,
            ..DetectorParams::default()
        };
        detect_r_peaks_with(&signal, fs, &params).r_indices
    };
    let mut text = String::from("r_index,seconds\n");
    for &p in &peaks {
        let _ = writeln!(text, "{p},{}", p as f64 / fs);
    }
    run.write(&format!("{}.peaks.csv", rec.name()), text)?;
    println!("{}: {} peaks", rec.name(), peaks.len());
    run.setting("record", args.record.display());
    run.setting("channel", args.channel);
    run.setting("peaks_from_annotations", det.peaks_from_annotations);
    run.setting("threshold_ratio", det.threshold_ratio);
    run.setting("window_s", det.window_s);
    run.setting("search_ms", det.search_ms);
    run.setting("refractory_ms", det.refractory_ms);
    run.finish()?;
    Ok(())
}

fn features(args: FeaturesArgs) -> Result<()> {
    let cfg = base_config(
        detector_mode(args.peaks_from_annotations),
        args.channel,
        args.train_fraction,
    );
    cfg.validate()?;
    let mut run = Run::new("features", &args.out)?;
    let mut prepared = Vec::new();
    for path in &args.records {
        let rec = load_record(path)?;
        run.record_inputs(path, &rec.header.signals[0].file_name);
        prepared.push(PreparedRecord::new(&rec, &cfg)?);
    }
    let contexts: Vec<_> = prepared.iter().map(PreparedRecord::contexts).collect();

    let pca = match &args.pca {
        Some(path) => {
            run.input(path);
            PcaModel::from_text(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))?
        }
        None => {
            let windows: Vec<_> = prepared
                .iter()
                .zip(&contexts)
                .flat_map(|(p, c)| p.training_windows(c))
                .map(|c| c.window.clone())
                .collect();
            let pca = fit_pca(&windows, PCA_COMPONENTS).context("fitting PCA on the training beats")?;
            run.write("pca.txt", pca.to_text())?;
            pca
        }
    };
    ensure!(
        pca.dim() == WINDOW_LEN,
        "PCA basis has dimension {}, expected {WINDOW_LEN}",
        pca.dim()
    );

    let (mut train_rows, mut test_rows) = (Vec::new(), Vec::new());
    for (p, ctx) in prepared.iter().zip(&contexts) {
        for (_, c) in ctx {
            let row = FeatureRow {
                record: p.name.clone(),
                r_index: c.window.r_index,
                features: featurize(&pca, c)?,
                label: c.label,
            };
            if c.window.r_index < p.split {
                train_rows.push(row);
            } else {
                test_rows.push(row);
            }
        }
    }
    run.write("train.features.csv", write_feature_rows(&train_rows))?;
    run.write("test.features.csv", write_feature_rows(&test_rows))?;
    println!("{} training beats, {} test beats", train_rows.len(), test_rows.len());
    run.setting("channel", args.channel);
    run.setting("peaks_from_annotations", args.peaks_from_annotations);
    run.setting("train_fraction", args.train_fraction);
    run.setting("half_window", HALF_WINDOW);
    run.setting("components", PCA_COMPONENTS);
    run.finish()?;
    Ok(())
}

fn load_samples(path: &Path) -> Result<(Vec<FeatureRow>, Vec<Sample>)> {
    let rows = parse_feature_rows(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))?;
    let labelled: Vec<FeatureRow> = rows.into_iter().filter(|r| r.label != BeatLabel::Ignore).collect();
    let samples = labelled
        .iter()
        .map(|r| Sample::labelled(r.features.to_array().to_vec(), class_of(r.label)))
        .collect();
    Ok((labelled, samples))
}

fn train_network(
    samples: &[Sample],
    mode: ClassifierMode,
    hidden: usize,
    options: &TrainOptions,
) -> Result<(MlpModel, ecg_arrhythmia::nn::TrainReport)> {
    let (h, o) = mode.activations();
    let shape = MlpModel::zeros(DEFAULT_INPUTS, hidden, DEFAULT_OUTPUTS, h, o)?;
    Ok(train(&shape, samples, options)?)
}

fn mse_csv(history: &[f64]) -> String {
    let mut text = String::from("epoch,mse\n");
    for (e, m) in history.iter().enumerate() {
        let _ = writeln!(text, "{e},{m:?}");
    }
    text
}

fn train_cmd(args: TrainArgs) -> Result<()> {
    let format = QFormat::new(args.total_bits, args.frac_bits)?;
    ensure!(args.hidden > 0, "--hidden must be at least 1");
    let mut run = Run::new("train", &args.out)?;
    run.input(&args.features);
    let (_, samples) = load_samples(&args.features)?;
    let options = TrainOptions {
        max_epochs: args.max_epochs,
        seed: args.seed,
        balance: !args.no_balance,
        ..TrainOptions::default()
    };
    let mode = args.mode.classifier();
    let (model, report) = train_network(&samples, mode, args.hidden, &options)?;
    run.write("mse.csv", mse_csv(&report.mse_history))?;
    if let NetMode::Fixed = args.mode {
        run.write("model.real.txt", model_to_text(&model))?;
        let (q, qr) = quantize_model(&model, format);
        run.write("model.txt", model_to_text(&q))?;
        println!("quantized to {format}; {} parameters saturated", qr.saturated);
    } else {
        run.write("model.txt", model_to_text(&model))?;
    }
    println!(
        "{} epochs ({:?}), final MSE {:.6} on {} samples",
        report.epochs, report.stop_reason, report.final_mse, report.balanced_size
    );
    run.setting("seed", args.seed);
    run.setting("mode", mode);
    run.setting("hidden", args.hidden);
    run.setting("total_bits", args.total_bits);
    run.setting("frac_bits", args.frac_bits);
    run.setting("max_epochs", args.max_epochs);
    run.setting("balance", !args.no_balance);
    run.finish()?;
    Ok(())
}

fn infer(model_path: &Path, features_path: &Path, out: &Path) -> Result<()> {
    let mut run = Run::new("infer", out)?;
    run.input(model_path);
    run.input(features_path);
    let model =
        model_from_text(&read_text(model_path)?).with_context(|| format!("parsing {}", model_path.display()))?;
    let rows = parse_feature_rows(&read_text(features_path)?)
        .with_context(|| format!("parsing {}", features_path.display()))?;
    let mut text = String::from("record,r_index,truth,predicted\n");
    let mut counts = ConfusionCounts::default();
    for r in &rows {
        let class = model.predict(&r.features.to_array())?;
        let _ = writeln!(
            text,
            "{},{},{},{}",
            r.record,
            r.r_index,
            label_name(r.label),
            class_name(class)
        );
        if r.label != BeatLabel::Ignore {
            counts.record(class == BeatClass::Arrhythmia, r.label == BeatLabel::Arrhythmia);
        }
    }
    run.write("predictions.csv", text)?;
    if let Ok(report) = compute_metrics(counts) {
        print!("{report}");
        run.write("metrics.txt", report.to_string())?;
    }
    run.finish()?;
    Ok(())
}

fn selflearn(args: RecordArg, tolerance: f64, from_annotations: bool, out: &Path) -> Result<()> {
    let rec = load_record(&args.record)?;
    let mut run = Run::new("selflearn", out)?;
    run.record_inputs(&args.record, &rec.header.signals[0].file_name);
    let cfg = base_config(detector_mode(from_annotations), args.channel, 0.5);
    let prepared = PreparedRecord::new(&rec, &cfg)?;
    let learner = SelfLearner::new(tolerance)?;
    let (events, end) = monitor(&prepared.peaks, learner).with_context(|| format!("monitoring {}", rec.name()))?;
    run.write(
        &format!("{}.anomalies.csv", rec.name()),
        write_anomaly_log(rec.name(), &events),
    )?;
    let st = end.st_rr().expect("monitor returns a monitoring learner");
    println!(
        "{}: {} peaks, {} anomalies, final reference {st} samples (missing-beat timeout {})",
        rec.name(),
        prepared.peaks.len(),
        events.len(),
        missing_beat_timeout(st, tolerance)
    );
    for e in &events {
        println!(
            "  {} at {} (t_rr {}, st_rr {})",
            e.kind, e.sample_index, e.observed, e.st_rr
        );
    }
    run.setting("record", args.record.display());
    run.setting("channel", args.channel);
    run.setting("tolerance", tolerance);
    run.setting("peaks_from_annotations", from_annotations);
    run.finish()?;
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let mut run = Run::new("evaluate", &args.out)?;
    run.input(&args.config);
    let mut cfg = PipelineConfig::from_toml(&read_text(&args.config)?)
        .with_context(|| format!("parsing {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        cfg.training.seed = Some(seed);
    }
    if let Some(d) = args.detector {
        cfg.detector.mode = d;
    }
    if let Some(c) = args.classifier {
        cfg.classifier.mode = c;
    }
    if let Some(s) = args.split {
        cfg.training.split = s;
    }
    if let Some(t) = args.tolerance {
        cfg.self_learner.tolerance = t;
    }
    if !args.records.is_empty() {
        cfg.data.records = args.records;
    }
    // relative record paths are taken from the config file's directory
    let config_dir = args.config.parent().unwrap_or(Path::new("."));
    for r in &mut cfg.data.records {
        if r.is_relative() && !r.with_extension("hea").exists() {
            *r = config_dir.join(&*r);
        }
    }
    cfg.validate()?;
    if cfg.classifier.mode.trains() && cfg.classifier.model.is_none() && cfg.training.seed.is_none() {
        bail!("training needs a seed: set training.seed in the config or pass --seed");
    }
    let result = run_experiment(&cfg)?;
    for r in &cfg.data.records {
        let hea = r.with_extension("hea");
        if let Ok(h) = ecg_arrhythmia::wfdb::parse_header(&fs::read(&hea)?) {
            run.record_inputs(r, &h.signals[0].file_name);
        }
    }
    for p in [&cfg.classifier.model, &cfg.classifier.pca].into_iter().flatten() {
        run.input(p);
    }
    run.write("config.toml", cfg.to_toml())?;
    run.write("report.txt", result.report_text())?;
    run.write("verdicts.csv", result.verdicts_csv())?;
    run.write("mse.csv", result.mse_csv())?;
    print!("{}", result.pooled);
    for (k, v) in cfg.echo() {
        run.setting(&k, v);
    }
    run.finish()?;
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    ensure!(args.min_frac <= args.max_frac, "--min-frac exceeds --max-frac");
    let mut run = Run::new("sweep-fraction-bits", &args.out)?;
    run.input(&args.features);
    let (_, test) = load_samples(&args.features)?;
    ensure!(!test.is_empty(), "no labelled beats in {}", args.features.display());
    let models: Vec<(usize, MlpModel)> = match (&args.model, &args.train) {
        (Some(path), _) => {
            run.input(path);
            let m = model_from_text(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))?;
            vec![(m.hidden, m)]
        }
        (None, Some(train_path)) => {
            run.input(train_path);
            let (_, samples) = load_samples(train_path)?;
            let options = TrainOptions {
                max_epochs: args.max_epochs,
                seed: args.seed.expect("clap enforces --seed with --train"),
                ..TrainOptions::default()
            };
            let mut out = Vec::new();
            for &h in &args.hidden {
                ensure!(h > 0, "hidden sizes must be positive");
                out.push((h, train_network(&samples, ClassifierMode::Pla, h, &options)?.0));
            }
            out
        }
        (None, None) => bail!("give --model, or --train with --seed"),
    };
    let mut text = String::from("hidden,total_bits,frac_bits,false_classifications,disagreements,saturated,beats\n");
    for (h, model) in &models {
        let points = fraction_bit_sweep(model, &test, args.total_bits, args.min_frac..=args.max_frac)?;
        for p in points {
            let _ = writeln!(
                text,
                "{h},{},{},{},{},{},{}",
                p.format.total_bits(),
                p.format.frac_bits(),
                p.false_classifications,
                p.disagreements,
                p.saturated_parameters,
                test.len()
            );
        }
    }
    print!("{text}");
    run.write("sweep.csv", text)?;
    run.setting("total_bits", args.total_bits);
    run.setting("frac_bits", format!("{}..={}", args.min_frac, args.max_frac));
    if let Some(seed) = args.seed {
        run.setting("seed", seed);
    }
    run.finish()?;
    Ok(())
}

fn activation_error(step: f64, range: f64, out: Option<&Path>) -> Result<()> {
    ensure!(step > 0.0 && range > 0.0, "--grid-step and --range must be positive");
    let (err, x) = max_pla_error(range, step);
    println!("max |platanh - tanh| = {err:.5} at x = {x:.4} (grid step {step}, range ±{range})");
    if let Some(out) = out {
        let mut run = Run::new("activation-error", out)?;
        let n = (range / step).round() as i64;
        let mut text = String::from("x,tanh,platanh,error\n");
        for i in -n..=n {
            let x = i as f64 * step;
            let (t, p) = (x.tanh(), platanh(x));
            let _ = writeln!(text, "{x},{t},{p},{}", (p - t).abs());
        }
        run.write("activation_error.csv", text)?;
        let mut borders = String::from("border,platanh_left,platanh_right\n");
        for b in PLA_BORDERS {
            let _ = writeln!(borders, "{b},{},{}", platanh(b), platanh(b + 1e-12));
        }
        run.write("borders.csv", borders)?;
        run.setting("grid_step", step);
        run.setting("range", range);
        run.finish()?;
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut run = Run::new("synth", &args.out)?;
    let rec = match args.kind {
        SynthKind::Ecg => {
            let cfg = SynthConfig {
                fs: args.fs.unwrap_or(360.0),
                n_beats: args.beats,
                arrhythmia_rate: args.arrhythmia_rate,
                seed: args.seed,
                ..SynthConfig::default()
            };
            ensure!(cfg.n_beats > 0, "--beats must be positive");
            synthesize_ecg(&cfg).to_record(&args.name)
        }
        SynthKind::Pulses => {
            ensure!(
                args.period > 0 && args.peaks > 0,
                "--period and --peaks must be positive"
            );
            pulse_fixture(
                &args.name,
                args.fs.unwrap_or(500.0),
                args.period,
                args.peaks,
                &args.dropped,
            )
        }
    };
    let hea = write_record(&rec, &args.out)?;
    for ext in ["hea", "dat", "atr"] {
        run.output(hea.with_extension(ext));
    }
    println!(
        "wrote {} ({} samples, {} annotations)",
        hea.display(),
        rec.header.n_samples,
        rec.annotations.len()
    );
    run.setting(
        "kind",
        if matches!(args.kind, SynthKind::Ecg) {
            "ecg"
        } else {
            "pulses"
        },
    );
    run.setting("name", &args.name);
    run.setting("seed", args.seed);
    run.finish()?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { record, out } => ingest(record, &out),
        Command::Detect { record, detector, out } => detect(record, detector, &out),
        Command::Features(a) => features(a),
        Command::Train(a) => train_cmd(a),
        Command::Infer { model, features, out } => infer(&model, &features, &out),
        Command::Selflearn {
            record,
            tolerance,
            peaks_from_annotations,
            out,
        } => selflearn(record, tolerance, peaks_from_annotations, &out),
        Command::Evaluate(a) => evaluate(a),
        Command::SweepFractionBits(a) => sweep(a),
        Command::ActivationError { grid_step, range, out } => activation_error(grid_step, range, out.as_deref()),
        Command::Synth(a) => synth(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
