//! Confusion counts, accuracy/sensitivity/specificity/PPV, beat matching and
//! experiment runs. The positive class is arrhythmia.

mod experiment;

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};

use num_rational::Ratio;
use thiserror::Error;

pub use experiment::{
    class_of, fraction_bit_sweep, run_experiment, run_experiment_on, ExperimentError, ExperimentResult, PreparedRecord,
    RecordReport, SweepPoint, TrainingRun, Verdict, VerdictRow,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, tn, fp, fn_ }
    }

    /// Tallies one decision.
    pub fn record(&mut self, predicted_arrhythmia: bool, actual_arrhythmia: bool) {
        match (predicted_arrhythmia, actual_arrhythmia) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

impl Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, o: ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts::new(self.tp + o.tp, self.tn + o.tn, self.fp + o.fp, self.fn_ + o.fn_)
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: ConfusionCounts) {
        *self = *self + o;
    }
}

impl Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = ConfusionCounts>>(iter: I) -> Self {
        iter.fold(ConfusionCounts::default(), Add::add)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no beats were evaluated")]
    Empty,
}

/// An exact ratio, or `None` when its denominator is zero.
pub type Metric = Option<Ratio<u64>>;

fn ratio(num: u64, den: u64) -> Metric {
    (den != 0).then(|| Ratio::new(num, den))
}

/// Renders a metric as a decimal fraction with six places, or `undefined`.
pub fn format_metric(m: Metric) -> String {
    match m {
        Some(r) => format!("{:.6}", *r.numer() as f64 / *r.denom() as f64),
        None => "undefined".to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricsReport {
    pub counts: ConfusionCounts,
    pub accuracy: Metric,
    pub sensitivity: Metric,
    pub specificity: Metric,
    pub ppv: Metric,
    /// Settings that produced the counts, echoed into the rendered report.
    pub config: Vec<(String, String)>,
}

pub fn compute_metrics(counts: ConfusionCounts) -> Result<MetricsReport, MetricsError> {
    let ConfusionCounts { tp, tn, fp, fn_ } = counts;
    if counts.total() == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(MetricsReport {
        counts,
        accuracy: ratio(tp + tn, counts.total()),
        sensitivity: ratio(tp, tp + fn_),
        specificity: ratio(tn, tn + fp),
        ppv: ratio(tp, tp + fp),
        config: Vec::new(),
    })
}

impl MetricsReport {
    pub fn with_config(mut self, config: Vec<(String, String)>) -> Self {
        self.config = config;
        self
    }
}

/// `key = value` lines: counts, the four metrics as decimals and exact
/// fractions, then the configuration echo.
impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.counts;
        writeln!(f, "tp = {}", c.tp)?;
        writeln!(f, "tn = {}", c.tn)?;
        writeln!(f, "fp = {}", c.fp)?;
        writeln!(f, "fn = {}", c.fn_)?;
        for (name, m) in [
            ("accuracy", self.accuracy),
            ("sensitivity", self.sensitivity),
            ("specificity", self.specificity),
            ("ppv", self.ppv),
        ] {
            match m {
                Some(r) => writeln!(f, "{name} = {} ({}/{})", format_metric(m), r.numer(), r.denom())?,
                None => writeln!(f, "{name} = undefined")?,
            }
        }
        for (k, v) in &self.config {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// One entry of a beat alignment. Indices point into the input slices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchEntry {
    Matched {
        annotation: usize,
        prediction: usize,
    },
    /// An annotated beat with no prediction nearby.
    MissedAnnotation(usize),
    /// A prediction with no annotated beat nearby.
    ExtraPrediction(usize),
}

pub fn window_samples(window_ms: f64, fs: f64) -> usize {
    (window_ms * 1e-3 * fs).round() as usize
}

/// Pairs predictions with annotations at most `window` samples apart,
/// closest pairs first (ties to the earlier annotation, then the earlier
/// prediction). Each side is used once. Entries come back ordered by
/// sample position.
pub fn match_beats(predicted: &[usize], annotations: &[usize], window: usize) -> Vec<MatchEntry> {
    let mut candidates = Vec::new();
    for (a, &ann) in annotations.iter().enumerate() {
        let lo = predicted.partition_point(|&p| p + window < ann);
        for (p, &pred) in predicted.iter().enumerate().skip(lo) {
            if pred > ann + window {
                break;
            }
            candidates.push((pred.abs_diff(ann), a, p));
        }
    }
    candidates.sort_unstable();
    let mut ann_used = vec![None; annotations.len()];
    let mut pred_used = vec![false; predicted.len()];
    for (_, a, p) in candidates {
        if ann_used[a].is_none() && !pred_used[p] {
            ann_used[a] = Some(p);
            pred_used[p] = true;
        }
    }
    let mut out: Vec<(usize, MatchEntry)> = Vec::with_capacity(annotations.len() + predicted.len());
    for (a, m) in ann_used.iter().enumerate() {
        let entry = match m {
            Some(p) => MatchEntry::Matched {
                annotation: a,
                prediction: *p,
            },
            None => MatchEntry::MissedAnnotation(a),
        };
        out.push((annotations[a], entry));
    }
    for (p, used) in pred_used.iter().enumerate() {
        if !used {
            out.push((predicted[p], MatchEntry::ExtraPrediction(p)));
        }
    }
    out.sort_by_key(|&(pos, e)| (pos, matches!(e, MatchEntry::ExtraPrediction(_))));
    out.into_iter().map(|(_, e)| e).collect()
}
