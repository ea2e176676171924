//! Per-beat feature vectors: a PCA projection of the morphology window around
//! each R peak plus the preceding and following R-R intervals.

mod pca;

use std::fmt::Write as _;

use thiserror::Error;

use crate::wfdb::BeatLabel;

pub use pca::{fit_pca, fit_pca_rows, PcaModel};

pub const HALF_WINDOW: usize = 90;
pub const WINDOW_LEN: usize = 2 * HALF_WINDOW + 1;
pub const PCA_COMPONENTS: usize = 10;
pub const FEATURE_LEN: usize = PCA_COMPONENTS + 2;
/// R-R intervals are divided by this many seconds.
pub const RR_SCALE_S: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("beat at {r_index} too close to the record edge (length {len}); skipped")]
    EdgeBeat { r_index: usize, len: usize },
    #[error("need at least {need} windows, have {have}")]
    TooFewWindows { have: usize, need: usize },
    #[error("cannot fit {k} components to {dim}-dimensional data")]
    InvalidComponents { k: usize, dim: usize },
    #[error("windows have different lengths")]
    RaggedInput,
    #[error("R-R interval must be positive, got {0}")]
    NonPositiveInterval(f64),
    #[error("expected {expected} projection values, got {got}")]
    ProjectionLength { expected: usize, got: usize },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeatWindow {
    /// `WINDOW_LEN` samples centred on the peak, mean removed.
    pub samples: Vec<f64>,
    pub r_index: usize,
}

/// Cuts the window `[r - 90, r + 90]` and subtracts its mean.
pub fn window_beat(signal: &[f64], r_index: usize) -> Result<BeatWindow, FeatureError> {
    if r_index < HALF_WINDOW || r_index + HALF_WINDOW >= signal.len() {
        return Err(FeatureError::EdgeBeat {
            r_index,
            len: signal.len(),
        });
    }
    let raw = &signal[r_index - HALF_WINDOW..=r_index + HALF_WINDOW];
    let mean = raw.iter().sum::<f64>() / WINDOW_LEN as f64;
    Ok(BeatWindow {
        samples: raw.iter().map(|v| v - mean).collect(),
        r_index,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub pca: [f64; PCA_COMPONENTS],
    /// Scaled preceding R-R interval.
    pub rr_prev: f64,
    /// Scaled following R-R interval.
    pub rr_next: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; FEATURE_LEN] {
        let mut out = [0.0; FEATURE_LEN];
        out[..PCA_COMPONENTS].copy_from_slice(&self.pca);
        out[PCA_COMPONENTS] = self.rr_prev;
        out[PCA_COMPONENTS + 1] = self.rr_next;
        out
    }

    pub fn from_array(values: [f64; FEATURE_LEN]) -> Self {
        let mut pca = [0.0; PCA_COMPONENTS];
        pca.copy_from_slice(&values[..PCA_COMPONENTS]);
        FeatureVector {
            pca,
            rr_prev: values[PCA_COMPONENTS],
            rr_next: values[PCA_COMPONENTS + 1],
        }
    }
}

/// Scales a raw projection by `projection_scale` and the R-R intervals
/// (seconds) by `1 / RR_SCALE_S`.
pub fn build_feature_vector(
    projection: &[f64],
    projection_scale: f64,
    rr_prev_s: f64,
    rr_next_s: f64,
) -> Result<FeatureVector, FeatureError> {
    if projection.len() != PCA_COMPONENTS {
        return Err(FeatureError::ProjectionLength {
            expected: PCA_COMPONENTS,
            got: projection.len(),
        });
    }
    for rr in [rr_prev_s, rr_next_s] {
        if !(rr > 0.0) {
            return Err(FeatureError::NonPositiveInterval(rr));
        }
    }
    let mut pca = [0.0; PCA_COMPONENTS];
    for (p, v) in pca.iter_mut().zip(projection) {
        *p = v * projection_scale;
    }
    Ok(FeatureVector {
        pca,
        rr_prev: rr_prev_s / RR_SCALE_S,
        rr_next: rr_next_s / RR_SCALE_S,
    })
}

/// A beat that can be featurized: it has neighbours on both sides and its
/// window fits in the record.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatContext {
    pub window: BeatWindow,
    pub rr_prev_s: f64,
    pub rr_next_s: f64,
    pub label: BeatLabel,
}

/// Windows and R-R context for every interior beat. Beats at the record edges
/// or without both neighbours are dropped.
pub fn beat_contexts(signal: &[f64], beats: &[(usize, BeatLabel)], fs: f64) -> Vec<BeatContext> {
    let mut out = Vec::with_capacity(beats.len());
    for w in beats.windows(3) {
        let (prev, (r, label), next) = (w[0].0, w[1], w[2].0);
        if prev >= r || r >= next {
            continue;
        }
        let Ok(window) = window_beat(signal, r) else {
            continue;
        };
        out.push(BeatContext {
            window,
            rr_prev_s: (r - prev) as f64 / fs,
            rr_next_s: (next - r) as f64 / fs,
            label,
        });
    }
    out
}

pub fn featurize(model: &PcaModel, beat: &BeatContext) -> Result<FeatureVector, FeatureError> {
    build_feature_vector(
        &model.project_window(&beat.window),
        model.projection_scale(),
        beat.rr_prev_s,
        beat.rr_next_s,
    )
}

/// One row of a feature file.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub record: String,
    pub r_index: usize,
    pub features: FeatureVector,
    pub label: BeatLabel,
}

fn label_name(label: BeatLabel) -> &'static str {
    match label {
        BeatLabel::Normal => "normal",
        BeatLabel::Arrhythmia => "arrhythmia",
        BeatLabel::Ignore => "ignore",
    }
}

pub fn parse_label(s: &str) -> Option<BeatLabel> {
    match s {
        "normal" => Some(BeatLabel::Normal),
        "arrhythmia" => Some(BeatLabel::Arrhythmia),
        "ignore" => Some(BeatLabel::Ignore),
        _ => None,
    }
}

pub const FEATURE_FILE_HEADER: &str = "record,r_index,pc0,pc1,pc2,pc3,pc4,pc5,pc6,pc7,pc8,pc9,rr_prev,rr_next,label";

/// Comma-separated, one beat per row, with a header line.
pub fn write_feature_rows(rows: &[FeatureRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 200);
    out.push_str(FEATURE_FILE_HEADER);
    out.push('\n');
    for row in rows {
        let _ = write!(out, "{},{}", row.record, row.r_index);
        for v in row.features.to_array() {
            let _ = write!(out, ",{v:?}");
        }
        let _ = writeln!(out, ",{}", label_name(row.label));
    }
    out
}

pub fn parse_feature_rows(text: &str) -> Result<Vec<FeatureRow>, FeatureError> {
    let bad = |line: usize, message: String| FeatureError::Format { line, message };
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let line = line.trim();
        if line.is_empty() || line == FEATURE_FILE_HEADER {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != FEATURE_LEN + 3 {
            return Err(bad(
                n,
                format!("expected {} fields, found {}", FEATURE_LEN + 3, fields.len()),
            ));
        }
        let r_index = fields[1]
            .parse()
            .map_err(|_| bad(n, format!("bad r_index `{}`", fields[1])))?;
        let mut values = [0.0; FEATURE_LEN];
        for (v, f) in values.iter_mut().zip(&fields[2..2 + FEATURE_LEN]) {
            *v = f
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| bad(n, format!("bad feature value `{f}`")))?;
        }
        let label_field = fields[FEATURE_LEN + 2];
        let label = parse_label(label_field).ok_or_else(|| bad(n, format!("bad label `{label_field}`")))?;
        rows.push(FeatureRow {
            record: fields[0].to_string(),
            r_index,
            features: FeatureVector::from_array(values),
            label,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn window_exact_fit_and_edges() {
        let signal: Vec<f64> = (0..181).map(|i| i as f64).collect();
        let w = window_beat(&signal, 90).unwrap();
        assert_eq!(w.samples.len(), WINDOW_LEN);
        assert_eq!(w.samples[0], -90.0);
        assert_eq!(w.samples[180], 90.0);
        assert!(matches!(window_beat(&signal, 50), Err(FeatureError::EdgeBeat { .. })));
        assert!(window_beat(&signal, 91).is_err());
    }

    #[test]
    fn constant_window_is_zero() {
        let w = window_beat(&[4.5; 400], 200).unwrap();
        assert!(w.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn feature_vector_examples() {
        let fv = build_feature_vector(&[0.0; 10], 0.3, 0.69, 0.69).unwrap();
        assert_eq!(fv.to_array().len(), 12);
        assert_eq!(fv.to_array()[..10], [0.0; 10]);
        assert_eq!((fv.rr_prev, fv.rr_next), (0.345, 0.345));
        assert!(matches!(
            build_feature_vector(&[0.0; 10], 1.0, 0.0, 0.7),
            Err(FeatureError::NonPositiveInterval(_))
        ));
        assert!(build_feature_vector(&[0.0; 9], 1.0, 0.7, 0.7).is_err());
        let fv = build_feature_vector(&[2.0; 10], 0.25, 1.0, 0.5).unwrap();
        assert_eq!(fv.pca, [0.5; 10]);
    }

    #[test]
    fn contexts_skip_edges() {
        let signal = vec![0.0; 1000];
        let beats = vec![
            (50, BeatLabel::Normal),
            (300, BeatLabel::Normal),
            (600, BeatLabel::Arrhythmia),
            (950, BeatLabel::Normal),
        ];
        let ctx = beat_contexts(&signal, &beats, 500.0);
        assert_eq!(ctx.len(), 2);
        assert_eq!(ctx[0].window.r_index, 300);
        assert_eq!(ctx[0].rr_prev_s, 0.5);
        assert_eq!(ctx[1].label, BeatLabel::Arrhythmia);
        assert_eq!(ctx[1].rr_next_s, 0.7);
    }

    #[test]
    fn feature_file_rejects_garbage() {
        assert!(parse_feature_rows("a,1,2\n").is_err());
        let mut good = write_feature_rows(&[FeatureRow {
            record: "100".into(),
            r_index: 7,
            features: FeatureVector::from_array([0.5; 12]),
            label: BeatLabel::Normal,
        }]);
        assert_eq!(parse_feature_rows(&good).unwrap().len(), 1);
        good = good.replace("normal", "weird");
        assert!(parse_feature_rows(&good).is_err());
    }

    proptest! {
        #[test]
        fn feature_rows_round_trip(values in proptest::array::uniform12(-1e3f64..1e3), r in 0usize..1_000_000, arr in any::<bool>()) {
            let row = FeatureRow {
                record: "rec".into(),
                r_index: r,
                features: FeatureVector::from_array(values),
                label: if arr { BeatLabel::Arrhythmia } else { BeatLabel::Normal },
            };
            let parsed = parse_feature_rows(&write_feature_rows(std::slice::from_ref(&row))).unwrap();
            prop_assert_eq!(parsed, vec![row]);
        }
    }
}
