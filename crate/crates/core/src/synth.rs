//! Synthetic ECG generation for fixtures, demos and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::wfdb::{parse_header, Annotation, BeatLabel, EcgRecord, SAMPLE_MAX, SAMPLE_MIN};

/// Gaussian pulses of height `amplitude` and width `sigma` (samples) centred
/// on each position.
pub fn pulse_train(positions: &[usize], len: usize, amplitude: f64, sigma: f64) -> Vec<f64> {
    let mut x = vec![0.0; len];
    add_waves(&mut x, positions.iter().map(|&p| (p as f64, amplitude, sigma)));
    x
}

fn add_waves(x: &mut [f64], waves: impl IntoIterator<Item = (f64, f64, f64)>) {
    for (centre, amp, sigma) in waves {
        let reach = (5.0 * sigma).ceil() as isize;
        let c = centre.round() as isize;
        for i in (c - reach).max(0)..(c + reach + 1).min(x.len() as isize) {
            let t = (i as f64 - centre) / sigma;
            x[i as usize] += amp * (-0.5 * t * t).exp();
        }
    }
}

pub(crate) fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeatKind {
    Normal,
    /// Premature, wide, no P wave, inverted T, followed by a compensatory pause.
    Ventricular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub fs: f64,
    pub n_beats: usize,
    pub mean_rr_s: f64,
    /// Probability that a beat (after the first few) is ventricular.
    pub arrhythmia_rate: f64,
    /// R amplitude in ADC units.
    pub amplitude: f64,
    /// Standard deviation of additive white noise, ADC units.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            fs: 360.0,
            n_beats: 300,
            mean_rr_s: 0.8,
            arrhythmia_rate: 0.15,
            amplitude: 800.0,
            noise_std: 10.0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticEcg {
    pub fs: f64,
    pub signal: Vec<f64>,
    pub beats: Vec<(usize, BeatKind)>,
}

impl SyntheticEcg {
    pub fn labelled_beats(&self) -> Vec<(usize, BeatLabel)> {
        self.beats
            .iter()
            .map(|&(i, k)| {
                let label = match k {
                    BeatKind::Normal => BeatLabel::Normal,
                    BeatKind::Ventricular => BeatLabel::Arrhythmia,
                };
                (i, label)
            })
            .collect()
    }

    /// Packs the signal into a single-channel format-212 record with `N`/`V`
    /// annotations.
    pub fn to_record(&self, name: &str) -> EcgRecord {
        let header_text = format!(
            "{name} 1 {} {}\n{name}.dat 212 200 11 0 0 0 0 synthetic\n",
            self.fs,
            self.signal.len()
        );
        let header = parse_header(header_text.as_bytes()).expect("generated header parses");
        let samples = self
            .signal
            .iter()
            .map(|&v| v.round().clamp(SAMPLE_MIN as f64, SAMPLE_MAX as f64) as i16)
            .collect();
        let annotations = self
            .beats
            .iter()
            .map(|&(i, k)| Annotation::new(i, if k == BeatKind::Normal { 1 } else { 5 }))
            .collect();
        EcgRecord {
            header,
            signals: vec![samples],
            annotations,
        }
    }
}

/// Code used for the beat that ends a dropout gap (`Q`, unclassifiable).
pub const DROPOUT_CODE: u8 = 13;

/// A single-channel record of Gaussian pulses every `period` samples,
/// starting at `period`, with the peaks listed in `dropped` (0-based)
/// removed. Surviving peaks are annotated `N`, except the first peak after
/// each gap, which gets [`DROPOUT_CODE`].
pub fn pulse_fixture(name: &str, fs: f64, period: usize, n_peaks: usize, dropped: &[usize]) -> EcgRecord {
    let all: Vec<usize> = (1..=n_peaks).map(|k| k * period).collect();
    let mut kept = Vec::with_capacity(n_peaks);
    let mut after_gap = false;
    for (k, &p) in all.iter().enumerate() {
        if dropped.contains(&k) {
            after_gap = true;
            continue;
        }
        kept.push(Annotation::new(p, if after_gap { DROPOUT_CODE } else { 1 }));
        after_gap = false;
    }
    let len = (n_peaks + 1) * period;
    let positions: Vec<usize> = kept.iter().map(|a| a.sample_index).collect();
    let signal = pulse_train(&positions, len, 1000.0, 0.008 * fs);
    let header_text = format!("{name} 1 {fs} {len}\n{name}.dat 212 200 11 0 0 0 0 pulses\n");
    EcgRecord {
        header: parse_header(header_text.as_bytes()).expect("generated header parses"),
        signals: vec![signal.iter().map(|v| v.round() as i16).collect()],
        annotations: kept,
    }
}

/// Generates a single-lead ECG with normal and ventricular beats.
pub fn synthesize_ecg(cfg: &SynthConfig) -> SyntheticEcg {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fs = cfg.fs;
    let s = |secs: f64| secs * fs;
    let mut beats = Vec::with_capacity(cfg.n_beats);
    let mut t = s(0.6);
    let mut previous_ventricular = false;
    for k in 0..cfg.n_beats {
        let jitter = 1.0 + 0.03 * gaussian(&mut rng);
        let ventricular = k >= 5 && !previous_ventricular && rng.random::<f64>() < cfg.arrhythmia_rate;
        if k > 0 {
            let factor = if ventricular {
                0.65
            } else if previous_ventricular {
                1.35
            } else {
                1.0
            };
            t += s(cfg.mean_rr_s) * factor * jitter;
        }
        beats.push((
            t.round() as usize,
            if ventricular {
                BeatKind::Ventricular
            } else {
                BeatKind::Normal
            },
        ));
        previous_ventricular = ventricular;
    }
    let len = beats.last().map_or(0, |b| b.0) + s(0.8).round() as usize;
    let mut x = vec![0.0; len];
    let a = cfg.amplitude;
    for &(r, kind) in &beats {
        let r = r as f64;
        let g = 1.0 + 0.05 * gaussian(&mut rng);
        let waves: Vec<(f64, f64, f64)> = match kind {
            BeatKind::Normal => vec![
                (r - s(0.16), 0.15 * a * g, s(0.025)),
                (r - s(0.025), -0.12 * a * g, s(0.008)),
                (r, a * g, s(0.010)),
                (r + s(0.025), -0.22 * a * g, s(0.008)),
                (r + s(0.30), 0.30 * a * g, s(0.040)),
            ],
            BeatKind::Ventricular => vec![
                (r - s(0.035), -0.30 * a * g, s(0.015)),
                (r, 1.4 * a * g, s(0.018)),
                (r + s(0.045), -0.60 * a * g, s(0.018)),
                (r + s(0.30), -0.40 * a * g, s(0.050)),
            ],
        };
        add_waves(&mut x, waves);
    }
    for (i, v) in x.iter_mut().enumerate() {
        let wander = 0.05 * a * (std::f64::consts::TAU * 0.3 * i as f64 / fs).sin();
        *v += wander + cfg.noise_std * gaussian(&mut rng);
    }
    SyntheticEcg { fs, signal: x, beats }
}
