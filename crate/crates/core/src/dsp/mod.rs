//! Wavelet-based QRS detection and R-R interval extraction.

mod wavelet;

use std::collections::VecDeque;

use thiserror::Error;

pub use wavelet::{band_len, detail_band, dwt_decompose, dwt_reconstruct, DwtCoefficients, Wavelet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DspError {
    #[error("signal of length {len} too short; need at least {needed} samples")]
    SignalTooShort { len: usize, needed: usize },
    #[error("need at least two peaks for an R-R interval, got {0}")]
    TooFewPeaks(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakTrain {
    pub r_indices: Vec<usize>,
    pub sampling_frequency: f64,
}

impl PeakTrain {
    pub fn new(r_indices: Vec<usize>, sampling_frequency: f64) -> Self {
        PeakTrain {
            r_indices,
            sampling_frequency,
        }
    }

    pub fn len(&self) -> usize {
        self.r_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_indices.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RrInterval {
    pub samples: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RrSeries {
    pub intervals: Vec<RrInterval>,
}

impl RrSeries {
    pub fn samples(&self) -> Vec<usize> {
        self.intervals.iter().map(|i| i.samples).collect()
    }

    pub fn seconds(&self) -> Vec<f64> {
        self.intervals.iter().map(|i| i.seconds).collect()
    }
}

/// QRS detector settings.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams {
    pub wavelet: Wavelet,
    pub levels: usize,
    /// Detail levels (1-based) summed into the trigger signal.
    pub trigger_levels: Vec<usize>,
    /// Trigger threshold as a fraction of the local energy maximum.
    pub threshold_ratio: f64,
    /// Width of the rolling-maximum window, seconds.
    pub window_s: f64,
    /// Half-width of the raw-signal peak search around a trigger, milliseconds.
    pub search_ms: f64,
    pub refractory_ms: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            wavelet: Wavelet::Db4,
            levels: 4,
            trigger_levels: vec![3, 4],
            threshold_ratio: 0.4,
            window_s: 2.0,
            search_ms: 50.0,
            refractory_ms: 200.0,
        }
    }
}

/// Centred sliding maximum with a window of `width` samples.
fn rolling_max(x: &[f64], width: usize) -> Vec<f64> {
    let half = width / 2;
    let n = x.len();
    let mut out = Vec::with_capacity(n);
    let mut deque: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    for i in 0..n {
        let hi = (i + half).min(n - 1);
        while next <= hi {
            while deque.back().is_some_and(|&j| x[j] <= x[next]) {
                deque.pop_back();
            }
            deque.push_back(next);
            next += 1;
        }
        let lo = i.saturating_sub(half);
        while deque.front().is_some_and(|&j| j < lo) {
            deque.pop_front();
        }
        out.push(x[*deque.front().expect("window never empty")]);
    }
    out
}

fn argmax(x: &[f64], range: std::ops::Range<usize>) -> usize {
    let mut best = range.start;
    for i in range {
        if x[i] > x[best] {
            best = i;
        }
    }
    best
}

/// Squared detail-band reconstruction averaged over every shift of the
/// input modulo `2^levels`. A single decimated transform is shift-variant,
/// so identical beats at different phases can differ in energy by an order
/// of magnitude; the average does not.
fn trigger_energy(signal: &[f64], params: &DetectorParams) -> Option<Vec<f64>> {
    let n = signal.len();
    let shifts = 1usize << params.levels.min(16);
    let mut sum = vec![0.0; n];
    let mut count = vec![0u32; n];
    for s in 0..shifts.min(n) {
        let Ok(coeffs) = dwt_decompose(&signal[s..], params.wavelet, params.levels) else {
            break;
        };
        let band = detail_band(&coeffs, &params.trigger_levels);
        for (i, v) in band.iter().enumerate() {
            sum[i + s] += v * v;
            count[i + s] += 1;
        }
    }
    if count[0] == 0 {
        return None;
    }
    Some(
        sum.iter()
            .zip(&count)
            .map(|(e, &c)| if c > 0 { e / c as f64 } else { 0.0 })
            .collect(),
    )
}

/// Detects R peaks with the default detector settings.
pub fn detect_r_peaks(signal: &[f64], fs: f64) -> PeakTrain {
    detect_r_peaks_with(signal, fs, &DetectorParams::default())
}

/// Shift-averaged DWT detail energy is compared against a fraction of its rolling
/// maximum; each run above threshold yields one trigger at its energy peak,
/// which is refined to the raw-signal maximum within the search window.
/// Candidates closer than the refractory period keep the taller peak.
pub fn detect_r_peaks_with(signal: &[f64], fs: f64, params: &DetectorParams) -> PeakTrain {
    let empty = PeakTrain::new(Vec::new(), fs);
    if !(fs > 0.0) || signal.is_empty() {
        return empty;
    }
    let Some(energy) = trigger_energy(signal, params) else {
        return empty;
    };
    let peak_energy = energy.iter().copied().fold(0.0, f64::max);
    let scale = signal.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    // rounding residue of a flat signal must not count as a beat
    let floor = (peak_energy * 1e-9).max(scale * scale * 1e-12);
    if !(peak_energy > floor) {
        return empty;
    }
    let window = ((params.window_s * fs).round() as usize).max(1);
    let local_max = rolling_max(&energy, window);
    let search = (params.search_ms * 1e-3 * fs).round() as usize;
    let refractory = (params.refractory_ms * 1e-3 * fs).round() as usize;

    let n = signal.len();
    let mut peaks: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < n {
        let above = |k: usize| energy[k] > (params.threshold_ratio * local_max[k]).max(floor);
        if !above(i) {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && above(i) {
            i += 1;
        }
        let trigger = argmax(&energy, start..i);
        let lo = trigger.saturating_sub(search);
        let hi = (trigger + search + 1).min(n);
        let candidate = argmax(signal, lo..hi);
        match peaks.last_mut() {
            Some(last) if candidate <= *last || candidate - *last < refractory => {
                if candidate > *last && signal[candidate] > signal[*last] {
                    // moving later only widens the gap to the previous peak
                    *last = candidate;
                }
            }
            _ => peaks.push(candidate),
        }
    }
    PeakTrain::new(peaks, fs)
}

pub fn extract_rr(peaks: &PeakTrain) -> Result<RrSeries, DspError> {
    if peaks.len() < 2 {
        return Err(DspError::TooFewPeaks(peaks.len()));
    }
    let fs = peaks.sampling_frequency;
    let intervals = peaks
        .r_indices
        .windows(2)
        .map(|w| {
            if w[1] <= w[0] {
                return Err(DspError::InvalidParameter(format!(
                    "peak indices not increasing: {} then {}",
                    w[0], w[1]
                )));
            }
            let samples = w[1] - w[0];
            Ok(RrInterval {
                samples,
                seconds: samples as f64 / fs,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(RrSeries { intervals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::pulse_train;
    use proptest::prelude::*;

    #[test]
    fn rolling_max_matches_brute_force() {
        let x: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64).collect();
        for width in [1, 2, 5, 10, 100] {
            let got = rolling_max(&x, width);
            for i in 0..x.len() {
                let lo = i.saturating_sub(width / 2);
                let hi = (i + width / 2).min(x.len() - 1);
                let m = x[lo..=hi].iter().copied().fold(f64::MIN, f64::max);
                assert_eq!(got[i], m);
            }
        }
    }

    #[test]
    fn periodic_pulses_found() {
        let fs = 500.0;
        let truth: Vec<usize> = (0..12).map(|k| 200 + 345 * k).collect();
        let x = pulse_train(&truth, 4600, 1000.0, 4.0);
        let peaks = detect_r_peaks(&x, fs);
        assert_eq!(peaks.r_indices, truth);
    }

    #[test]
    fn flat_signal_has_no_peaks() {
        assert!(detect_r_peaks(&vec![0.0; 5000], 360.0).is_empty());
        assert!(detect_r_peaks(&vec![7.0; 5000], 360.0).is_empty());
        assert!(detect_r_peaks(&[], 360.0).is_empty());
        assert!(detect_r_peaks(&[1.0; 10], 360.0).is_empty());
    }

    #[test]
    fn rr_examples() {
        let rr = extract_rr(&PeakTrain::new(vec![100, 445, 790], 500.0)).unwrap();
        assert_eq!(rr.samples(), vec![345, 345]);
        assert_eq!(rr.seconds(), vec![0.69, 0.69]);
        assert_eq!(
            extract_rr(&PeakTrain::new(vec![0, 1], 500.0)).unwrap().samples(),
            vec![1]
        );
        assert!(matches!(
            extract_rr(&PeakTrain::new(vec![3], 500.0)),
            Err(DspError::TooFewPeaks(1))
        ));
    }

    proptest! {
        #[test]
        fn rr_are_successive_differences(gaps in proptest::collection::vec(1usize..1000, 1..50), start in 0usize..100) {
            let mut idx = vec![start];
            for g in &gaps {
                idx.push(idx.last().unwrap() + g);
            }
            let rr = extract_rr(&PeakTrain::new(idx.clone(), 360.0)).unwrap();
            prop_assert_eq!(rr.intervals.len(), idx.len() - 1);
            prop_assert_eq!(rr.samples(), gaps);
        }

        #[test]
        fn detector_output_respects_refractory(
            gaps in proptest::collection::vec(60usize..600, 2..12),
            amp in 100.0f64..2000.0,
        ) {
            let fs = 360.0;
            let mut truth = vec![150usize];
            for g in &gaps {
                truth.push(truth.last().unwrap() + g);
            }
            let len = truth.last().unwrap() + 300;
            let x = pulse_train(&truth, len, amp, 3.0);
            let peaks = detect_r_peaks(&x, fs);
            let refractory = (0.2 * fs).round() as usize;
            for w in peaks.r_indices.windows(2) {
                prop_assert!(w[1] > w[0] && w[1] - w[0] >= refractory);
            }
        }
    }
}
