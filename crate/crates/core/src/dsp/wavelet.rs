//! Orthogonal discrete wavelet transform with half-sample symmetric extension.
//!
//! Analysis at one level computes
//! `a[o] = sum_j lo[j] * x[2o + 1 - j]` and `d[o] = sum_j hi[j] * x[2o + 1 - j]`
//! over the symmetrically extended input, giving `floor((n + L - 1) / 2)`
//! coefficients per band. Synthesis applies the transpose of that operator,
//! which reconstructs the input exactly for an orthonormal filter pair.

use super::DspError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Wavelet {
    Haar,
    /// Daubechies with four vanishing moments (eight taps).
    Db4,
}

const HAAR_LO: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];

const DB4_LO: [f64; 8] = [
    -0.010597401784997278,
    0.032883011666982945,
    0.030841381835986965,
    -0.18703481171888114,
    -0.02798376941698385,
    0.6308807679295904,
    0.7148465705525415,
    0.23037781330885523,
];

impl Wavelet {
    /// Decomposition low-pass taps.
    pub fn dec_lo(self) -> &'static [f64] {
        match self {
            Wavelet::Haar => &HAAR_LO,
            Wavelet::Db4 => &DB4_LO,
        }
    }

    /// Decomposition high-pass taps: `hi[k] = (-1)^(k+1) lo[L-1-k]`.
    pub fn dec_hi(self) -> Vec<f64> {
        let lo = self.dec_lo();
        let n = lo.len();
        (0..n)
            .map(|k| if k % 2 == 0 { -lo[n - 1 - k] } else { lo[n - 1 - k] })
            .collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Wavelet::Haar => "haar",
            Wavelet::Db4 => "db4",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DwtCoefficients {
    pub wavelet: Wavelet,
    /// `details[k]` is level `k + 1`.
    pub details: Vec<Vec<f64>>,
    pub approximation: Vec<f64>,
    /// Input length seen at each level, needed to undo the extension.
    pub input_lengths: Vec<usize>,
}

impl DwtCoefficients {
    pub fn levels(&self) -> usize {
        self.details.len()
    }
}

/// Half-sample symmetric index into `0..n`.
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

pub fn band_len(n: usize, taps: usize) -> usize {
    (n + taps - 1) / 2
}

fn analyze(x: &[f64], lo: &[f64], hi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let out_len = band_len(n, lo.len());
    let mut a = Vec::with_capacity(out_len);
    let mut d = Vec::with_capacity(out_len);
    for o in 0..out_len {
        let centre = 2 * o as isize + 1;
        let (mut sa, mut sd) = (0.0, 0.0);
        for j in 0..lo.len() {
            let v = x[reflect(centre - j as isize, n)];
            sa += lo[j] * v;
            sd += hi[j] * v;
        }
        a.push(sa);
        d.push(sd);
    }
    (a, d)
}

fn synthesize(a: &[f64], d: &[f64], lo: &[f64], hi: &[f64], n: usize) -> Vec<f64> {
    let taps = lo.len();
    (0..n)
        .map(|m| {
            // o with 0 <= 2o + 1 - m < taps
            let o_min = m / 2;
            let o_max = ((m + taps - 2) / 2).min(a.len().saturating_sub(1));
            (o_min..=o_max)
                .filter(|&o| o < a.len())
                .map(|o| {
                    let k = 2 * o + 1 - m;
                    lo[k] * a[o] + hi[k] * d[o]
                })
                .sum()
        })
        .collect()
}

pub fn dwt_decompose(signal: &[f64], wavelet: Wavelet, levels: usize) -> Result<DwtCoefficients, DspError> {
    if levels == 0 {
        return Err(DspError::InvalidParameter("at least one decomposition level".into()));
    }
    if levels >= usize::BITS as usize || signal.len() < (1usize << levels) {
        return Err(DspError::SignalTooShort {
            len: signal.len(),
            needed: 1usize.checked_shl(levels as u32).unwrap_or(usize::MAX),
        });
    }
    let lo = wavelet.dec_lo();
    let hi = wavelet.dec_hi();
    let mut approx = signal.to_vec();
    let mut details = Vec::with_capacity(levels);
    let mut input_lengths = Vec::with_capacity(levels);
    for _ in 0..levels {
        input_lengths.push(approx.len());
        let (a, d) = analyze(&approx, lo, &hi);
        details.push(d);
        approx = a;
    }
    Ok(DwtCoefficients {
        wavelet,
        details,
        approximation: approx,
        input_lengths,
    })
}

pub fn dwt_reconstruct(coeffs: &DwtCoefficients) -> Vec<f64> {
    let lo = coeffs.wavelet.dec_lo();
    let hi = coeffs.wavelet.dec_hi();
    let mut approx = coeffs.approximation.clone();
    for level in (0..coeffs.levels()).rev() {
        approx = synthesize(&approx, &coeffs.details[level], lo, &hi, coeffs.input_lengths[level]);
    }
    approx
}

/// Reconstructs only the detail bands listed in `levels` (1-based), with
/// everything else zeroed. The result is time-aligned with the input.
pub fn detail_band(coeffs: &DwtCoefficients, levels: &[usize]) -> Vec<f64> {
    let mut masked = coeffs.clone();
    masked.approximation.iter_mut().for_each(|v| *v = 0.0);
    for (k, d) in masked.details.iter_mut().enumerate() {
        if !levels.contains(&(k + 1)) {
            d.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    dwt_reconstruct(&masked)
}
