//! Activation functions: reference `tanh` and softmax, the thirteen-range
//! piecewise-linear tanh approximation (PLA-tanh) with power-of-two slopes,
//! the normalized output activation `Ntanh`, and a shift-only fixed-point
//! evaluation of PLA-tanh.

use std::fmt;
use std::str::FromStr;

use crate::fixed::{fx_shr, to_fixed, FixedPoint, QFormat};

/// Segment borders, descending (`a` through `l`).
pub const PLA_BORDERS: [f64; 12] = [
    5.5799959, 3.02, 2.02, 1.475, 1.125, 0.5, -0.5, -1.125, -1.475, -2.02, -3.02, -5.5799959,
];

/// Offset of the `x/4096` segment.
///
/// The nominal constant 0.9986377 leaves the curve discontinuous by a few
/// 1e-9 at both ends of this segment. This value is the midpoint between the
/// offsets that close the gap at each end (exact to the printed seven
/// decimals), leaving ~5e-10 at both borders.
pub const OUTER_OFFSET: f64 = {
    let a = 5.5799959;
    let b = 3.02;
    let at_a = 1.0 - a / 4096.0;
    let at_b = (b / 32.0 + 0.905) - b / 4096.0;
    (at_a + at_b) / 2.0
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaSegment {
    /// `Some(s)` for slope `2^-s`, `None` for a flat segment.
    pub shift: Option<u32>,
    pub offset: f64,
}

impl PlaSegment {
    pub fn slope(&self) -> f64 {
        match self.shift {
            Some(s) => (-(s as f64)).exp2(),
            None => 0.0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.slope() * x + self.offset
    }
}

/// The thirteen segments in descending order of `x`.
pub const PLA_SEGMENTS: [PlaSegment; 13] = [
    PlaSegment {
        shift: None,
        offset: 1.0,
    },
    PlaSegment {
        shift: Some(12),
        offset: OUTER_OFFSET,
    },
    PlaSegment {
        shift: Some(5),
        offset: 0.905,
    },
    PlaSegment {
        shift: Some(3),
        offset: 0.715625,
    },
    PlaSegment {
        shift: Some(2),
        offset: 0.53125,
    },
    PlaSegment {
        shift: Some(1),
        offset: 0.25,
    },
    PlaSegment {
        shift: Some(0),
        offset: 0.0,
    },
    PlaSegment {
        shift: Some(1),
        offset: -0.25,
    },
    PlaSegment {
        shift: Some(2),
        offset: -0.53125,
    },
    PlaSegment {
        shift: Some(3),
        offset: -0.715625,
    },
    PlaSegment {
        shift: Some(5),
        offset: -0.905,
    },
    PlaSegment {
        shift: Some(12),
        offset: -OUTER_OFFSET,
    },
    PlaSegment {
        shift: None,
        offset: -1.0,
    },
];

/// Index into [`PLA_SEGMENTS`] for `x`.
///
/// Row 0 is `x >= a`; row `i` in 1..=11 is `border[i-1] >= x > border[i]`;
/// row 12 is `x <= l`. The first matching row wins, so `x == a` is in row 0
/// and every other border belongs to the segment on its left.
pub fn pla_segment_index(x: f64) -> usize {
    if x >= PLA_BORDERS[0] {
        return 0;
    }
    PLA_BORDERS[1..].iter().position(|&b| x > b).map_or(12, |i| i + 1)
}

pub fn platanh(x: f64) -> f64 {
    if x.is_nan() {
        return x;
    }
    PLA_SEGMENTS[pla_segment_index(x)].eval(x)
}

/// Slope of the segment that owns `x`; used as the PLA-tanh derivative.
pub fn platanh_slope(x: f64) -> f64 {
    PLA_SEGMENTS[pla_segment_index(x)].slope()
}

pub fn tanh_exact(x: f64) -> f64 {
    x.tanh()
}

pub fn tanh_derivative(x: f64) -> f64 {
    let t = x.tanh();
    1.0 - t * t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TanhMode {
    Exact,
    Pla,
}

/// `(tanh(x) + 1) / 2`, with either the exact or the approximated tanh.
pub fn ntanh(x: f64, mode: TanhMode) -> f64 {
    match mode {
        TanhMode::Exact => (x.tanh() + 1.0) / 2.0,
        TanhMode::Pla => (platanh(x) + 1.0) / 2.0,
    }
}

pub fn ntanh_derivative(x: f64, mode: TanhMode) -> f64 {
    match mode {
        TanhMode::Exact => tanh_derivative(x) / 2.0,
        TanhMode::Pla => platanh_slope(x) / 2.0,
    }
}

/// Softmax with max subtraction. An empty input yields an empty output.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Segment table quantized to one fixed-point format.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPlaTable {
    format: QFormat,
    borders: [i64; 12],
    offsets: [i64; 13],
}

impl FixedPlaTable {
    pub fn new(format: QFormat) -> Self {
        let borders = PLA_BORDERS.map(|b| to_fixed(b, format).raw());
        let offsets = PLA_SEGMENTS.map(|s| to_fixed(s.offset, format).raw());
        FixedPlaTable {
            format,
            borders,
            offsets,
        }
    }

    pub fn format(&self) -> QFormat {
        self.format
    }

    fn segment_index(&self, raw: i64) -> usize {
        if raw >= self.borders[0] {
            return 0;
        }
        self.borders[1..].iter().position(|&b| raw > b).map_or(12, |i| i + 1)
    }

    pub fn eval(&self, x: FixedPoint) -> FixedPoint {
        assert_eq!(x.format(), self.format, "input not in table format");
        let idx = self.segment_index(x.raw());
        let one = self.format.one_raw();
        let raw = match PLA_SEGMENTS[idx].shift {
            None => self.offsets[idx],
            Some(s) => fx_shr(x, s).raw() + self.offsets[idx],
        };
        FixedPoint::from_raw(raw.clamp(-one, one), self.format)
    }

    /// `(platanh(x) + 1) / 2` using one extra rounding shift.
    pub fn eval_ntanh(&self, x: FixedPoint) -> FixedPoint {
        let t = self.eval(x);
        let shifted = FixedPoint::from_raw(t.raw() + self.format.one_raw(), self.format);
        fx_shr(shifted, 1)
    }
}

/// Fixed-point PLA-tanh: segment lookup on quantized borders, slope by
/// arithmetic shift, quantized offset, result clamped to [-1, 1].
pub fn platanh_fixed(x: FixedPoint) -> FixedPoint {
    FixedPlaTable::new(x.format()).eval(x)
}

/// Maximum of `|platanh(x) - tanh(x)|` over a uniform grid on `[-range, range]`.
/// Returns `(max_error, x_at_max)`; the first grid point attaining the
/// maximum wins.
pub fn max_pla_error(range: f64, step: f64) -> (f64, f64) {
    assert!(step > 0.0 && range >= 0.0);
    let n = (2.0 * range / step).round() as i64;
    let mut best = (0.0f64, -range);
    for i in 0..=n {
        let x = -range + i as f64 * step;
        let err = (platanh(x) - x.tanh()).abs();
        if err > best.0 {
            best = (err, x);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HiddenActivation {
    Tanh,
    PlaTanh,
}

impl HiddenActivation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            HiddenActivation::Tanh => x.tanh(),
            HiddenActivation::PlaTanh => platanh(x),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            HiddenActivation::Tanh => tanh_derivative(x),
            HiddenActivation::PlaTanh => platanh_slope(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutputActivation {
    Softmax,
    Ntanh,
    NtanhPla,
}

impl fmt::Display for HiddenActivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HiddenActivation::Tanh => "tanh",
            HiddenActivation::PlaTanh => "platanh",
        })
    }
}

impl FromStr for HiddenActivation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tanh" => Ok(HiddenActivation::Tanh),
            "platanh" => Ok(HiddenActivation::PlaTanh),
            other => Err(format!("unknown hidden activation `{other}`")),
        }
    }
}

impl fmt::Display for OutputActivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputActivation::Softmax => "softmax",
            OutputActivation::Ntanh => "ntanh",
            OutputActivation::NtanhPla => "ntanh-pla",
        })
    }
}

impl FromStr for OutputActivation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "softmax" => Ok(OutputActivation::Softmax),
            "ntanh" => Ok(OutputActivation::Ntanh),
            "ntanh-pla" => Ok(OutputActivation::NtanhPla),
            other => Err(format!("unknown output activation `{other}`")),
        }
    }
}
