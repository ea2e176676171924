//! Rhythm-only arrhythmia monitor. It learns a reference R-R interval from
//! four stable cycles, then flags each interval that strays from it by more
//! than a tolerance, and flags a missing beat when no peak arrives in time.
//!
//! All intervals are in samples.

use std::collections::VecDeque;
use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

pub const DEFAULT_TOLERANCE: f64 = 0.15;
/// Consecutive intervals that must agree before monitoring starts.
pub const LEARN_CYCLES: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelfLearnError {
    #[error("tolerance fraction must lie in (0, 1), got {0}")]
    InvalidTolerance(f64),
    #[error("no stable rhythm found in {seen} intervals")]
    NoStableRhythm { seen: usize },
    #[error("reference interval must be positive, got {0}")]
    InvalidCharacteristic(f64),
}

fn check_tolerance(tolerance: f64) -> Result<(), SelfLearnError> {
    if tolerance > 0.0 && tolerance < 1.0 {
        Ok(())
    } else {
        Err(SelfLearnError::InvalidTolerance(tolerance))
    }
}

/// `true` when every interval lies within `tolerance` of the window mean.
fn is_stable(window: &[f64], tolerance: f64) -> Option<f64> {
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    let eps = tolerance * mean;
    window.iter().all(|&t| (t - mean).abs() <= eps).then_some(mean)
}

/// Mean of the first run of four consecutive intervals that are each within
/// `tolerance` of their own mean. The window slides one interval at a time.
pub fn initialize(intervals: impl IntoIterator<Item = f64>, tolerance: f64) -> Result<f64, SelfLearnError> {
    check_tolerance(tolerance)?;
    let mut window = VecDeque::with_capacity(LEARN_CYCLES);
    let mut seen = 0;
    for t in intervals {
        seen += 1;
        if window.len() == LEARN_CYCLES {
            window.pop_front();
        }
        window.push_back(t);
        if window.len() == LEARN_CYCLES {
            if let Some(mean) = is_stable(window.make_contiguous(), tolerance) {
                return Ok(mean);
            }
        }
    }
    Err(SelfLearnError::NoStableRhythm { seen })
}

/// Allowed deviation from the reference interval.
pub fn epsilon(st_rr: f64, tolerance: f64) -> f64 {
    tolerance * st_rr
}

/// `true` (arrhythmia) iff `|st_rr - t_rr|` exceeds the tolerance band.
/// A deviation exactly on the band edge is normal.
pub fn check_beat(st_rr: f64, t_rr: f64, tolerance: f64) -> bool {
    (st_rr - t_rr).abs() > epsilon(st_rr, tolerance)
}

/// Moves the reference halfway toward a normal interval.
pub fn update(st_rr: f64, t_rr: f64) -> f64 {
    (st_rr + t_rr) / 2.0
}

/// Samples to wait after the last peak before declaring a missing beat.
pub fn missing_beat_timeout(st_rr: f64, tolerance: f64) -> usize {
    (st_rr * (1.0 + tolerance)).ceil() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Learning,
    Monitoring,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnomalyKind {
    IntervalDeviation,
    MissingBeat,
}

impl AnomalyKind {
    pub fn name(self) -> &'static str {
        match self {
            AnomalyKind::IntervalDeviation => "interval_deviation",
            AnomalyKind::MissingBeat => "missing_beat",
        }
    }
}

impl fmt::Display for AnomalyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyEvent {
    pub sample_index: usize,
    pub kind: AnomalyKind,
    /// The offending interval, or the elapsed samples for a missing beat.
    pub observed: f64,
    /// Reference interval when the decision was made.
    pub st_rr: f64,
}

/// Streaming monitor state. Feed it peak indices in order.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfLearner {
    tolerance: f64,
    phase: Phase,
    st_rr: f64,
    learn_buffer: VecDeque<f64>,
    last_peak: Option<usize>,
    /// A missing beat was reported; the next peak only re-anchors.
    timed_out: bool,
}

impl SelfLearner {
    /// A monitor that starts in the learning phase.
    pub fn new(tolerance: f64) -> Result<Self, SelfLearnError> {
        check_tolerance(tolerance)?;
        Ok(SelfLearner {
            tolerance,
            phase: Phase::Learning,
            st_rr: 0.0,
            learn_buffer: VecDeque::with_capacity(LEARN_CYCLES),
            last_peak: None,
            timed_out: false,
        })
    }

    /// A monitor that skips learning and uses `st_rr` as its reference.
    pub fn with_characteristic(st_rr: f64, tolerance: f64) -> Result<Self, SelfLearnError> {
        if !(st_rr > 0.0 && st_rr.is_finite()) {
            return Err(SelfLearnError::InvalidCharacteristic(st_rr));
        }
        let mut s = Self::new(tolerance)?;
        s.phase = Phase::Monitoring;
        s.st_rr = st_rr;
        Ok(s)
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// The learned reference interval, once monitoring.
    pub fn st_rr(&self) -> Option<f64> {
        (self.phase == Phase::Monitoring).then_some(self.st_rr)
    }

    pub fn last_peak(&self) -> Option<usize> {
        self.last_peak
    }

    pub fn learn_buffer(&self) -> impl Iterator<Item = f64> + '_ {
        self.learn_buffer.iter().copied()
    }

    /// Sample index at which a missing beat will be declared, if monitoring.
    pub fn deadline(&self) -> Option<usize> {
        match (self.phase, self.last_peak) {
            (Phase::Monitoring, Some(last)) if !self.timed_out => {
                Some(last + missing_beat_timeout(self.st_rr, self.tolerance))
            }
            _ => None,
        }
    }

    /// Reports a missing beat once `now` has passed the deadline with no
    /// peak. Used by live streams between peaks; [`Self::observe_peak`]
    /// performs the same check itself.
    pub fn advance_to(&mut self, now: usize) -> Option<AnomalyEvent> {
        let deadline = self.deadline()?;
        if now <= deadline {
            return None;
        }
        self.timed_out = true;
        Some(AnomalyEvent {
            sample_index: deadline,
            kind: AnomalyKind::MissingBeat,
            observed: (deadline - self.last_peak.expect("deadline needs a peak")) as f64,
            st_rr: self.st_rr,
        })
    }

    /// Processes one detected peak. The result is a missing beat for the gap
    /// before it, a deviation of its own interval, or nothing.
    pub fn observe_peak(&mut self, index: usize) -> Option<AnomalyEvent> {
        let Some(last) = self.last_peak else {
            self.last_peak = Some(index);
            return None;
        };
        if index <= last {
            log::warn!("ignoring out-of-order peak {index} after {last}");
            return None;
        }
        if let Some(missing) = self.advance_to(index) {
            self.last_peak = Some(index);
            self.timed_out = false;
            return Some(missing);
        }
        self.last_peak = Some(index);
        if self.timed_out {
            self.timed_out = false;
            return None;
        }
        let t_rr = (index - last) as f64;
        match self.phase {
            Phase::Learning => {
                if self.learn_buffer.len() == LEARN_CYCLES {
                    self.learn_buffer.pop_front();
                }
                self.learn_buffer.push_back(t_rr);
                if self.learn_buffer.len() == LEARN_CYCLES {
                    if let Some(mean) = is_stable(self.learn_buffer.make_contiguous(), self.tolerance) {
                        self.st_rr = mean;
                        self.phase = Phase::Monitoring;
                    }
                }
                None
            }
            Phase::Monitoring => {
                if check_beat(self.st_rr, t_rr, self.tolerance) {
                    Some(AnomalyEvent {
                        sample_index: index,
                        kind: AnomalyKind::IntervalDeviation,
                        observed: t_rr,
                        st_rr: self.st_rr,
                    })
                } else {
                    self.st_rr = update(self.st_rr, t_rr);
                    None
                }
            }
        }
    }
}

/// Runs a monitor over a whole peak train. Errors if the rhythm never
/// stabilized enough to start monitoring.
pub fn monitor(peaks: &[usize], mut learner: SelfLearner) -> Result<(Vec<AnomalyEvent>, SelfLearner), SelfLearnError> {
    let events: Vec<AnomalyEvent> = peaks.iter().filter_map(|&p| learner.observe_peak(p)).collect();
    if learner.phase == Phase::Learning {
        return Err(SelfLearnError::NoStableRhythm {
            seen: peaks.len().saturating_sub(1),
        });
    }
    Ok((events, learner))
}

pub const ANOMALY_LOG_HEADER: &str = "record,sample_index,kind,t_rr,st_rr";

pub fn write_anomaly_log(record: &str, events: &[AnomalyEvent]) -> String {
    let mut out = String::from(ANOMALY_LOG_HEADER);
    out.push('\n');
    for e in events {
        let _ = writeln!(out, "{record},{},{},{},{}", e.sample_index, e.kind, e.observed, e.st_rr);
    }
    out
}
