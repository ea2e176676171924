//! ECG arrhythmia detection: WFDB ingestion, R-peak detection, PCA beat
//! features, a small MLP classifier with fixed-point inference, and a
//! rhythm-only self-learning monitor.

pub mod activation;
pub mod config;
pub mod dsp;
pub mod features;
pub mod fixed;
pub mod metrics;
pub mod nn;
pub mod selflearn;
pub mod synth;
pub mod wfdb;
