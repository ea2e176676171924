//! Pipeline configuration, read from TOML with one flat table per stage.
//!
//! ```toml
//! [data]
//! records = ["mitdb/100", "mitdb/101"]
//! channel = 0
//!
//! [detector]
//! mode = "ann"            # or "uni-dwt"
//!
//! [classifier]
//! mode = "fixed"          # exact | pla | fixed | self-learner
//! hidden = 6
//! total_bits = 24
//! frac_bits = 12
//!
//! [training]
//! seed = 7
//! split = "per-record"    # or "pooled"
//! train_fraction = 0.5
//! max_epochs = 500
//!
//! [self_learner]
//! tolerance = 0.15
//!
//! [evaluation]
//! match_window_ms = 50.0
//! ```
//!
//! Every key is optional except `training.seed` when a classifier is trained.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activation::{HiddenActivation, OutputActivation};
use crate::fixed::{FormatError, QFormat};
use crate::nn::DEFAULT_HIDDEN;
use crate::selflearn::DEFAULT_TOLERANCE;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("invalid fixed-point format: {0}")]
    Format(#[from] FormatError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum DetectorMode {
    /// Annotated beat positions stand in for detected peaks.
    #[default]
    #[serde(rename = "ann")]
    Annotations,
    /// Wavelet QRS detector.
    #[serde(rename = "uni-dwt")]
    UniDwt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierMode {
    /// tanh hidden layer, Ntanh output, floating point.
    Exact,
    /// PLA tanh hidden layer and PLA Ntanh output, floating point.
    Pla,
    /// PLA network quantized to the configured Q format.
    #[default]
    Fixed,
    /// The rhythm monitor; nothing is trained.
    SelfLearner,
}

impl ClassifierMode {
    pub fn activations(self) -> (HiddenActivation, OutputActivation) {
        match self {
            ClassifierMode::Exact => (HiddenActivation::Tanh, OutputActivation::Ntanh),
            _ => (HiddenActivation::PlaTanh, OutputActivation::NtanhPla),
        }
    }

    pub fn trains(self) -> bool {
        self != ClassifierMode::SelfLearner
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SplitPolicy {
    /// One model per record, trained on its first part, tested on the rest.
    #[default]
    PerRecord,
    /// One model trained on the first part of every record.
    Pooled,
}

macro_rules! text_enum {
    ($ty:ty { $($variant:path => $name:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($name => Ok($variant),)+
                    _ => Err(format!("unknown value `{s}`; expected one of: {}", [$($name),+].join(", "))),
                }
            }
        }
    };
}

text_enum!(DetectorMode { DetectorMode::Annotations => "ann", DetectorMode::UniDwt => "uni-dwt" });
text_enum!(ClassifierMode {
    ClassifierMode::Exact => "exact",
    ClassifierMode::Pla => "pla",
    ClassifierMode::Fixed => "fixed",
    ClassifierMode::SelfLearner => "self-learner",
});
text_enum!(SplitPolicy { SplitPolicy::PerRecord => "per-record", SplitPolicy::Pooled => "pooled" });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Record base paths (without extension).
    pub records: Vec<PathBuf>,
    pub channel: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub mode: DetectorMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSection {
    pub mode: ClassifierMode,
    pub hidden: usize,
    pub total_bits: u32,
    pub frac_bits: u32,
    /// Pre-trained model file; skips training when set.
    pub model: Option<PathBuf>,
    /// PCA basis matching `model`.
    pub pca: Option<PathBuf>,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        ClassifierSection {
            mode: ClassifierMode::default(),
            hidden: DEFAULT_HIDDEN,
            total_bits: QFormat::DEFAULT.total_bits(),
            frac_bits: QFormat::DEFAULT.frac_bits(),
            model: None,
            pca: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub seed: Option<u64>,
    pub split: SplitPolicy,
    pub train_fraction: f64,
    pub max_epochs: usize,
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection {
            seed: None,
            split: SplitPolicy::default(),
            train_fraction: 0.5,
            max_epochs: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfLearnerSection {
    pub tolerance: f64,
}

impl Default for SelfLearnerSection {
    fn default() -> Self {
        SelfLearnerSection {
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub match_window_ms: f64,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection { match_window_ms: 50.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: DataSection,
    pub detector: DetectorSection,
    pub classifier: ClassifierSection,
    pub training: TrainingSection,
    pub self_learner: SelfLearnerSection,
    pub evaluation: EvaluationSection,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn q_format(&self) -> Result<QFormat, ConfigError> {
        Ok(QFormat::new(self.classifier.total_bits, self.classifier.frac_bits)?)
    }

    /// Range checks that the TOML types cannot express.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.q_format()?;
        if self.classifier.hidden == 0 {
            return bad("classifier.hidden must be at least 1".into());
        }
        let f = self.training.train_fraction;
        if !(f > 0.0 && f < 1.0) {
            return bad(format!("training.train_fraction must lie in (0, 1), got {f}"));
        }
        let t = self.self_learner.tolerance;
        if !(t > 0.0 && t < 1.0) {
            return bad(format!("self_learner.tolerance must lie in (0, 1), got {t}"));
        }
        let w = self.evaluation.match_window_ms;
        if !(w >= 0.0 && w.is_finite()) {
            return bad(format!("evaluation.match_window_ms must be non-negative, got {w}"));
        }
        if self.classifier.model.is_some() != self.classifier.pca.is_some() {
            return bad("classifier.model and classifier.pca must be given together".into());
        }
        Ok(())
    }

    /// The settings echoed into every report, in a fixed order.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("detector".to_string(), self.detector.mode.to_string()),
            ("classifier".to_string(), self.classifier.mode.to_string()),
            ("channel".to_string(), self.data.channel.to_string()),
        ];
        if self.classifier.mode.trains() {
            out.push(("hidden".into(), self.classifier.hidden.to_string()));
            if self.classifier.mode == ClassifierMode::Fixed {
                out.push(("total_bits".into(), self.classifier.total_bits.to_string()));
                out.push(("frac_bits".into(), self.classifier.frac_bits.to_string()));
            }
            out.push(("split".into(), self.training.split.to_string()));
            out.push(("train_fraction".into(), self.training.train_fraction.to_string()));
            out.push(("max_epochs".into(), self.training.max_epochs.to_string()));
            out.push((
                "seed".into(),
                self.training.seed.map_or("none".into(), |s| s.to_string()),
            ));
        } else {
            out.push(("tolerance".into(), self.self_learner.tolerance.to_string()));
        }
        out.push(("match_window_ms".into(), self.evaluation.match_window_ms.to_string()));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty_file() {
        let cfg = PipelineConfig::from_toml("").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!(cfg.classifier.hidden, 6);
        assert_eq!(cfg.q_format().unwrap(), QFormat::DEFAULT);
        assert_eq!(cfg.self_learner.tolerance, 0.15);
        assert_eq!(cfg.detector.mode, DetectorMode::Annotations);
    }

    #[test]
    fn full_file() {
        let cfg = PipelineConfig::from_toml(
            r#"
            [data]
            records = ["a/100", "a/101"]
            channel = 1
            [detector]
            mode = "uni-dwt"
            [classifier]
            mode = "self-learner"
            [training]
            seed = 9
            split = "pooled"
            [self_learner]
            tolerance = 0.2
            "#,
        )
        .unwrap();
        assert_eq!(cfg.data.records.len(), 2);
        assert_eq!(cfg.detector.mode, DetectorMode::UniDwt);
        assert_eq!(cfg.classifier.mode, ClassifierMode::SelfLearner);
        assert_eq!(cfg.training.split, SplitPolicy::Pooled);
        assert_eq!(PipelineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(PipelineConfig::from_toml("[data]\nrecrods = []\n").is_err());
        assert!(PipelineConfig::from_toml("[classifier]\nmode = \"relu\"\n").is_err());
        assert!(PipelineConfig::from_toml("[classifier]\nfrac_bits = 30\n").is_err());
        assert!(PipelineConfig::from_toml("[self_learner]\ntolerance = 1.5\n").is_err());
        assert!(PipelineConfig::from_toml("[training]\ntrain_fraction = 0.0\n").is_err());
        assert!(PipelineConfig::from_toml("[classifier]\nmodel = \"m.txt\"\n").is_err());
    }

    #[test]
    fn mode_names() {
        for m in [
            ClassifierMode::Exact,
            ClassifierMode::Pla,
            ClassifierMode::Fixed,
            ClassifierMode::SelfLearner,
        ] {
            assert_eq!(m.to_string().parse::<ClassifierMode>().unwrap(), m);
        }
        assert_eq!("uni-dwt".parse::<DetectorMode>().unwrap(), DetectorMode::UniDwt);
        assert!("dwt".parse::<DetectorMode>().is_err());
    }
}
