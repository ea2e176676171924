//! Single-hidden-layer perceptron for normal/arrhythmia beat classification.
//!
//! Parameters live in one flat vector laid out as
//! `[hidden weights (hidden x input, row-major) | hidden biases | output
//! weights (output x hidden, row-major) | output biases]`, which keeps
//! gradient and RPROP bookkeeping to plain slices.

mod backprop;
mod io;
mod rprop;
mod train;

use thiserror::Error;

use crate::activation::{ntanh, softmax, FixedPlaTable, HiddenActivation, OutputActivation, TanhMode};
use crate::fixed::{fx_dot, to_fixed, QFormat};

pub use backprop::{gradients, mse, Sample};
pub use io::{model_from_text, model_to_text};
pub use rprop::{RpropParams, RpropState};
pub use train::{balance_classes, train, StopReason, TrainOptions, TrainReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("expected {expected} inputs, got {got}")]
    InputShape { expected: usize, got: usize },
    #[error("parameter vector has {got} entries, architecture needs {expected}")]
    ParamShape { expected: usize, got: usize },
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("training set is empty")]
    EmptyDataset,
    #[error("training set contains only one class")]
    SingleClass,
    #[error("fixed-point mode requires PLA activations")]
    FixedNeedsPla,
    #[error("weight {index} = {value} is not representable in {format}")]
    NotRepresentable { index: usize, value: f64, format: QFormat },
    #[error("model file line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BeatClass {
    Normal,
    Arrhythmia,
}

impl BeatClass {
    pub fn index(self) -> usize {
        match self {
            BeatClass::Normal => 0,
            BeatClass::Arrhythmia => 1,
        }
    }

    pub fn one_hot(self) -> [f64; 2] {
        match self {
            BeatClass::Normal => [1.0, 0.0],
            BeatClass::Arrhythmia => [0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NumericMode {
    Real,
    Fixed(QFormat),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub hidden_activation: HiddenActivation,
    pub output_activation: OutputActivation,
    pub numeric: NumericMode,
    params: Vec<f64>,
}

pub const DEFAULT_INPUTS: usize = 12;
pub const DEFAULT_HIDDEN: usize = 6;
pub const DEFAULT_OUTPUTS: usize = 2;

pub fn param_count(inputs: usize, hidden: usize, outputs: usize) -> usize {
    hidden * inputs + hidden + outputs * hidden + outputs
}

impl MlpModel {
    /// A real-mode model with all parameters zero.
    pub fn zeros(
        inputs: usize,
        hidden: usize,
        outputs: usize,
        hidden_activation: HiddenActivation,
        output_activation: OutputActivation,
    ) -> Result<Self, NnError> {
        if inputs == 0 || hidden == 0 || outputs == 0 {
            return Err(NnError::Architecture(format!(
                "layer sizes {inputs}-{hidden}-{outputs}"
            )));
        }
        Ok(MlpModel {
            inputs,
            hidden,
            outputs,
            hidden_activation,
            output_activation,
            numeric: NumericMode::Real,
            params: vec![0.0; param_count(inputs, hidden, outputs)],
        })
    }

    /// The 12-6-2 network with the given activations.
    pub fn standard(hidden_activation: HiddenActivation, output_activation: OutputActivation) -> Self {
        Self::zeros(
            DEFAULT_INPUTS,
            DEFAULT_HIDDEN,
            DEFAULT_OUTPUTS,
            hidden_activation,
            output_activation,
        )
        .expect("standard architecture is valid")
    }

    pub fn with_params(mut self, params: Vec<f64>) -> Result<Self, NnError> {
        self.set_params(params)?;
        Ok(self)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<(), NnError> {
        let expected = param_count(self.inputs, self.hidden, self.outputs);
        if params.len() != expected {
            return Err(NnError::ParamShape {
                expected,
                got: params.len(),
            });
        }
        self.params = params;
        Ok(())
    }

    pub fn layer_sizes(&self) -> [usize; 3] {
        [self.inputs, self.hidden, self.outputs]
    }

    fn hidden_weights_end(&self) -> usize {
        self.hidden * self.inputs
    }

    fn hidden_bias_end(&self) -> usize {
        self.hidden_weights_end() + self.hidden
    }

    fn output_weights_end(&self) -> usize {
        self.hidden_bias_end() + self.outputs * self.hidden
    }

    pub fn hidden_weights(&self) -> &[f64] {
        &self.params[..self.hidden_weights_end()]
    }

    pub fn hidden_bias(&self) -> &[f64] {
        &self.params[self.hidden_weights_end()..self.hidden_bias_end()]
    }

    pub fn output_weights(&self) -> &[f64] {
        &self.params[self.hidden_bias_end()..self.output_weights_end()]
    }

    pub fn output_bias(&self) -> &[f64] {
        &self.params[self.output_weights_end()..]
    }

    /// Checks the fixed-mode invariants: PLA activations and representable weights.
    pub fn validate(&self) -> Result<(), NnError> {
        if let NumericMode::Fixed(format) = self.numeric {
            if self.hidden_activation != HiddenActivation::PlaTanh
                || self.output_activation != OutputActivation::NtanhPla
            {
                return Err(NnError::FixedNeedsPla);
            }
            if let Some((index, &value)) = self.params.iter().enumerate().find(|(_, &v)| !format.represents(v)) {
                return Err(NnError::NotRepresentable { index, value, format });
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NnError> {
        if x.len() != self.inputs {
            return Err(NnError::InputShape {
                expected: self.inputs,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Network outputs for one input vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        self.check_input(x)?;
        match self.numeric {
            NumericMode::Real => Ok(self.forward_real(x).outputs),
            NumericMode::Fixed(format) => self.forward_fixed(x, format),
        }
    }

    pub(crate) fn forward_real(&self, x: &[f64]) -> Activations {
        let mut hidden_pre = Vec::with_capacity(self.hidden);
        for (row, b) in self.hidden_weights().chunks(self.inputs).zip(self.hidden_bias()) {
            hidden_pre.push(row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b);
        }
        let hidden: Vec<f64> = hidden_pre.iter().map(|&a| self.hidden_activation.apply(a)).collect();
        let mut output_pre = Vec::with_capacity(self.outputs);
        for (row, b) in self.output_weights().chunks(self.hidden).zip(self.output_bias()) {
            output_pre.push(row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>() + b);
        }
        let outputs = match self.output_activation {
            OutputActivation::Softmax => softmax(&output_pre),
            OutputActivation::Ntanh => output_pre.iter().map(|&z| ntanh(z, TanhMode::Exact)).collect(),
            OutputActivation::NtanhPla => output_pre.iter().map(|&z| ntanh(z, TanhMode::Pla)).collect(),
        };
        Activations {
            hidden_pre,
            hidden,
            output_pre,
            outputs,
        }
    }

    fn forward_fixed(&self, x: &[f64], format: QFormat) -> Result<Vec<f64>, NnError> {
        if self.hidden_activation != HiddenActivation::PlaTanh || self.output_activation != OutputActivation::NtanhPla {
            return Err(NnError::FixedNeedsPla);
        }
        let table = FixedPlaTable::new(format);
        let raw = |v: &[f64]| -> Vec<i64> { v.iter().map(|&w| to_fixed(w, format).raw()).collect() };
        let input = raw(x);
        let (hw, hb) = (raw(self.hidden_weights()), raw(self.hidden_bias()));
        let (ow, ob) = (raw(self.output_weights()), raw(self.output_bias()));
        let hidden: Vec<i64> = hw
            .chunks(self.inputs)
            .zip(&hb)
            .map(|(row, &b)| table.eval(fx_dot(row, &input, b, format)).raw())
            .collect();
        Ok(ow
            .chunks(self.hidden)
            .zip(&ob)
            .map(|(row, &b)| table.eval_ntanh(fx_dot(row, &hidden, b, format)).to_f64())
            .collect())
    }

    pub fn predict(&self, x: &[f64]) -> Result<BeatClass, NnError> {
        Ok(classify(&self.forward(x)?))
    }
}

/// Intermediate values of a real-mode forward pass.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Activations {
    pub hidden_pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub output_pre: Vec<f64>,
    pub outputs: Vec<f64>,
}

/// Index 0 is normal, index 1 arrhythmia; the larger output wins and ties
/// go to arrhythmia.
pub fn classify(outputs: &[f64]) -> BeatClass {
    match outputs {
        [normal, arrhythmia, ..] if normal > arrhythmia => BeatClass::Normal,
        _ => BeatClass::Arrhythmia,
    }
}

/// Result of converting a trained model to fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizeReport {
    pub format: QFormat,
    /// Parameters that hit the format bounds.
    pub saturated: usize,
}

/// Quantizes every parameter (round-to-nearest-even, saturating) and switches
/// to the PLA activations.
pub fn quantize_model(model: &MlpModel, format: QFormat) -> (MlpModel, QuantizeReport) {
    let mut saturated = 0;
    let params = model
        .params
        .iter()
        .map(|&w| {
            let q = to_fixed(w, format);
            if q.is_saturated() && q.to_f64() != w {
                saturated += 1;
            }
            q.to_f64()
        })
        .collect();
    if saturated > 0 {
        log::warn!("{saturated} parameters saturated when quantizing to {format}");
    }
    let quantized = MlpModel {
        hidden_activation: HiddenActivation::PlaTanh,
        output_activation: OutputActivation::NtanhPla,
        numeric: NumericMode::Fixed(format),
        params,
        ..model.clone()
    };
    (quantized, QuantizeReport { format, saturated })
}

/// Real-mode copy of a model with the same parameters.
pub fn to_real(model: &MlpModel) -> MlpModel {
    MlpModel {
        numeric: NumericMode::Real,
        ..model.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(rng: &mut impl Rng, hidden: HiddenActivation, output: OutputActivation) -> MlpModel {
        let m = MlpModel::standard(hidden, output);
        let n = m.params().len();
        m.with_params((0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap()
    }

    #[test]
    fn zero_model_outputs_half() {
        for act in [
            OutputActivation::Ntanh,
            OutputActivation::NtanhPla,
            OutputActivation::Softmax,
        ] {
            let m = MlpModel::standard(HiddenActivation::Tanh, act);
            assert_eq!(m.forward(&[0.3; 12]).unwrap(), vec![0.5, 0.5]);
            assert_eq!(m.predict(&[0.3; 12]).unwrap(), BeatClass::Arrhythmia);
        }
    }

    #[test]
    fn single_path_by_hand() {
        // input 3 -> hidden 2 -> output 1
        let mut m = MlpModel::standard(HiddenActivation::PlaTanh, OutputActivation::NtanhPla);
        let mut p = vec![0.0; m.params().len()];
        p[2 * 12 + 3] = 0.5; // hidden unit 2, input 3
        p[72 + 2] = -0.5; // hidden bias 2
        p[78 + 6 + 2] = 2.0; // output 1 <- hidden 2
        p[90 + 1] = 0.1;
        m.set_params(p).unwrap();
        let mut x = [0.0; 12];
        x[3] = 4.0;
        // hidden pre = 1.5 -> platanh = 1.5/8 + 0.715625 = 0.903125
        // output pre = 1.80625 + 0.1 = 1.90625 -> platanh = 1.90625/8 + 0.715625 = 0.95390625
        let out = m.forward(&x).unwrap();
        assert_eq!(out[0], 0.5);
        assert!((out[1] - (0.95390625 + 1.0) / 2.0).abs() < 1e-15);
        assert_eq!(m.predict(&x).unwrap(), BeatClass::Arrhythmia);
    }

    #[test]
    fn forward_matches_matrix_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let m = random_model(&mut rng, HiddenActivation::Tanh, OutputActivation::Ntanh);
            let x: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
            let p = m.params();
            let w1 = nalgebra::DMatrix::from_row_slice(6, 12, &p[..72]);
            let b1 = nalgebra::DVector::from_row_slice(&p[72..78]);
            let w2 = nalgebra::DMatrix::from_row_slice(2, 6, &p[78..90]);
            let b2 = nalgebra::DVector::from_row_slice(&p[90..92]);
            let h = (w1 * nalgebra::DVector::from_row_slice(&x) + b1).map(f64::tanh);
            let y = (w2 * h + b2).map(|z| (z.tanh() + 1.0) / 2.0);
            let got = m.forward(&x).unwrap();
            for k in 0..2 {
                assert!((got[k] - y[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn classify_rules() {
        assert_eq!(classify(&[0.9, 0.1]), BeatClass::Normal);
        assert_eq!(classify(&[0.5, 0.5]), BeatClass::Arrhythmia);
        assert_eq!(classify(&[0.01, 0.02]), BeatClass::Arrhythmia);
        assert_eq!(classify(&[0.02, 0.01]), BeatClass::Normal);
    }

    #[test]
    fn shape_errors() {
        let m = MlpModel::standard(HiddenActivation::Tanh, OutputActivation::Ntanh);
        assert!(matches!(
            m.forward(&[0.0; 11]),
            Err(NnError::InputShape { expected: 12, got: 11 })
        ));
        assert!(m.clone().with_params(vec![0.0; 3]).is_err());
        assert!(MlpModel::zeros(0, 6, 2, HiddenActivation::Tanh, OutputActivation::Ntanh).is_err());
    }

    #[test]
    fn quantize_sets_raw_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut m = random_model(&mut rng, HiddenActivation::PlaTanh, OutputActivation::NtanhPla);
        m.params_mut()[0] = 1.0;
        m.params_mut()[1] = 5000.0;
        let (q, report) = quantize_model(&m, QFormat::DEFAULT);
        assert_eq!(to_fixed(q.params()[0], QFormat::DEFAULT).raw(), 4096);
        assert_eq!(report.saturated, 1);
        q.validate().unwrap();
        let y = q.forward(&[0.2; 12]).unwrap();
        assert!(y.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn fixed_mode_requires_pla() {
        let mut m = MlpModel::standard(HiddenActivation::Tanh, OutputActivation::Ntanh);
        m.numeric = NumericMode::Fixed(QFormat::DEFAULT);
        assert_eq!(m.validate(), Err(NnError::FixedNeedsPla));
        assert_eq!(m.forward(&[0.0; 12]), Err(NnError::FixedNeedsPla));
    }
}
