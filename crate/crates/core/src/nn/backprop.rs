use crate::activation::{ntanh_derivative, OutputActivation, TanhMode};

use super::{classify, BeatClass, MlpModel, NnError};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

impl Sample {
    pub fn labelled(input: Vec<f64>, class: BeatClass) -> Self {
        Sample {
            input,
            target: class.one_hot().to_vec(),
        }
    }

    pub fn class(&self) -> BeatClass {
        classify(&self.target)
    }
}

/// Mean squared error over every output of every sample:
/// `1/(N*K) * sum (y - t)^2`.
pub fn mse(model: &MlpModel, batch: &[Sample]) -> Result<f64, NnError> {
    if batch.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for s in batch {
        let y = model.forward(&s.input)?;
        total += y.iter().zip(&s.target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(total / (batch.len() * model.outputs) as f64)
}

/// Gradient of [`mse`] with respect to every parameter, computed in real
/// arithmetic. PLA activations contribute the slope of the owning segment.
/// Returns the gradient together with the batch MSE.
pub fn gradients(model: &MlpModel, batch: &[Sample]) -> Result<(Vec<f64>, f64), NnError> {
    let mut grad = vec![0.0; model.params().len()];
    if batch.is_empty() {
        return Ok((grad, 0.0));
    }
    let (ni, nh, no) = (model.inputs, model.hidden, model.outputs);
    let hw_end = nh * ni;
    let hb_end = hw_end + nh;
    let ow_end = hb_end + no * nh;
    let scale = 2.0 / (batch.len() * no) as f64;
    let output_weights = model.output_weights();
    let mut total = 0.0;

    let mut delta_out = vec![0.0; no];
    let mut delta_hidden = vec![0.0; nh];
    for s in batch {
        if s.input.len() != ni {
            return Err(NnError::InputShape {
                expected: ni,
                got: s.input.len(),
            });
        }
        if s.target.len() != no {
            return Err(NnError::Architecture(format!(
                "target has {} entries, model has {no} outputs",
                s.target.len()
            )));
        }
        let act = model.forward_real(&s.input);
        let err: Vec<f64> = act.outputs.iter().zip(&s.target).map(|(y, t)| y - t).collect();
        total += err.iter().map(|e| e * e).sum::<f64>();

        match model.output_activation {
            OutputActivation::Softmax => {
                // dE/dz_j = sum_k dE/dy_k * y_k (delta_kj - y_j)
                let weighted: f64 = err.iter().zip(&act.outputs).map(|(e, y)| e * y).sum();
                for j in 0..no {
                    delta_out[j] = scale * act.outputs[j] * (err[j] - weighted);
                }
            }
            OutputActivation::Ntanh | OutputActivation::NtanhPla => {
                let mode = if model.output_activation == OutputActivation::Ntanh {
                    TanhMode::Exact
                } else {
                    TanhMode::Pla
                };
                for j in 0..no {
                    delta_out[j] = scale * err[j] * ntanh_derivative(act.output_pre[j], mode);
                }
            }
        }
        for h in 0..nh {
            let back: f64 = (0..no).map(|k| delta_out[k] * output_weights[k * nh + h]).sum();
            delta_hidden[h] = back * model.hidden_activation.derivative(act.hidden_pre[h]);
        }

        for h in 0..nh {
            let row = &mut grad[h * ni..(h + 1) * ni];
            for (g, x) in row.iter_mut().zip(&s.input) {
                *g += delta_hidden[h] * x;
            }
            grad[hw_end + h] += delta_hidden[h];
        }
        for k in 0..no {
            let row = &mut grad[hb_end + k * nh..hb_end + (k + 1) * nh];
            for (g, hv) in row.iter_mut().zip(&act.hidden) {
                *g += delta_out[k] * hv;
            }
            grad[ow_end + k] += delta_out[k];
        }
    }
    Ok((grad, total / (batch.len() * no) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::{platanh_slope, HiddenActivation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn central_difference(model: &MlpModel, batch: &[Sample], i: usize, h: f64) -> f64 {
        let mut plus = model.clone();
        plus.params_mut()[i] += h;
        let mut minus = model.clone();
        minus.params_mut()[i] -= h;
        (mse(&plus, batch).unwrap() - mse(&minus, batch).unwrap()) / (2.0 * h)
    }

    #[test]
    fn zero_error_batch_has_zero_gradient() {
        // PLA outputs saturate exactly, so targets can be hit exactly
        let mut m = MlpModel::standard(HiddenActivation::PlaTanh, OutputActivation::NtanhPla);
        let mut p = vec![0.0; m.params().len()];
        p[90] = 10.0;
        p[91] = -10.0;
        m.set_params(p).unwrap();
        let batch = vec![Sample::labelled(vec![0.3; 12], BeatClass::Normal)];
        let (g, loss) = gradients(&m, &batch).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn softmax_gradient_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = MlpModel::standard(HiddenActivation::Tanh, OutputActivation::Softmax);
        let n = m.params().len();
        let m = m
            .with_params((0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap();
        let batch: Vec<Sample> = (0..5)
            .map(|i| {
                let x = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
                Sample::labelled(
                    x,
                    if i % 2 == 0 {
                        BeatClass::Normal
                    } else {
                        BeatClass::Arrhythmia
                    },
                )
            })
            .collect();
        let (g, _) = gradients(&m, &batch).unwrap();
        for i in 0..n {
            let fd = central_difference(&m, &batch, i, 1e-5);
            assert!(
                (g[i] - fd).abs() <= 1e-6 * g[i].abs().max(fd.abs()) + 1e-9,
                "param {i}: {} vs {fd}",
                g[i]
            );
        }
    }

    #[test]
    fn pla_hidden_derivative_is_segment_slope() {
        assert_eq!(HiddenActivation::PlaTanh.derivative(1.0), 0.5);
        assert_eq!(platanh_slope(1.0), 0.5);
    }
}
