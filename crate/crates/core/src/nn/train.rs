use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{gradients, BeatClass, MlpModel, NnError, NumericMode, RpropParams, RpropState, Sample};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub max_epochs: usize,
    pub seed: u64,
    /// Replicate minority-class samples up to one third of the majority.
    pub balance: bool,
    /// Stop after this many epochs without `min_improvement`.
    pub patience: usize,
    pub min_improvement: f64,
    pub rprop: RpropParams,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            max_epochs: 500,
            seed: 0,
            balance: true,
            patience: 20,
            min_improvement: 1e-7,
            rprop: RpropParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxEpochs,
    Converged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Full-batch MSE measured at the start of each epoch.
    pub mse_history: Vec<f64>,
    pub epochs: usize,
    pub stop_reason: StopReason,
    /// MSE of the returned model.
    pub final_mse: f64,
    /// Size of the training set after class balancing.
    pub balanced_size: usize,
}

/// Repeats minority-class samples (in order, cycling) until the minority
/// makes up at least a third of the majority count.
pub fn balance_classes(data: &[Sample]) -> Vec<Sample> {
    let (normal, arrhythmia): (Vec<&Sample>, Vec<&Sample>) = data.iter().partition(|s| s.class() == BeatClass::Normal);
    let (minority, majority_len) = if normal.len() < arrhythmia.len() {
        (normal, arrhythmia.len())
    } else {
        (arrhythmia, normal.len())
    };
    let mut out = data.to_vec();
    if minority.is_empty() {
        return out;
    }
    let mut count = minority.len();
    let mut i = 0;
    while count * 3 < majority_len {
        out.push(minority[i % minority.len()].clone());
        count += 1;
        i += 1;
    }
    out
}

/// Full-batch RPROP training from a seeded uniform [-0.5, 0.5] initialization.
///
/// The architecture and activations of `model` are kept; its parameters are
/// replaced. Training happens in real arithmetic.
pub fn train(model: &MlpModel, data: &[Sample], options: &TrainOptions) -> Result<(MlpModel, TrainReport), NnError> {
    if data.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let first = data[0].class();
    if data.iter().all(|s| s.class() == first) {
        return Err(NnError::SingleClass);
    }
    let data = if options.balance {
        balance_classes(data)
    } else {
        data.to_vec()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut model = MlpModel {
        numeric: NumericMode::Real,
        ..model.clone()
    };
    for w in model.params_mut() {
        *w = rng.random_range(-0.5..=0.5);
    }

    let mut state = RpropState::new(model.params().len(), options.rprop);
    let mut history = Vec::with_capacity(options.max_epochs);
    let mut best = f64::INFINITY;
    let mut stale = 0;
    let mut stop_reason = StopReason::MaxEpochs;
    for _ in 0..options.max_epochs {
        let (grad, loss) = gradients(&model, &data)?;
        history.push(loss);
        if loss < best - options.min_improvement {
            best = loss;
            stale = 0;
        } else {
            stale += 1;
        }
        if stale >= options.patience {
            stop_reason = StopReason::Converged;
            break;
        }
        state.step(model.params_mut(), &grad);
    }
    let final_mse = super::mse(&model, &data)?;
    let report = TrainReport {
        epochs: history.len(),
        mse_history: history,
        stop_reason,
        final_mse,
        balanced_size: data.len(),
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::{HiddenActivation, OutputActivation};

    fn toy(n_normal: usize, n_arr: usize) -> Vec<Sample> {
        let mut v = Vec::new();
        for i in 0..n_normal {
            v.push(Sample::labelled(vec![-0.5, i as f64 * 0.01], BeatClass::Normal));
        }
        for i in 0..n_arr {
            v.push(Sample::labelled(vec![0.5, i as f64 * 0.01], BeatClass::Arrhythmia));
        }
        v
    }

    fn small_model() -> MlpModel {
        MlpModel::zeros(2, 3, 2, HiddenActivation::Tanh, OutputActivation::Ntanh).unwrap()
    }

    #[test]
    fn balancing_floor() {
        let b = balance_classes(&toy(30, 2));
        let arr = b.iter().filter(|s| s.class() == BeatClass::Arrhythmia).count();
        assert_eq!(arr, 10);
        assert_eq!(b.len(), 40);
        assert_eq!(balance_classes(&toy(5, 5)).len(), 10);
    }

    #[test]
    fn rejects_degenerate_sets() {
        let opts = TrainOptions::default();
        assert_eq!(train(&small_model(), &[], &opts).unwrap_err(), NnError::EmptyDataset);
        assert_eq!(
            train(&small_model(), &toy(4, 0), &opts).unwrap_err(),
            NnError::SingleClass
        );
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let opts = TrainOptions {
            max_epochs: 0,
            seed: 3,
            ..TrainOptions::default()
        };
        let (m, report) = train(&small_model(), &toy(5, 5), &opts).unwrap();
        assert!(report.mse_history.is_empty());
        assert_eq!(report.epochs, 0);
        assert!(m.params().iter().all(|w| (-0.5..=0.5).contains(w)));
        assert!(m.params().iter().any(|&w| w != 0.0));
    }

    #[test]
    fn seeded_runs_are_identical() {
        let opts = TrainOptions {
            max_epochs: 50,
            seed: 7,
            ..TrainOptions::default()
        };
        let a = train(&small_model(), &toy(10, 10), &opts).unwrap();
        let b = train(&small_model(), &toy(10, 10), &opts).unwrap();
        assert_eq!(a, b);
        let c = train(&small_model(), &toy(10, 10), &TrainOptions { seed: 8, ..opts }).unwrap();
        assert_ne!(a.0.params(), c.0.params());
    }

    #[test]
    fn loss_decreases_on_easy_problem() {
        let opts = TrainOptions {
            max_epochs: 100,
            seed: 1,
            ..TrainOptions::default()
        };
        let (_, r) = train(&small_model(), &toy(10, 10), &opts).unwrap();
        assert!(r.final_mse < r.mse_history[0]);
        assert!(r.mse_history.iter().all(|&v| v >= 0.0));
    }
}
