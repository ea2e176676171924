/// Resilient backpropagation: per-weight step sizes adapted from the sign
/// of successive gradients.
///
/// On a sign change the step shrinks, the stored gradient is cleared and the
/// weight is left in place, so the following step is treated as a fresh start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpropParams {
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
}

impl Default for RpropParams {
    fn default() -> Self {
        RpropParams {
            eta_plus: 1.2,
            eta_minus: 0.5,
            initial_step: 0.1,
            max_step: 50.0,
            min_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RpropState {
    pub params: RpropParams,
    pub steps: Vec<f64>,
    pub previous: Vec<f64>,
}

impl RpropState {
    pub fn new(n: usize, params: RpropParams) -> Self {
        RpropState {
            params,
            steps: vec![params.initial_step; n],
            previous: vec![0.0; n],
        }
    }

    /// Applies one update to `weights` in place.
    pub fn step(&mut self, weights: &mut [f64], grads: &[f64]) {
        assert_eq!(weights.len(), self.steps.len());
        assert_eq!(grads.len(), self.steps.len());
        let p = self.params;
        for i in 0..weights.len() {
            let g = grads[i];
            let agreement = self.previous[i] * g;
            if agreement > 0.0 {
                self.steps[i] = (self.steps[i] * p.eta_plus).min(p.max_step);
                weights[i] -= g.signum() * self.steps[i];
                self.previous[i] = g;
            } else if agreement < 0.0 {
                self.steps[i] = (self.steps[i] * p.eta_minus).max(p.min_step);
                self.previous[i] = 0.0;
            } else {
                if g != 0.0 {
                    weights[i] -= g.signum() * self.steps[i];
                }
                self.previous[i] = g;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn same_sign_grows_step() {
        let mut s = RpropState::new(1, RpropParams::default());
        s.previous[0] = 0.3;
        let mut w = [1.0];
        s.step(&mut w, &[0.7]);
        assert!((s.steps[0] - 0.12).abs() < 1e-15);
        assert!((w[0] - 0.88).abs() < 1e-15);
    }

    #[test]
    fn flip_shrinks_step_and_resets() {
        let mut s = RpropState::new(1, RpropParams::default());
        s.steps[0] = 0.12;
        s.previous[0] = 1.0;
        let mut w = [0.0];
        s.step(&mut w, &[-2.0]);
        assert!((s.steps[0] - 0.06).abs() < 1e-15);
        assert_eq!(w[0], 0.0);
        assert_eq!(s.previous[0], 0.0);
        // no second flip: the next opposite-sign gradient just moves the weight
        s.step(&mut w, &[3.0]);
        assert!((s.steps[0] - 0.06).abs() < 1e-15);
        assert!((w[0] + 0.06).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut s = RpropState::new(2, RpropParams::default());
        s.previous = vec![0.5, 0.0];
        let mut w = [1.0, 2.0];
        s.step(&mut w, &[0.0, 0.0]);
        assert_eq!(w, [1.0, 2.0]);
        assert_eq!(s.steps, vec![0.1, 0.1]);
    }

    proptest! {
        #[test]
        fn steps_stay_in_bounds(grads in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 4), 1..200)) {
            let p = RpropParams::default();
            let mut s = RpropState::new(4, p);
            let mut w = [0.0; 4];
            for g in &grads {
                s.step(&mut w, g);
                prop_assert!(s.steps.iter().all(|&d| (p.min_step..=p.max_step).contains(&d)));
            }
        }
    }
}
