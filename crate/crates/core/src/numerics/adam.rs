use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moments for an ordered list of parameter tensors.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    config: AdamConfig,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
    step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new<'a>(config: AdamConfig, params: impl IntoIterator<Item = &'a Tensor<T>>) -> Self {
        let first: Vec<_> = params.into_iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            config,
            second: first.clone(),
            first,
            step: 0,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Tensor<T>] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Tensor<T>] {
        &self.second
    }

    /// One bias-corrected update. Gradients are checked before anything is
    /// mutated; a non-finite gradient aborts the step naming its parameter.
    pub fn step(&mut self, params: &mut [Tensor<T>], grads: &[&Tensor<T>], names: &[&str]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::Argument(format!(
                "adam tracks {} tensors, got {} params and {} gradients",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.first[i].shape() {
                return Err(Error::Shape {
                    op: "adam_step",
                    lhs: p.shape().to_vec(),
                    rhs: g.shape().to_vec(),
                });
            }
            if !g.is_finite() {
                let name = names.get(i).map_or_else(|| format!("#{i}"), |n| n.to_string());
                return Err(Error::NonFiniteGradient(name));
            }
        }

        self.step += 1;
        let c = self.config;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let lr = T::of(c.learning_rate);
        let eps = T::of(c.epsilon);
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let bc1 = T::one() - b1.powi(t);
        let bc2 = T::one() - b2.powi(t);

        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            for (((pv, &gv), mv), vv) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mv = b1 * *mv + (T::one() - b1) * gv;
                *vv = b2 * *vv + (T::one() - b2) * gv * gv;
                let m_hat = *mv / bc1;
                let v_hat = *vv / bc2;
                *pv -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_step(state: &mut AdamState<f64>, w: &mut Tensor<f64>, g: f64) {
        let grad = Tensor::scalar(g);
        state.step(std::slice::from_mut(w), &[&grad], &["w"]).unwrap();
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut w = Tensor::scalar(0.7);
        let mut state = AdamState::new(AdamConfig::default(), [&w]);
        // seed nonzero moments, then feed zeros
        scalar_step(&mut state, &mut w, 1.0);
        let after_first = w.item();
        let m0 = state.first_moments()[0].item();
        let v0 = state.second_moments()[0].item();
        let mut w2 = Tensor::scalar(0.7);
        let mut fresh = AdamState::new(AdamConfig::default(), [&w2]);
        scalar_step(&mut fresh, &mut w2, 0.0);
        assert_eq!(w2.item(), 0.7);

        scalar_step(&mut state, &mut w, 0.0);
        assert!(state.first_moments()[0].item().abs() < m0.abs());
        assert!(state.second_moments()[0].item() < v0);
        assert_ne!(w.item(), after_first); // momentum still moves it
    }

    #[test]
    fn single_step_moves_by_learning_rate() {
        // closed form: m̂ = g, v̂ = g², Δ = lr·g / (|g| + ε)
        let lr = 1e-3;
        let eps = 1e-8;
        let expected = 1.0 - lr * 1.0 / (1.0 + eps);
        let mut w = Tensor::scalar(1.0);
        let mut state = AdamState::new(AdamConfig::default(), [&w]);
        scalar_step(&mut state, &mut w, 1.0);
        assert!((w.item() - expected).abs() < 1e-15);
        assert!((1.0 - w.item() - lr).abs() < 1e-9);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn descends_quadratic_monotonically() {
        let mut w = Tensor::scalar(1.0);
        let mut state = AdamState::new(AdamConfig::default(), [&w]);
        let mut prev = 1.0;
        for step in 1..=10 {
            let g = 2.0 * w.item();
            scalar_step(&mut state, &mut w, g);
            let f = w.item() * w.item();
            assert!(f < prev, "f did not decrease at step {step}");
            prev = f;
            assert_eq!(state.step_count(), step);
        }
    }

    #[test]
    fn non_finite_gradient_names_parameter_and_leaves_state() {
        let mut ps = vec![Tensor::scalar(1.0), Tensor::zeros(&[2])];
        let mut state = AdamState::new(AdamConfig::default(), ps.iter());
        let g0 = Tensor::scalar(1.0);
        let g1 = Tensor::new(vec![2], vec![0.0, f64::NAN]).unwrap();
        let err = state.step(&mut ps, &[&g0, &g1], &["a.weight", "b.bias"]).unwrap_err();
        assert!(err.to_string().contains("b.bias"), "{err}");
        assert_eq!(ps[0].item(), 1.0);
        assert_eq!(state.step_count(), 0);
    }

    #[test]
    fn moment_shapes_follow_params() {
        let ps = [Tensor::<f32>::zeros(&[3, 4]), Tensor::zeros(&[5])];
        let state = AdamState::new(AdamConfig::default(), ps.iter());
        for (p, (m, v)) in ps.iter().zip(state.first_moments().iter().zip(state.second_moments())) {
            assert_eq!(p.shape(), m.shape());
            assert_eq!(p.shape(), v.shape());
        }
    }
}
