use super::{Real, Result, Tensor, TensorError};

/// Hyperparameters of the adaptive-moment optimiser.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 2e-4, beta1: 0.5, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment buffers for an ordered list of parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub first: Vec<Vec<T>>,
    pub second: Vec<Vec<T>>,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(config: AdamConfig, sizes: &[usize]) -> Self {
        Self {
            config,
            step: 0,
            first: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            second: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    /// One bias-corrected Adam update of `params` using their gradient
    /// buffers. Nothing is modified if any gradient is missing or non-finite.
    pub fn apply(&mut self, params: &mut [&mut Tensor<T>]) -> Result<()> {
        if params.len() != self.first.len() {
            return Err(TensorError::Shape {
                op: "adam",
                detail: format!("{} parameters, state tracks {}", params.len(), self.first.len()),
            });
        }
        for (i, p) in params.iter().enumerate() {
            let grad = p.grad().ok_or(TensorError::MissingGradient(i))?;
            if grad.len() != self.first[i].len() {
                return Err(TensorError::Shape {
                    op: "adam",
                    detail: format!("parameter {i} has {} values, moments have {}", grad.len(), self.first[i].len()),
                });
            }
            if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
                return Err(TensorError::NonFiniteGradient { param: i, index });
            }
        }

        self.step += 1;
        let c = &self.config;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let (lr, eps) = (T::lit(c.lr), T::lit(c.eps));
        let bc1 = T::one() - b1.powi(self.step as i32);
        let bc2 = T::one() - b2.powi(self.step as i32);
        for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            let grad = p.grad().expect("checked").to_vec();
            for (((w, g), m), v) in p.data_mut().iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(w: f64, g: f64) -> Tensor<f64> {
        let mut t = Tensor::full(&[1], w);
        t.grad_mut()[0] = g;
        t
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = Tensor::from_fn(&[4], |i| i as f64);
        p.grad_mut();
        let before = p.data().to_vec();
        let mut st = OptimizerState::new(AdamConfig::default(), &[4]);
        st.apply(&mut [&mut p]).unwrap();
        assert_eq!(p.data(), before.as_slice());
    }

    #[test]
    fn descends_on_square() {
        let mut w = scalar(1.0, 2.0); // d/dw w^2 at 1
        let mut st = OptimizerState::new(AdamConfig { lr: 0.1, ..Default::default() }, &[1]);
        st.apply(&mut [&mut w]).unwrap();
        assert!(w.data()[0] < 1.0 && w.data()[0] > 0.0);
    }

    #[test]
    fn two_steps_match_hand_unrolled_formula() {
        let cfg = AdamConfig { lr: 0.01, beta1: 0.9, beta2: 0.99, eps: 1e-8 };
        let mut st = OptimizerState::new(cfg, &[1]);
        let mut w = scalar(0.5, 0.3);
        st.apply(&mut [&mut w]).unwrap();
        w.grad_mut()[0] = -0.7;
        st.apply(&mut [&mut w]).unwrap();

        // hand unroll
        let m1 = 0.1 * 0.3;
        let v1 = 0.01 * 0.09;
        let w1 = 0.5 - 0.01 * (m1 / 0.1) / ((v1 / 0.01f64).sqrt() + 1e-8);
        let m2 = 0.9 * m1 + 0.1 * -0.7;
        let v2 = 0.99 * v1 + 0.01 * 0.49;
        let w2 = w1 - 0.01 * (m2 / (1.0 - 0.81)) / ((v2 / (1.0 - 0.9801f64)).sqrt() + 1e-8);
        assert!((w.data()[0] - w2).abs() < 1e-12, "{} vs {w2}", w.data()[0]);
    }

    #[test]
    fn non_finite_gradient_rejected_without_side_effects() {
        let mut a = scalar(1.0, 0.5);
        let mut b = scalar(2.0, f64::NAN);
        let mut st = OptimizerState::new(AdamConfig::default(), &[1, 1]);
        let err = st.apply(&mut [&mut a, &mut b]).unwrap_err();
        assert_eq!(err, TensorError::NonFiniteGradient { param: 1, index: 0 });
        assert_eq!(a.data(), &[1.0]);
        assert_eq!(st.step, 0);
    }
}
