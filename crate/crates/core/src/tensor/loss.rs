use super::activation::sigmoid_scalar;
use super::{shape_err, Real, Result, Tensor};

/// Probabilities are clamped into `[BCE_EPS, 1 - BCE_EPS]` before the log.
pub const BCE_EPS: f64 = 1e-7;

/// Mean of squared element-wise differences.
pub fn mse_loss<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<T> {
    if a.shape() != b.shape() {
        return Err(shape_err("mse_loss", format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let sum = a.data().iter().zip(b.data()).fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y));
    Ok(sum / T::from_usize(a.len()).unwrap())
}

/// Gradient of [`mse_loss`] with respect to `a`.
pub fn mse_loss_grad<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.shape() != b.shape() {
        return Err(shape_err("mse_loss_grad", format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let scale = T::lit(2.0) / T::from_usize(a.len()).unwrap();
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| scale * (x - y)).collect();
    Tensor::new(a.shape(), data)
}

fn clamp_prob<T: Real>(p: T) -> T {
    let eps = T::lit(BCE_EPS);
    p.max(eps).min(T::one() - eps)
}

/// `-[t ln p + (1 - t) ln(1 - p)]` with `p` clamped away from 0 and 1.
pub fn bce_loss<T: Real>(prediction: T, target: T) -> T {
    let p = clamp_prob(prediction);
    -(target * p.ln() + (T::one() - target) * (T::one() - p).ln())
}

/// Derivative of [`bce_loss`] with respect to the (clamped) prediction.
pub fn bce_loss_grad<T: Real>(prediction: T, target: T) -> T {
    let p = clamp_prob(prediction);
    (p - target) / (p * (T::one() - p))
}

/// Mean BCE of a batch of sigmoid outputs against one shared target.
pub fn bce_mean<T: Real>(predictions: &[T], target: T) -> T {
    let sum = predictions.iter().fold(T::zero(), |acc, &p| acc + bce_loss(p, target));
    sum / T::from_usize(predictions.len()).unwrap()
}

/// Gradient of [`bce_mean`] with respect to the pre-sigmoid logits.
///
/// Uses the closed form `(sigmoid(z) - t) / N`, which stays informative when
/// the sigmoid saturates in low precision.
pub fn bce_mean_logit_grad<T: Real>(logits: &[T], target: T) -> Vec<T> {
    let n = T::from_usize(logits.len()).unwrap();
    logits.iter().map(|&z| (sigmoid_scalar(z) - target) / n).collect()
}
