//! Element-wise activations. Backward functions take the upstream gradient
//! plus whichever forward value makes the derivative cheapest.

use super::{shape_err, Real, Result, Tensor};

fn zip_map<T: Real>(
    op: &'static str,
    grad: &Tensor<T>,
    saved: &Tensor<T>,
    f: impl Fn(T, T) -> T,
) -> Result<Tensor<T>> {
    if grad.shape() != saved.shape() {
        return Err(shape_err(op, format!("{:?} vs {:?}", grad.shape(), saved.shape())));
    }
    let data = grad.data().iter().zip(saved.data()).map(|(&g, &s)| f(g, s)).collect();
    Tensor::new(grad.shape(), data)
}

pub fn leaky_relu<T: Real>(input: &Tensor<T>, slope: T) -> Tensor<T> {
    input.map(|v| if v > T::zero() { v } else { v * slope })
}

/// Takes the forward *input*.
pub fn leaky_relu_backward<T: Real>(grad: &Tensor<T>, input: &Tensor<T>, slope: T) -> Result<Tensor<T>> {
    zip_map("leaky_relu_backward", grad, input, |g, x| if x > T::zero() { g } else { g * slope })
}

pub fn relu<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Takes the forward *input*.
pub fn relu_backward<T: Real>(grad: &Tensor<T>, input: &Tensor<T>) -> Result<Tensor<T>> {
    zip_map("relu_backward", grad, input, |g, x| if x > T::zero() { g } else { T::zero() })
}

pub fn sigmoid<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    input.map(sigmoid_scalar)
}

pub(crate) fn sigmoid_scalar<T: Real>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

/// Takes the forward *output*.
pub fn sigmoid_backward<T: Real>(grad: &Tensor<T>, output: &Tensor<T>) -> Result<Tensor<T>> {
    zip_map("sigmoid_backward", grad, output, |g, y| g * y * (T::one() - y))
}

pub fn tanh<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| v.tanh())
}

/// Takes the forward *output*.
pub fn tanh_backward<T: Real>(grad: &Tensor<T>, output: &Tensor<T>) -> Result<Tensor<T>> {
    zip_map("tanh_backward", grad, output, |g, y| g * (T::one() - y * y))
}
