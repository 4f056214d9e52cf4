//! Parameterised building blocks shared by the generator and discriminator.

use super::NetResult;
use crate::tensor::{
    batchnorm, batchnorm_backward, conv2d, conv2d_backward_parts, leaky_relu, leaky_relu_backward,
    relu, relu_backward, tanh, tanh_backward, transposed_conv2d, transposed_conv2d_backward_parts,
    BatchNormCache, ConvSpec, Needs, NormMode, Real, RunningStats, Tensor,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Activation<T> {
    Leaky(T),
    Relu,
    Tanh,
}

impl<T: Real> Activation<T> {
    fn apply(&self, x: &Tensor<T>) -> Tensor<T> {
        match *self {
            Activation::Leaky(s) => leaky_relu(x, s),
            Activation::Relu => relu(x),
            Activation::Tanh => tanh(x),
        }
    }

    fn backward(&self, grad: &Tensor<T>, pre: &Tensor<T>, post: &Tensor<T>) -> NetResult<Tensor<T>> {
        Ok(match *self {
            Activation::Leaky(s) => leaky_relu_backward(grad, pre, s)?,
            Activation::Relu => relu_backward(grad, pre)?,
            Activation::Tanh => tanh_backward(grad, post)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormLayer<T> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running: RunningStats<T>,
}

impl<T: Real> BatchNormLayer<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Tensor::full(&[channels], T::one()),
            beta: Tensor::zeros(&[channels]),
            running: RunningStats::new(channels),
        }
    }
}

/// Convolution (or transposed convolution), optional batch norm, activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Block<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub spec: ConvSpec,
    pub transposed: bool,
    pub norm: Option<BatchNormLayer<T>>,
    pub(crate) activation: Activation<T>,
}

#[derive(Debug, Clone)]
pub(crate) struct BlockCache<T> {
    input: Tensor<T>,
    norm: Option<BatchNormCache<T>>,
    pre_activation: Tensor<T>,
    output: Tensor<T>,
}

impl<T: Real> BlockCache<T> {
    pub fn output(&self) -> &Tensor<T> {
        &self.output
    }

    pub(crate) fn pre_activation(&self) -> &Tensor<T> {
        &self.pre_activation
    }
}

impl<T: Real> Block<T> {
    pub(crate) fn new(spec: ConvSpec, transposed: bool, norm: bool, activation: Activation<T>) -> Self {
        let k = spec.kernel;
        let shape = if transposed {
            [spec.in_channels, spec.out_channels, k, k]
        } else {
            [spec.out_channels, spec.in_channels, k, k]
        };
        Self {
            weight: Tensor::zeros(&shape),
            bias: Tensor::zeros(&[spec.out_channels]),
            spec,
            transposed,
            norm: norm.then(|| BatchNormLayer::new(spec.out_channels)),
            activation,
        }
    }

    /// Whether the activation has a kink (rectifiers).
    pub(crate) fn is_piecewise(&self) -> bool {
        !matches!(self.activation, Activation::Tanh)
    }

    fn linear_part(&self, x: &Tensor<T>) -> NetResult<Tensor<T>> {
        Ok(if self.transposed {
            transposed_conv2d(x, &self.weight, &self.bias, &self.spec)?
        } else {
            conv2d(x, &self.weight, &self.bias, &self.spec)?
        })
    }

    pub(crate) fn forward(&mut self, x: &Tensor<T>, mode: NormMode) -> NetResult<BlockCache<T>> {
        let z = self.linear_part(x)?;
        let (pre, norm_cache) = match self.norm.as_mut() {
            Some(bn) => {
                let (y, c) = batchnorm(&z, &bn.gamma, &bn.beta, mode, &mut bn.running)?;
                (y, Some(c))
            }
            None => (z, None),
        };
        let output = self.activation.apply(&pre);
        Ok(BlockCache { input: x.clone(), norm: norm_cache, pre_activation: pre, output })
    }

    /// Eval-mode forward that leaves the block untouched.
    pub(crate) fn infer(&self, x: &Tensor<T>) -> NetResult<Tensor<T>> {
        let z = self.linear_part(x)?;
        let pre = match self.norm.as_ref() {
            Some(bn) => {
                let mut running = bn.running.clone();
                batchnorm(&z, &bn.gamma, &bn.beta, NormMode::Eval, &mut running)?.0
            }
            None => z,
        };
        Ok(self.activation.apply(&pre))
    }

    /// Backpropagates `grad` (w.r.t. the block output). Parameter gradients
    /// are accumulated only when `params` is set; the input gradient is
    /// returned only when `input` is set.
    pub(crate) fn backward(
        &mut self,
        cache: &BlockCache<T>,
        grad: &Tensor<T>,
        input: bool,
        params: bool,
    ) -> NetResult<Option<Tensor<T>>> {
        let mut g = self.activation.backward(grad, &cache.pre_activation, &cache.output)?;
        if let (Some(bn), Some(bc)) = (self.norm.as_mut(), cache.norm.as_ref()) {
            let grads = batchnorm_backward(&g, bc, &bn.gamma)?;
            if params {
                bn.gamma.accumulate_grad(grads.gamma.data());
                bn.beta.accumulate_grad(grads.beta.data());
            }
            g = grads.input;
        }
        let needs = Needs { input, params };
        let (gi, gp) = if self.transposed {
            transposed_conv2d_backward_parts(&g, Some(&cache.input), &self.weight, &self.spec, needs)?
        } else {
            conv2d_backward_parts(&g, Some(&cache.input), &self.weight, &self.spec, needs)?
        };
        if let Some((gw, gb)) = gp {
            self.weight.accumulate_grad(gw.data());
            self.bias.accumulate_grad(gb.data());
        }
        Ok(gi)
    }

    pub(crate) fn visit_params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<T>)>) {
        out.push((format!("{prefix}.weight"), &self.weight));
        out.push((format!("{prefix}.bias"), &self.bias));
        if let Some(bn) = &self.norm {
            out.push((format!("{prefix}.bn.gamma"), &bn.gamma));
            out.push((format!("{prefix}.bn.beta"), &bn.beta));
        }
    }

    pub(crate) fn visit_params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor<T>>) {
        out.push(&mut self.weight);
        out.push(&mut self.bias);
        if let Some(bn) = &mut self.norm {
            out.push(&mut bn.gamma);
            out.push(&mut bn.beta);
        }
    }

    pub(crate) fn visit_buffers<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a [T])>) {
        if let Some(bn) = &self.norm {
            out.push((format!("{prefix}.bn.running_mean"), &bn.running.mean));
            out.push((format!("{prefix}.bn.running_var"), &bn.running.var));
        }
    }

    pub(crate) fn visit_buffers_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Vec<T>>) {
        if let Some(bn) = &mut self.norm {
            out.push(&mut bn.running.mean);
            out.push(&mut bn.running.var);
        }
    }
}

/// Plain affine layer `[N,D] -> [N,M]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> Linear<T> {
    pub fn new(inputs: usize, outputs: usize) -> Self {
        Self { weight: Tensor::zeros(&[inputs, outputs]), bias: Tensor::zeros(&[outputs]) }
    }
}
