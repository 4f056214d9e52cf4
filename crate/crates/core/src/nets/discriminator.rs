use super::layers::{Activation, Block, BlockCache, Linear};
use super::{check_input, encoder_geometry, DiscriminatorConfig, NetError, NetResult, Network};
use crate::tensor::{
    fully_connected, fully_connected_backward_parts, leaky_relu, leaky_relu_backward, ConvSpec,
    NormMode, Real, Tensor,
};

/// Convolutional encoder, fully connected feature layer, sigmoid realness head.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator<T = f32> {
    config: DiscriminatorConfig,
    encoder: Vec<Block<T>>,
    pub feature: Linear<T>,
    pub head: Linear<T>,
}

/// Per-image outputs of one discriminator pass.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscOutput<T> {
    /// `[N, feature_dim]` activations of the fully connected feature layer.
    pub features: Tensor<T>,
    /// Pre-sigmoid scores, one per image.
    pub logits: Vec<T>,
    /// `sigmoid(logits)`, the probability that each image is real.
    pub realness: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct DiscriminatorCache<T> {
    encoder: Vec<BlockCache<T>>,
    encoded_shape: Vec<usize>,
    flat: Tensor<T>,
    feature_pre: Tensor<T>,
    features: Tensor<T>,
}

impl<T: Real> Discriminator<T> {
    pub fn new(config: DiscriminatorConfig) -> NetResult<Self> {
        let (padding, sizes) = encoder_geometry(
            config.input_size,
            config.input_channels,
            &config.encoder_channels,
            config.kernel,
            config.stride,
            config.leaky_slope,
        )?;
        if config.feature_dim == 0 {
            return Err(NetError::Config("feature_dim must be positive".into()));
        }
        let slope = T::lit(config.leaky_slope);
        let mut encoder = Vec::new();
        let mut c_in = config.input_channels;
        for (i, &c_out) in config.encoder_channels.iter().enumerate() {
            let spec = ConvSpec::new(c_in, c_out, config.kernel, config.stride, padding);
            encoder.push(Block::new(spec, false, i > 0, Activation::Leaky(slope)));
            c_in = c_out;
        }
        let last = *sizes.last().expect("non-empty encoder");
        let flat = c_in * last * last;
        Ok(Self {
            feature: Linear::new(flat, config.feature_dim),
            head: Linear::new(config.feature_dim, 1),
            config,
            encoder,
        })
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.config
    }

    pub fn feature_dim(&self) -> usize {
        self.config.feature_dim
    }

    fn slope(&self) -> T {
        T::lit(self.config.leaky_slope)
    }

    fn heads(&self, encoded: &Tensor<T>) -> NetResult<(Tensor<T>, Tensor<T>, Tensor<T>, DiscOutput<T>)> {
        let n = encoded.shape()[0];
        let flat = encoded.clone().reshape(&[n, encoded.len() / n])?;
        let feature_pre = fully_connected(&flat, &self.feature.weight, &self.feature.bias)?;
        let features = leaky_relu(&feature_pre, self.slope());
        let logits = fully_connected(&features, &self.head.weight, &self.head.bias)?.into_data();
        let realness = logits.iter().map(|&z| crate::tensor::sigmoid_scalar(z)).collect();
        let out = DiscOutput { features: features.clone(), logits, realness };
        Ok((flat, feature_pre, features, out))
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: NormMode) -> NetResult<(DiscOutput<T>, DiscriminatorCache<T>)> {
        check_input(x, self.config.input_channels, self.config.input_size)?;
        let mut enc = Vec::with_capacity(self.encoder.len());
        let mut h = x.clone();
        for block in &mut self.encoder {
            let c = block.forward(&h, mode)?;
            h = c.output().clone();
            enc.push(c);
        }
        let (flat, feature_pre, features, out) = self.heads(&h)?;
        let cache = DiscriminatorCache {
            encoder: enc,
            encoded_shape: h.shape().to_vec(),
            flat,
            feature_pre,
            features,
        };
        Ok((out, cache))
    }

    /// Eval-mode pass; features and realness come from the same computation.
    pub fn infer(&self, x: &Tensor<T>) -> NetResult<DiscOutput<T>> {
        check_input(x, self.config.input_channels, self.config.input_size)?;
        let mut h = x.clone();
        for block in &self.encoder {
            h = block.infer(&h)?;
        }
        Ok(self.heads(&h)?.3)
    }

    /// Inputs of every rectifier in a cached pass, in layer order.
    pub fn kink_inputs<'a>(&self, cache: &'a DiscriminatorCache<T>) -> Vec<&'a Tensor<T>> {
        let mut out: Vec<&Tensor<T>> = self
            .encoder
            .iter()
            .zip(&cache.encoder)
            .filter(|(b, _)| b.is_piecewise())
            .map(|(_, c)| c.pre_activation())
            .collect();
        out.push(&cache.feature_pre);
        out
    }

    /// Backpropagates gradients with respect to the logits (and optionally
    /// the features) through the cached pass.
    pub fn backward(
        &mut self,
        cache: &DiscriminatorCache<T>,
        grad_logits: &[T],
        grad_features: Option<&Tensor<T>>,
        input: bool,
        params: bool,
    ) -> NetResult<Option<Tensor<T>>> {
        let n = cache.features.shape()[0];
        if grad_logits.len() != n {
            return Err(NetError::Config(format!("{} logit gradients for a batch of {n}", grad_logits.len())));
        }
        let g_logits = Tensor::new(&[n, 1], grad_logits.to_vec())?;
        let (mut g_feat, head) = fully_connected_backward_parts(&g_logits, Some(&cache.features), &self.head.weight, params)?;
        if let Some((gw, gb)) = head {
            self.head.weight.accumulate_grad(gw.data());
            self.head.bias.accumulate_grad(gb.data());
        }
        if let Some(extra) = grad_features {
            g_feat = g_feat.add(extra)?;
        }
        let g_pre = leaky_relu_backward(&g_feat, &cache.feature_pre, self.slope())?;
        let (g_flat, feat) = fully_connected_backward_parts(&g_pre, Some(&cache.flat), &self.feature.weight, params)?;
        if let Some((gw, gb)) = feat {
            self.feature.weight.accumulate_grad(gw.data());
            self.feature.bias.accumulate_grad(gb.data());
        }
        let mut g = g_flat.reshape(&cache.encoded_shape)?;
        for i in (0..self.encoder.len()).rev() {
            let want_input = i > 0 || input;
            match self.encoder[i].backward(&cache.encoder[i], &g, want_input, params)? {
                Some(next) => g = next,
                None => return Ok(None),
            }
        }
        Ok(Some(g))
    }
}

impl<T: Real> Network<T> for Discriminator<T> {
    fn named_params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (i, b) in self.encoder.iter().enumerate() {
            b.visit_params(&format!("enc{i}"), &mut out);
        }
        out.push(("feature.weight".into(), &self.feature.weight));
        out.push(("feature.bias".into(), &self.feature.bias));
        out.push(("head.weight".into(), &self.head.weight));
        out.push(("head.bias".into(), &self.head.bias));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for b in self.encoder.iter_mut() {
            b.visit_params_mut(&mut out);
        }
        out.push(&mut self.feature.weight);
        out.push(&mut self.feature.bias);
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }

    fn named_buffers(&self) -> Vec<(String, &[T])> {
        let mut out = Vec::new();
        for (i, b) in self.encoder.iter().enumerate() {
            b.visit_buffers(&format!("enc{i}"), &mut out);
        }
        out
    }

    fn buffers_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut out = Vec::new();
        for b in self.encoder.iter_mut() {
            b.visit_buffers_mut(&mut out);
        }
        out
    }
}
