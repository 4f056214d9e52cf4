use super::layers::{Activation, Block, BlockCache};
use super::{check_input, encoder_geometry, GeneratorConfig, NetError, NetResult, Network};
use crate::tensor::{ConvSpec, NormMode, Real, Tensor};

/// Encoder-decoder image translator with additive skip connections.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator<T = f32> {
    config: GeneratorConfig,
    encoder: Vec<Block<T>>,
    decoder: Vec<Block<T>>,
}

/// Forward activations kept for [`Generator::backward`].
#[derive(Debug, Clone)]
pub struct GeneratorCache<T> {
    encoder: Vec<BlockCache<T>>,
    decoder: Vec<BlockCache<T>>,
}

impl<T: Real> Generator<T> {
    /// Builds a generator with zero weights; see [`super::init_networks`].
    pub fn new(config: GeneratorConfig) -> NetResult<Self> {
        let (padding, _) = encoder_geometry(
            config.input_size,
            config.input_channels,
            &config.encoder_channels,
            config.kernel,
            config.stride,
            config.leaky_slope,
        )?;
        let (k, s) = (config.kernel, config.stride);
        let slope = T::lit(config.leaky_slope);
        let mut encoder = Vec::new();
        let mut c_in = config.input_channels;
        for (i, &c_out) in config.encoder_channels.iter().enumerate() {
            let spec = ConvSpec::new(c_in, c_out, k, s, padding);
            encoder.push(Block::new(spec, false, i > 0, Activation::Leaky(slope)));
            c_in = c_out;
        }
        let mut outs: Vec<usize> = config.encoder_channels.iter().rev().skip(1).copied().collect();
        outs.push(config.input_channels);
        let last = outs.len() - 1;
        let mut decoder = Vec::new();
        for (j, &c_out) in outs.iter().enumerate() {
            let spec = ConvSpec::new(c_in, c_out, k, s, padding);
            let act = if j == last { Activation::Tanh } else { Activation::Relu };
            decoder.push(Block::new(spec, true, j != last, act));
            c_in = c_out;
        }
        Ok(Self { config, encoder, decoder })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn encoder(&self) -> &[Block<T>] {
        &self.encoder
    }

    pub fn decoder(&self) -> &[Block<T>] {
        &self.decoder
    }

    pub fn decoder_mut(&mut self) -> &mut [Block<T>] {
        &mut self.decoder
    }

    pub fn encoder_mut(&mut self) -> &mut [Block<T>] {
        &mut self.encoder
    }

    /// Encoder layer whose output is added onto decoder layer `j`'s output.
    fn skip_source(&self, j: usize) -> Option<usize> {
        let depth = self.encoder.len();
        (self.config.skip_connections && j + 1 < depth).then(|| depth - 2 - j)
    }

    /// Forward pass keeping activations for backpropagation.
    pub fn forward(&mut self, x: &Tensor<T>, mode: NormMode) -> NetResult<(Tensor<T>, GeneratorCache<T>)> {
        check_input(x, self.config.input_channels, self.config.input_size)?;
        let mut enc = Vec::with_capacity(self.encoder.len());
        let mut h = x.clone();
        for block in &mut self.encoder {
            let c = block.forward(&h, mode)?;
            h = c.output().clone();
            enc.push(c);
        }
        let mut dec = Vec::with_capacity(self.decoder.len());
        for j in 0..self.decoder.len() {
            let skip = self.skip_source(j);
            let c = self.decoder[j].forward(&h, mode)?;
            h = match skip {
                Some(i) => c.output().add(enc[i].output())?,
                None => c.output().clone(),
            };
            dec.push(c);
        }
        Ok((h, GeneratorCache { encoder: enc, decoder: dec }))
    }

    /// Eval-mode translation; safe to call concurrently.
    pub fn infer(&self, x: &Tensor<T>) -> NetResult<Tensor<T>> {
        check_input(x, self.config.input_channels, self.config.input_size)?;
        let mut enc = Vec::with_capacity(self.encoder.len());
        let mut h = x.clone();
        for block in &self.encoder {
            h = block.infer(&h)?;
            enc.push(h.clone());
        }
        for (j, block) in self.decoder.iter().enumerate() {
            h = block.infer(&h)?;
            if let Some(i) = self.skip_source(j) {
                h = h.add(&enc[i])?;
            }
        }
        Ok(h)
    }

    /// Backpropagates `grad_out` through the cached forward pass.
    ///
    /// Parameter gradients are accumulated when `params` is set. Returns the
    /// gradient with respect to the input image when `input` is set.
    pub fn backward(
        &mut self,
        cache: &GeneratorCache<T>,
        grad_out: &Tensor<T>,
        input: bool,
        params: bool,
    ) -> NetResult<Option<Tensor<T>>> {
        let depth = self.encoder.len();
        if cache.encoder.len() != depth || cache.decoder.len() != self.decoder.len() {
            return Err(NetError::Config("cache does not belong to this generator".into()));
        }
        let mut skip_grads: Vec<Option<Tensor<T>>> = vec![None; depth];
        let mut g = grad_out.clone();
        for j in (0..self.decoder.len()).rev() {
            if let Some(i) = self.skip_source(j) {
                skip_grads[i] = Some(g.clone());
            }
            g = self.decoder[j]
                .backward(&cache.decoder[j], &g, true, params)?
                .expect("input gradient requested");
        }
        for i in (0..depth).rev() {
            if let Some(sg) = skip_grads[i].take() {
                g = g.add(&sg)?;
            }
            let want_input = i > 0 || input;
            match self.encoder[i].backward(&cache.encoder[i], &g, want_input, params)? {
                Some(next) => g = next,
                None => return Ok(None),
            }
        }
        Ok(Some(g))
    }

    /// Inputs of every rectifier in a cached pass, in layer order. A
    /// perturbation that flips the sign of any of them crosses a kink.
    pub fn kink_inputs<'a>(&self, cache: &'a GeneratorCache<T>) -> Vec<&'a Tensor<T>> {
        let blocks = self.encoder.iter().chain(&self.decoder);
        let cached = cache.encoder.iter().chain(&cache.decoder);
        blocks.zip(cached).filter(|(b, _)| b.is_piecewise()).map(|(_, c)| c.pre_activation()).collect()
    }

    /// A generator whose eval-mode output is `tanh(x)`.
    ///
    /// The first encoder layer stores each 2×2 input block, split into
    /// positive and negative parts, in separate channels; the skip connection
    /// carries them past zeroed inner layers and the last decoder layer puts
    /// the pixels back. Requires kernel 4, stride 2, skip connections, at
    /// least two encoder layers and `encoder_channels[0] >= 8 * input_channels`.
    pub fn near_identity(config: GeneratorConfig) -> NetResult<Self> {
        let mut g = Self::new(config)?;
        let c = g.config.input_channels;
        if g.config.kernel != 4
            || g.config.stride != 2
            || !g.config.skip_connections
            || g.encoder.len() < 2
            || g.config.encoder_channels[0] < 8 * c
        {
            return Err(NetError::Config(
                "near-identity construction needs kernel 4, stride 2, skips, depth >= 2 and 8x input channels in layer 0"
                    .into(),
            ));
        }
        let slope = g.config.leaky_slope;
        let first_out = g.config.encoder_channels[0];
        let k = 4;
        let unpack = T::lit(1.0 / (1.0 + slope));
        let last = g.decoder.len() - 1;
        for ch in 0..c {
            for a in 0..2 {
                for b in 0..2 {
                    for (sign_idx, sign) in [(0, 1.0), (1, -1.0)] {
                        let o = ((ch * 2 + a) * 2 + b) * 2 + sign_idx;
                        let idx = ((o * c + ch) * k + a + 1) * k + b + 1;
                        g.encoder[0].weight.data_mut()[idx] = T::lit(sign);
                        // transposed weights are [first_out, c, k, k]: same layout
                        g.decoder[last].weight.data_mut()[idx] = T::lit(sign) * unpack;
                    }
                }
            }
        }
        debug_assert_eq!(g.encoder[0].weight.shape()[0], first_out);
        for block in &mut g.decoder[..last] {
            if let Some(bn) = block.norm.as_mut() {
                bn.gamma.data_mut().iter_mut().for_each(|v| *v = T::zero());
            }
        }
        Ok(g)
    }
}

impl<T: Real> Network<T> for Generator<T> {
    fn named_params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (i, b) in self.encoder.iter().enumerate() {
            b.visit_params(&format!("enc{i}"), &mut out);
        }
        for (j, b) in self.decoder.iter().enumerate() {
            b.visit_params(&format!("dec{j}"), &mut out);
        }
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for b in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            b.visit_params_mut(&mut out);
        }
        out
    }

    fn named_buffers(&self) -> Vec<(String, &[T])> {
        let mut out = Vec::new();
        for (i, b) in self.encoder.iter().enumerate() {
            b.visit_buffers(&format!("enc{i}"), &mut out);
        }
        for (j, b) in self.decoder.iter().enumerate() {
            b.visit_buffers(&format!("dec{j}"), &mut out);
        }
        out
    }

    fn buffers_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut out = Vec::new();
        for b in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            b.visit_buffers_mut(&mut out);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{init_networks, DiscriminatorConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> GeneratorConfig {
        GeneratorConfig { input_size: 16, encoder_channels: vec![24, 8, 8], ..Default::default() }
    }

    fn images(n: usize, size: usize, seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn(&[n, 3, size, size], |_| rng.gen_range(-1.0..1.0))
    }

    fn trained_like(cfg: &GeneratorConfig) -> Generator<f64> {
        let d = DiscriminatorConfig { input_size: cfg.input_size, ..Default::default() };
        init_networks(cfg, &d, 1).unwrap().g_a
    }

    #[test]
    fn shape_preserving_and_bounded() {
        let mut g = trained_like(&cfg());
        let x = images(3, 16, 2);
        let (y, _) = g.forward(&x, NormMode::Train).unwrap();
        assert_eq!(y.shape(), x.shape());
        assert!(y.data().iter().all(|v| v.is_finite() && v.abs() < 1.0));
        assert_eq!(g.infer(&x).unwrap().shape(), x.shape());
    }

    #[test]
    fn wrong_resolution_rejected() {
        let g = trained_like(&cfg());
        let err = g.infer(&images(1, 32, 0)).unwrap_err();
        assert!(matches!(err, NetError::Resolution { size: 16, .. }), "{err}");
    }

    #[test]
    fn zero_decoder_without_skips_outputs_tanh_bias() {
        let mut c = cfg();
        c.skip_connections = false;
        let mut g = trained_like(&c);
        let bias = [0.3, -0.2, 0.9];
        for block in g.decoder_mut() {
            block.weight.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let last = g.decoder().len() - 1;
        g.decoder_mut()[last].bias.data_mut().copy_from_slice(&bias);
        let y = g.infer(&images(2, 16, 5)).unwrap();
        for (i, v) in y.data().iter().enumerate() {
            assert_eq!(*v, f64::tanh(bias[(i / 256) % 3]));
        }
    }

    #[test]
    fn eval_forward_is_pure() {
        let g = trained_like(&cfg());
        let x = images(2, 16, 3);
        assert_eq!(g.infer(&x).unwrap(), g.infer(&x).unwrap());
        let mut h = g.clone();
        let (y, _) = h.forward(&x, NormMode::Eval).unwrap();
        assert_eq!(y, g.infer(&x).unwrap());
        assert_eq!(h, g);
    }

    #[test]
    fn near_identity_reproduces_tanh_of_input() {
        let g = Generator::<f64>::near_identity(cfg()).unwrap();
        let x = images(2, 16, 4);
        let y = g.infer(&x).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b.tanh()).abs() < 1e-12);
        }
        let mut c = cfg();
        c.encoder_channels[0] = 8;
        assert!(Generator::<f64>::near_identity(c).is_err());
    }

    #[test]
    fn skips_connect_equal_shapes() {
        let g = trained_like(&GeneratorConfig::default());
        for j in 0..g.decoder().len() {
            if let Some(i) = g.skip_source(j) {
                assert_eq!(g.encoder()[i].spec.out_channels, g.decoder()[j].spec.out_channels);
            }
        }
        assert_eq!(g.skip_source(3), None);
        assert_eq!(g.skip_source(0), Some(2));
    }
}
