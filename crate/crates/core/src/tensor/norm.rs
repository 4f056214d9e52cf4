use super::{shape_err, Real, Result, Tensor, TensorError};

/// How batch normalisation obtains its statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    /// Batch statistics; running statistics are updated.
    Train,
    /// Batch statistics; running statistics are left untouched.
    BatchStats,
    /// Running statistics.
    Eval,
}

impl NormMode {
    pub fn uses_batch(self) -> bool {
        !matches!(self, NormMode::Eval)
    }
}

/// Exponential moving averages of per-channel mean and (unbiased) variance.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
    pub momentum: T,
    pub eps: T,
}

impl<T: Real> RunningStats<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            mean: vec![T::zero(); channels],
            var: vec![T::one(); channels],
            momentum: T::lit(0.1),
            eps: T::lit(1e-5),
        }
    }
}

/// Values saved by [`batchnorm`] for its backward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    shape: Vec<usize>,
    xhat: Vec<T>,
    inv_std: Vec<T>,
    mode: NormMode,
}

#[derive(Debug, Clone)]
pub struct BatchNormGrads<T> {
    pub input: Tensor<T>,
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
}

fn layout<T: Real>(input: &Tensor<T>) -> Result<(usize, usize, usize)> {
    match input.shape() {
        [n, c] => Ok((*n, *c, 1)),
        [n, c, h, w] => Ok((*n, *c, h * w)),
        other => Err(shape_err("batchnorm", format!("expected [N,C] or [N,C,H,W], got {other:?}"))),
    }
}

/// Per-channel batch normalisation with affine `gamma`/`beta`.
pub fn batchnorm<T: Real>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    mode: NormMode,
    running: &mut RunningStats<T>,
) -> Result<(Tensor<T>, BatchNormCache<T>)> {
    let (n, c, spatial) = layout(input)?;
    for (name, t) in [("gamma", gamma), ("beta", beta)] {
        if t.shape() != [c] {
            return Err(shape_err("batchnorm", format!("{name} is {:?}, input has {c} channels", t.shape())));
        }
    }
    if running.mean.len() != c || running.var.len() != c {
        return Err(shape_err(
            "batchnorm",
            format!("running stats track {} channels, input has {c}", running.mean.len()),
        ));
    }
    if mode.uses_batch() && n < 2 {
        return Err(TensorError::DegenerateBatch(n));
    }

    let x = input.data();
    let count = n * spatial;
    let m = T::from_usize(count).unwrap();
    let mut inv_std = vec![T::zero(); c];
    let mut mean = vec![T::zero(); c];
    for ch in 0..c {
        let values = (0..n).flat_map(|b| &x[(b * c + ch) * spatial..(b * c + ch + 1) * spatial]);
        let (mu, var) = if mode.uses_batch() {
            let mu = values.clone().fold(T::zero(), |a, &v| a + v) / m;
            let var = values.fold(T::zero(), |a, &v| a + (v - mu) * (v - mu)) / m;
            (mu, var)
        } else {
            (running.mean[ch], running.var[ch])
        };
        mean[ch] = mu;
        inv_std[ch] = T::one() / (var + running.eps).sqrt();
        if mode == NormMode::Train {
            let mom = running.momentum;
            let unbiased = var * m / (m - T::one());
            running.mean[ch] = (T::one() - mom) * running.mean[ch] + mom * mu;
            running.var[ch] = (T::one() - mom) * running.var[ch] + mom * unbiased;
        }
    }

    let mut xhat = vec![T::zero(); x.len()];
    let mut out = vec![T::zero(); x.len()];
    for b in 0..n {
        for ch in 0..c {
            let range = (b * c + ch) * spatial..(b * c + ch + 1) * spatial;
            let (g, bt, mu, is) = (gamma.data()[ch], beta.data()[ch], mean[ch], inv_std[ch]);
            for i in range {
                let h = (x[i] - mu) * is;
                xhat[i] = h;
                out[i] = g * h + bt;
            }
        }
    }
    Ok((
        Tensor::new(input.shape(), out)?,
        BatchNormCache { shape: input.shape().to_vec(), xhat, inv_std, mode },
    ))
}

/// Gradients of [`batchnorm`] with respect to input, `gamma` and `beta`.
pub fn batchnorm_backward<T: Real>(
    grad_out: &Tensor<T>,
    cache: &BatchNormCache<T>,
    gamma: &Tensor<T>,
) -> Result<BatchNormGrads<T>> {
    if grad_out.shape() != cache.shape.as_slice() {
        return Err(shape_err(
            "batchnorm_backward",
            format!("grad_out is {:?}, forward was {:?}", grad_out.shape(), cache.shape),
        ));
    }
    let (n, c, spatial) = layout(grad_out)?;
    let dy = grad_out.data();
    let m = T::from_usize(n * spatial).unwrap();
    let mut dx = vec![T::zero(); dy.len()];
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for ch in 0..c {
        let idx = || (0..n).flat_map(move |b| (b * c + ch) * spatial..(b * c + ch + 1) * spatial);
        let (mut sum_dy, mut sum_dy_xhat) = (T::zero(), T::zero());
        for i in idx() {
            sum_dy = sum_dy + dy[i];
            sum_dy_xhat = sum_dy_xhat + dy[i] * cache.xhat[i];
        }
        dgamma[ch] = sum_dy_xhat;
        dbeta[ch] = sum_dy;
        let g = gamma.data()[ch];
        let is = cache.inv_std[ch];
        if cache.mode.uses_batch() {
            let scale = g * is / m;
            for i in idx() {
                dx[i] = scale * (m * dy[i] - sum_dy - cache.xhat[i] * sum_dy_xhat);
            }
        } else {
            for i in idx() {
                dx[i] = dy[i] * g * is;
            }
        }
    }
    Ok(BatchNormGrads {
        input: Tensor::new(&cache.shape, dx)?,
        gamma: Tensor::new(&[c], dgamma)?,
        beta: Tensor::new(&[c], dbeta)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn batch(shape: &[usize], seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn(shape, |_| rng.gen_range(-2.0..3.0))
    }

    #[test]
    fn train_mode_standardises_each_channel() {
        let x = batch(&[4, 3, 5, 5], 1);
        let mut rs = RunningStats::new(3);
        let (y, _) = batchnorm(&x, &Tensor::full(&[3], 1.0), &Tensor::zeros(&[3]), NormMode::Train, &mut rs).unwrap();
        for ch in 0..3 {
            let vals: Vec<f64> = (0..4).flat_map(|b| y.data()[(b * 3 + ch) * 25..(b * 3 + ch + 1) * 25].to_vec()).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(mean.abs() < 1e-6);
            assert!((var - 1.0).abs() < 1e-4);
        }
        assert!(rs.mean.iter().all(|&m| m != 0.0));
    }

    #[test]
    fn zero_gamma_outputs_beta() {
        let x = batch(&[3, 2, 4, 4], 2);
        let mut rs = RunningStats::new(2);
        let beta = Tensor::new(&[2], vec![0.25, -0.75]).unwrap();
        let (y, _) = batchnorm(&x, &Tensor::zeros(&[2]), &beta, NormMode::Train, &mut rs).unwrap();
        for (i, v) in y.data().iter().enumerate() {
            assert_eq!(*v, beta.data()[(i / 16) % 2]);
        }
    }

    #[test]
    fn single_sample_batch_rejected_in_batch_modes() {
        let x = batch(&[1, 2, 3, 3], 3);
        let mut rs = RunningStats::new(2);
        let (g, b) = (Tensor::full(&[2], 1.0), Tensor::zeros(&[2]));
        for mode in [NormMode::Train, NormMode::BatchStats] {
            assert_eq!(batchnorm(&x, &g, &b, mode, &mut rs).unwrap_err(), TensorError::DegenerateBatch(1));
        }
        assert!(batchnorm(&x, &g, &b, NormMode::Eval, &mut rs).is_ok());
    }

    #[test]
    fn batch_stats_mode_leaves_running_stats() {
        let x = batch(&[4, 2, 3, 3], 4);
        let mut rs = RunningStats::new(2);
        let before = rs.clone();
        batchnorm(&x, &Tensor::full(&[2], 1.0), &Tensor::zeros(&[2]), NormMode::BatchStats, &mut rs).unwrap();
        assert_eq!(rs, before);
    }

    #[test]
    fn eval_mode_uses_running_stats() {
        let x = Tensor::<f64>::new(&[2, 1], vec![3.0, 5.0]).unwrap();
        let mut rs = RunningStats::new(1);
        rs.mean[0] = 1.0;
        rs.var[0] = 4.0 - rs.eps;
        let (y, _) = batchnorm(&x, &Tensor::full(&[1], 2.0), &Tensor::full(&[1], 0.5), NormMode::Eval, &mut rs).unwrap();
        assert!((y.data()[0] - 2.5).abs() < 1e-12);
        assert!((y.data()[1] - 4.5).abs() < 1e-12);
    }
}
