use super::{LossRecord, TrainerState, TrainingError, TrainingResult};
use crate::nets::{Discriminator, Generator, NetResult, Network};
use crate::tensor::{
    bce_mean, bce_mean_logit_grad, mse_loss, mse_loss_grad, NormMode, OptimizerState, Real, Tensor,
};

/// Anything that maps a batch of images into the other domain.
pub trait Translator<T> {
    fn translate(&self, batch: &Tensor<T>) -> NetResult<Tensor<T>>;
}

impl<T: Real> Translator<T> for Generator<T> {
    fn translate(&self, batch: &Tensor<T>) -> NetResult<Tensor<T>> {
        self.infer(batch)
    }
}

/// Returns its input unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityTranslator;

impl<T: Real> Translator<T> for IdentityTranslator {
    fn translate(&self, batch: &Tensor<T>) -> NetResult<Tensor<T>> {
        Ok(batch.clone())
    }
}

/// The four images of one round trip through both generators.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationChain<T> {
    pub ab: Tensor<T>,
    pub ba: Tensor<T>,
    pub aba: Tensor<T>,
    pub bab: Tensor<T>,
}

/// `ab = to_b(a)`, `ba = to_a(b)`, `aba = to_a(ab)`, `bab = to_b(ba)`.
pub fn translate_chain<T: Real>(
    to_a: &impl Translator<T>,
    to_b: &impl Translator<T>,
    batch_a: &Tensor<T>,
    batch_b: &Tensor<T>,
) -> NetResult<TranslationChain<T>> {
    let ab = to_b.translate(batch_a)?;
    let ba = to_a.translate(batch_b)?;
    let aba = to_a.translate(&ab)?;
    let bab = to_b.translate(&ba)?;
    Ok(TranslationChain { ab, ba, aba, bab })
}

/// Mean squared reconstruction errors `(|a - aba|², |b - bab|²)`.
pub fn cyclic_losses<T: Real>(
    chain: &TranslationChain<T>,
    batch_a: &Tensor<T>,
    batch_b: &Tensor<T>,
) -> TrainingResult<(T, T)> {
    Ok((mse_loss(&chain.aba, batch_a)?, mse_loss(&chain.bab, batch_b)?))
}

fn check_batches<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> TrainingResult<()> {
    if a.shape() != b.shape() {
        return Err(TrainingError::Config(format!("batch shapes differ: {:?} vs {:?}", a.shape(), b.shape())));
    }
    if a.shape()[0] < 2 {
        return Err(TrainingError::Config(format!("batch of {} images; need at least 2", a.shape()[0])));
    }
    Ok(())
}

fn ensure_finite<T: Real>(step: u64, field: &'static str, value: T) -> TrainingResult<f64> {
    let v = value.to_f64().unwrap_or(f64::NAN);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(TrainingError::NonFinite { step, field, value: v, last_checkpoint: None })
    }
}

fn scaled<T: Real>(v: Vec<T>, s: T) -> Vec<T> {
    v.into_iter().map(|x| x * s).collect()
}

/// Accumulates discriminator gradients for real-versus-fake BCE and returns
/// the loss `0.5 * (bce(real, 1) + bce(fake, 0))`.
fn discriminator_grads<T: Real>(d: &mut Discriminator<T>, real: &Tensor<T>, fake: &Tensor<T>) -> TrainingResult<T> {
    d.zero_grad();
    let half = T::lit(0.5);
    let (out_real, cache_real) = d.forward(real, NormMode::Train)?;
    let (out_fake, cache_fake) = d.forward(fake, NormMode::Train)?;
    let loss = half * (bce_mean(&out_real.realness, T::one()) + bce_mean(&out_fake.realness, T::zero()));
    let g_real = scaled(bce_mean_logit_grad(&out_real.logits, T::one()), half);
    let g_fake = scaled(bce_mean_logit_grad(&out_fake.logits, T::zero()), half);
    d.backward(&cache_real, &g_real, None, false, true)?;
    d.backward(&cache_fake, &g_fake, None, false, true)?;
    Ok(loss)
}

/// Non-saturating generator loss `bce(D(fake), 1)` and its gradient with
/// respect to `fake`. Discriminator parameters receive no gradient.
fn adversarial_grad<T: Real>(d: &mut Discriminator<T>, fake: &Tensor<T>) -> TrainingResult<(T, Tensor<T>)> {
    let (out, cache) = d.forward(fake, NormMode::BatchStats)?;
    let loss = bce_mean(&out.realness, T::one());
    let g = bce_mean_logit_grad(&out.logits, T::one());
    let grad = d.backward(&cache, &g, None, true, false)?.expect("input gradient requested");
    Ok((loss, grad))
}

fn adam_step<T: Real>(opt: &mut OptimizerState<T>, net: &mut impl Network<T>) -> TrainingResult<()> {
    let mut params = net.params_mut();
    opt.apply(&mut params)?;
    params.iter_mut().for_each(|p| p.clear_grad());
    Ok(())
}

impl<T: Real> TrainerState<T> {
    /// One discriminator update followed by one generator update.
    ///
    /// Translated images enter the discriminator update as constants. The
    /// generator loss is the two adversarial terms plus `cyclic_weight` times
    /// the two reconstruction terms; with a zero weight the reconstruction
    /// terms are reported but not differentiated.
    pub fn train_step(&mut self, batch_a: &Tensor<T>, batch_b: &Tensor<T>) -> TrainingResult<LossRecord> {
        check_batches(batch_a, batch_b)?;
        let step = self.step + 1;
        let weight = self.config.cyclic_weight;
        let lambda = T::lit(weight);
        let nets = &mut self.nets;

        let (x_ab, cache_ab) = nets.g_b.forward(batch_a, NormMode::Train)?;
        let (x_ba, cache_ba) = nets.g_a.forward(batch_b, NormMode::Train)?;
        let (x_aba, cache_aba) = nets.g_a.forward(&x_ab, NormMode::BatchStats)?;
        let (x_bab, cache_bab) = nets.g_b.forward(&x_ba, NormMode::BatchStats)?;
        let cyclic_a = ensure_finite(step, "cyclic_loss_A", mse_loss(&x_aba, batch_a)?)?;
        let cyclic_b = ensure_finite(step, "cyclic_loss_B", mse_loss(&x_bab, batch_b)?)?;

        let d_loss_a = discriminator_grads(&mut nets.d_a, batch_a, &x_ba)?;
        let d_loss_b = discriminator_grads(&mut nets.d_b, batch_b, &x_ab)?;
        let d_loss_a = ensure_finite(step, "d_loss_A", d_loss_a)?;
        let d_loss_b = ensure_finite(step, "d_loss_B", d_loss_b)?;
        adam_step(&mut self.opt_d_a, &mut nets.d_a)?;
        adam_step(&mut self.opt_d_b, &mut nets.d_b)?;

        nets.g_a.zero_grad();
        nets.g_b.zero_grad();
        let (adv_a, mut grad_ba) = adversarial_grad(&mut nets.d_a, &x_ba)?;
        let (adv_b, mut grad_ab) = adversarial_grad(&mut nets.d_b, &x_ab)?;
        let g_adv_a = ensure_finite(step, "g_adv_loss_A", adv_a)?;
        let g_adv_b = ensure_finite(step, "g_adv_loss_B", adv_b)?;
        if weight != 0.0 {
            let g_aba = mse_loss_grad(&x_aba, batch_a)?.map(|v| v * lambda);
            let g_bab = mse_loss_grad(&x_bab, batch_b)?.map(|v| v * lambda);
            let through_a = nets.g_a.backward(&cache_aba, &g_aba, true, true)?.expect("input gradient requested");
            let through_b = nets.g_b.backward(&cache_bab, &g_bab, true, true)?.expect("input gradient requested");
            grad_ab = grad_ab.add(&through_a)?;
            grad_ba = grad_ba.add(&through_b)?;
        }
        nets.g_b.backward(&cache_ab, &grad_ab, false, true)?;
        nets.g_a.backward(&cache_ba, &grad_ba, false, true)?;
        adam_step(&mut self.opt_g_a, &mut nets.g_a)?;
        adam_step(&mut self.opt_g_b, &mut nets.g_b)?;

        self.step = step;
        Ok(LossRecord {
            step,
            d_loss_a,
            d_loss_b,
            g_adv_loss_a: g_adv_a,
            g_adv_loss_b: g_adv_b,
            cyclic_loss_a: cyclic_a,
            cyclic_loss_b: cyclic_b,
        })
    }
}

/// The generators' composite loss on a batch pair, evaluated with batch
/// statistics and without touching any state.
pub fn generator_objective<T: Real>(state: &TrainerState<T>, batch_a: &Tensor<T>, batch_b: &Tensor<T>) -> TrainingResult<T> {
    check_batches(batch_a, batch_b)?;
    let mut nets = state.nets.clone();
    let (x_ab, _) = nets.g_b.forward(batch_a, NormMode::BatchStats)?;
    let (x_ba, _) = nets.g_a.forward(batch_b, NormMode::BatchStats)?;
    let (x_aba, _) = nets.g_a.forward(&x_ab, NormMode::BatchStats)?;
    let (x_bab, _) = nets.g_b.forward(&x_ba, NormMode::BatchStats)?;
    let adv_a = bce_mean(&nets.d_a.forward(&x_ba, NormMode::BatchStats)?.0.realness, T::one());
    let adv_b = bce_mean(&nets.d_b.forward(&x_ab, NormMode::BatchStats)?.0.realness, T::one());
    let cyc = mse_loss(&x_aba, batch_a)? + mse_loss(&x_bab, batch_b)?;
    Ok(adv_a + adv_b + T::lit(state.config.cyclic_weight) * cyc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{DiscriminatorConfig, GeneratorConfig};
    use crate::training::TrainingConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn configs() -> (TrainingConfig, GeneratorConfig, DiscriminatorConfig) {
        let g = GeneratorConfig { input_size: 16, encoder_channels: vec![4, 8], ..Default::default() };
        let d = DiscriminatorConfig { input_size: 16, encoder_channels: vec![4, 8], feature_dim: 8, ..Default::default() };
        (TrainingConfig { batch_size: 3, seed: 4, ..Default::default() }, g, d)
    }

    fn batch(seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn(&[3, 3, 16, 16], |_| rng.gen_range(-1.0..1.0))
    }

    fn state() -> TrainerState<f64> {
        let (t, g, d) = configs();
        TrainerState::new(t, g, d).unwrap()
    }

    #[test]
    fn identity_chain_reconstructs_exactly() {
        let (a, b) = (batch(1), batch(2));
        let chain = translate_chain(&IdentityTranslator, &IdentityTranslator, &a, &b).unwrap();
        assert_eq!(chain.aba, a);
        assert_eq!(chain.bab, b);
        assert_eq!(cyclic_losses(&chain, &a, &b).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn chain_matches_manual_composition() {
        let s = state();
        let (a, b) = (batch(1), batch(2));
        let chain = translate_chain(&s.nets.g_a, &s.nets.g_b, &a, &b).unwrap();
        assert_eq!(chain.aba, s.nets.g_a.infer(&s.nets.g_b.infer(&a).unwrap()).unwrap());
        assert_eq!(chain.bab, s.nets.g_b.infer(&s.nets.g_a.infer(&b).unwrap()).unwrap());
        for t in [&chain.ab, &chain.ba, &chain.aba, &chain.bab] {
            assert_eq!(t.shape(), a.shape());
        }
    }

    #[test]
    fn step_is_deterministic_and_counts() {
        let (a, b) = (batch(1), batch(2));
        let (mut s1, mut s2) = (state(), state());
        let r1 = s1.train_step(&a, &b).unwrap();
        let r2 = s2.train_step(&a, &b).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(s1, s2);
        assert_eq!(r1.step, 1);
        assert_eq!(s1.step, 1);
        assert!(r1.values().iter().all(|(_, v)| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn domain_swap_swaps_records() {
        let (a, b) = (batch(1), batch(2));
        let mut s = state();
        let mut swapped = state().swap_domains();
        for _ in 0..2 {
            let r = s.train_step(&a, &b).unwrap();
            let rs = swapped.train_step(&b, &a).unwrap();
            assert_eq!(r.swapped(), rs);
        }
        assert_eq!(s, swapped.swap_domains());
    }

    #[test]
    fn mismatched_batches_rejected() {
        let mut s = state();
        let small = batch(1).select_batch(&[0, 1]).unwrap();
        assert!(matches!(s.train_step(&small, &batch(2)), Err(TrainingError::Config(_))));
        assert_eq!(s.step, 0);
    }

    #[test]
    fn generator_step_descends_on_frozen_discriminator() {
        let (a, b) = (batch(1), batch(2));
        let mut s = state();
        s.opt_d_a.config.lr = 0.0;
        s.opt_d_b.config.lr = 0.0;
        s.opt_g_a.config.lr = 1e-4;
        s.opt_g_b.config.lr = 1e-4;
        let before = generator_objective(&s, &a, &b).unwrap();
        s.train_step(&a, &b).unwrap();
        let after = generator_objective(&s, &a, &b).unwrap();
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn non_finite_input_halts() {
        let mut s = state();
        let mut a = batch(1);
        a.data_mut()[0] = f64::NAN;
        let err = s.train_step(&a, &batch(2)).unwrap_err();
        assert!(matches!(err, TrainingError::NonFinite { step: 1, .. }), "{err}");
        assert_eq!(s.step, 0);
    }
}
