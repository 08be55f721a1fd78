//! Training losses: autoencoder reconstruction, the VAE evidence bound
//! (reconstruction / 2 rho^2 plus KL to the standard normal prior), and
//! the Wasserstein critic/generator pair with gradient penalty.
//!
//! Each loss has an on-tape builder used by the trainer and a plain
//! wrapper that evaluates it on a batch.

use crate::autodiff::{Bindings, Tape, Var};
use crate::error::{Error, Result};
use crate::models::{DiscriminatorModel, EncoderModel, GeneratorModel};
use crate::rng::{rng_from_seed, standard_normal, uniform};
use crate::tensor::Tensor;

fn check_batch(x: &Tensor) -> Result<usize> {
    if x.shape().len() != 4 || x.shape()[0] == 0 {
        return Err(Error::InvalidArgument(format!(
            "loss expects a non-empty (N,1,H,W) batch, got {:?}",
            x.shape()
        )));
    }
    Ok(x.shape()[0])
}

/// Mean over the batch of `||x - G(E(x))||^2`.
pub fn ae_loss_on_tape(
    tape: &mut Tape,
    encoder: (&EncoderModel, &Bindings),
    generator: (&GeneratorModel, &Bindings),
    x: Var,
) -> Result<Var> {
    let n = check_batch(tape.value(x))? as f64;
    let z = encoder.0.mu_on_tape(tape, encoder.1, x)?;
    let xh = generator.0.forward_on_tape(tape, generator.1, z)?;
    let d = tape.sub(xh, x)?;
    let sq = tape.sqnorm(d)?;
    Ok(tape.scale(sq, 1.0 / n))
}

pub fn ae_loss(batch: &Tensor, encoder: &EncoderModel, generator: &GeneratorModel) -> Result<f64> {
    let mut tape = Tape::new();
    let be = Bindings::bind_frozen(&mut tape, &encoder.params);
    let bg = Bindings::bind_frozen(&mut tape, &generator.params);
    let x = tape.leaf(batch.clone());
    let loss = ae_loss_on_tape(&mut tape, (encoder, &be), (generator, &bg), x)?;
    Ok(tape.value(loss).item())
}

/// KL divergence of N(mu, diag(sigma^2)) from the standard normal:
/// `0.5 * sum(mu^2 + sigma^2 - 1 - log sigma^2)`.
pub fn kl_normal(mu: &Tensor, sigma2: &Tensor) -> Result<f64> {
    if mu.shape() != sigma2.shape() {
        return Err(Error::shape("kl_normal", mu.shape(), sigma2.shape()));
    }
    if sigma2.data().iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidArgument(
            "kl_normal needs strictly positive variances".to_string(),
        ));
    }
    Ok(0.5
        * mu.data()
            .iter()
            .zip(sigma2.data())
            .map(|(&m, &s2)| m * m + s2 - 1.0 - s2.ln())
            .sum::<f64>())
}

/// Per-sample KL as a (N,) tape node, parameterised by log sigma^2.
pub fn kl_normal_on_tape(tape: &mut Tape, mu: Var, logvar: Var) -> Result<Var> {
    let mu2 = tape.mul(mu, mu)?;
    let var = tape.exp(logvar);
    let sum = tape.add(mu2, var)?;
    let shifted = tape.add_scalar(sum, -1.0);
    let term = tape.sub(shifted, logvar)?;
    let per_sample = tape.sum_per_sample(term)?;
    Ok(tape.scale(per_sample, 0.5))
}

/// VAE loss components; `total == recon + kl` exactly.
#[derive(Debug, Clone, Copy)]
pub struct VaeLossParts {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

/// Single-sample reparameterised VAE loss on the tape. `eps` is the
/// (N, latent) standard-normal draw; returns (total, recon, kl) nodes.
pub fn vae_loss_on_tape(
    tape: &mut Tape,
    encoder: (&EncoderModel, &Bindings),
    generator: (&GeneratorModel, &Bindings),
    x: Var,
    rho: f64,
    eps: &Tensor,
) -> Result<(Var, Var, Var)> {
    if rho <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "vae_loss needs rho > 0, got {rho}"
        )));
    }
    let n = check_batch(tape.value(x))? as f64;
    let (mu, logvar) = encoder.0.mu_logvar_on_tape(tape, encoder.1, x)?;
    if eps.shape() != tape.value(mu).shape() {
        return Err(Error::shape("vae eps", tape.value(mu).shape(), eps.shape()));
    }

    // z = mu + sigma (.) eps, sigma = exp(logvar / 2)
    let half_logvar = tape.scale(logvar, 0.5);
    let sigma = tape.exp(half_logvar);
    let noise = tape.hadamard_const(sigma, eps.clone())?;
    let z = tape.add(mu, noise)?;

    let xh = generator.0.forward_on_tape(tape, generator.1, z)?;
    let d = tape.sub(xh, x)?;
    let sq = tape.sqnorm(d)?;
    let recon = tape.scale(sq, 1.0 / (n * 2.0 * rho * rho));

    let kl_per_sample = kl_normal_on_tape(tape, mu, logvar)?;
    let kl_sum = tape.sum_all(kl_per_sample);
    let kl = tape.scale(kl_sum, 1.0 / n);

    let total = tape.add(recon, kl)?;
    Ok((total, recon, kl))
}

pub fn vae_loss(
    batch: &Tensor,
    encoder: &EncoderModel,
    generator: &GeneratorModel,
    rho: f64,
    seed: u64,
) -> Result<VaeLossParts> {
    let n = check_batch(batch)?;
    let mut tape = Tape::new();
    let be = Bindings::bind_frozen(&mut tape, &encoder.params);
    let bg = Bindings::bind_frozen(&mut tape, &generator.params);
    let x = tape.leaf(batch.clone());
    let mut rng = rng_from_seed(seed);
    let eps = standard_normal(&[n, encoder.latent_dim], &mut rng);
    let (total, recon, kl) = vae_loss_on_tape(&mut tape, (encoder, &be), (generator, &bg), x, rho, &eps)?;
    Ok(VaeLossParts {
        total: tape.value(total).item(),
        recon: tape.value(recon).item(),
        kl: tape.value(kl).item(),
    })
}

/// Wasserstein losses; the critic includes the gradient penalty.
#[derive(Debug, Clone, Copy)]
pub struct WganLossParts {
    pub critic: f64,
    pub generator: f64,
    pub gradient_penalty: f64,
}

pub struct WganLossVars {
    pub critic: Var,
    pub generator: Var,
    pub gradient_penalty: Var,
}

/// Build both Wasserstein losses on one tape.
///
/// * critic loss: `-(E D(real) - E D(fake)) + gp_weight * GP`, with the
///   fake batch detached so critic gradients stop at the generator;
/// * generator loss: `-E D(G(z))`, attached through the generator;
/// * GP: `E (|| grad_xhat D(xhat) || - 1)^2` on random interpolates,
///   with the inner gradient built on the tape by
///   [`crate::autodiff::Network::input_gradient`] so it stays
///   differentiable with respect to the critic parameters.
pub fn wgan_losses_on_tape(
    tape: &mut Tape,
    generator: (&GeneratorModel, &Bindings),
    discriminator: (&DiscriminatorModel, &Bindings),
    x_real: Var,
    z: &Tensor,
    mix: &Tensor,
    gp_weight: f64,
) -> Result<WganLossVars> {
    let n = check_batch(tape.value(x_real))?;
    if z.shape() != [n, generator.0.latent_dim] {
        return Err(Error::shape(
            "wgan latent batch",
            &[n, generator.0.latent_dim],
            z.shape(),
        ));
    }
    if mix.shape() != [n] {
        return Err(Error::shape("wgan mix coefficients", &[n], mix.shape()));
    }

    let zv = tape.leaf(z.clone());
    let fake = generator.0.forward_on_tape(tape, generator.1, zv)?;
    let fake_detached = tape.detach(fake);

    let d_real = discriminator.0.score_on_tape(tape, discriminator.1, x_real)?;
    let d_fake_detached = discriminator
        .0
        .score_on_tape(tape, discriminator.1, fake_detached)?;
    let d_fake_attached = discriminator.0.score_on_tape(tape, discriminator.1, fake)?;

    // interpolates: eps * real + (1 - eps) * fake, per-sample eps
    let img_shape = tape.value(x_real).shape().to_vec();
    let per = img_shape[1] * img_shape[2] * img_shape[3];
    let mut eps_full = Vec::with_capacity(n * per);
    let mut one_minus = Vec::with_capacity(n * per);
    for i in 0..n {
        let e = mix.data()[i];
        eps_full.extend(std::iter::repeat(e).take(per));
        one_minus.extend(std::iter::repeat(1.0 - e).take(per));
    }
    let real_part = tape.hadamard_const(x_real, Tensor::new(img_shape.clone(), eps_full)?)?;
    let fake_part = tape.hadamard_const(fake_detached, Tensor::new(img_shape, one_minus)?)?;
    let interp = tape.add(real_part, fake_part)?;

    let grad = discriminator
        .0
        .net
        .input_gradient(tape, discriminator.1, interp, None, crate::autodiff::Mode::Eval)?;
    let grad_sq = tape.mul(grad, grad)?;
    let per_sample = tape.sum_per_sample(grad_sq)?;
    // small bias keeps sqrt differentiable at an exactly zero gradient
    let guarded = tape.add_scalar(per_sample, 1e-12);
    let norms = tape.sqrt(guarded);
    let dev = tape.add_scalar(norms, -1.0);
    let dev_sq = tape.mul(dev, dev)?;
    let gp = tape.mean_all(dev_sq);

    let mean_real = tape.mean_all(d_real);
    let mean_fake = tape.mean_all(d_fake_detached);
    let wasserstein = tape.sub(mean_real, mean_fake)?;
    let neg_w = tape.scale(wasserstein, -1.0);
    let weighted_gp = tape.scale(gp, gp_weight);
    let critic = tape.add(neg_w, weighted_gp)?;

    let mean_fake_attached = tape.mean_all(d_fake_attached);
    let gen_loss = tape.scale(mean_fake_attached, -1.0);

    Ok(WganLossVars {
        critic,
        generator: gen_loss,
        gradient_penalty: gp,
    })
}

pub fn wgan_losses(
    real: &Tensor,
    generator: &GeneratorModel,
    discriminator: &DiscriminatorModel,
    gp_weight: f64,
    seed: u64,
) -> Result<WganLossParts> {
    let n = check_batch(real)?;
    let mut tape = Tape::new();
    let bg = Bindings::bind_frozen(&mut tape, &generator.params);
    let bd = Bindings::bind_frozen(&mut tape, &discriminator.params);
    let x = tape.leaf(real.clone());
    let mut rng = rng_from_seed(seed);
    let z = standard_normal(&[n, generator.latent_dim], &mut rng);
    let mix = uniform(&[n], 0.0, 1.0, &mut rng);
    let vars = wgan_losses_on_tape(&mut tape, (generator, &bg), (discriminator, &bd), x, &z, &mix, gp_weight)?;
    Ok(WganLossParts {
        critic: tape.value(vars.critic).item(),
        generator: tape.value(vars.generator).item(),
        gradient_penalty: tape.value(vars.gradient_penalty).item(),
    })
}
