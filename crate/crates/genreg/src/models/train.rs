//! Seeded training loops for the three model kinds.

use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamConfig, Bindings, Tape};
use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::models::{
    ae_loss_on_tape, vae_loss_on_tape, ArchConfig, DiscriminatorModel, EncoderModel,
    GeneratorModel, ModelKind,
};
use crate::rng::{derive_seed, rng_from_seed, standard_normal, uniform, SeededRng};
use rand::Rng;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub latent_dim: usize,
    pub base_channels: usize,
    pub leaky_alpha: f64,
    /// VAE decoder noise level (the reconstruction weight is 1 / 2 rho^2).
    pub rho: f64,
    /// Gradient-penalty weight for the Wasserstein critic.
    pub gp_weight: f64,
    /// Critic updates per generator update.
    pub critic_steps: usize,
}

impl TrainConfig {
    pub fn new(latent_dim: usize) -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            lr: 1e-3,
            seed: 0,
            latent_dim,
            base_channels: 8,
            leaky_alpha: 0.2,
            rho: 0.1,
            gp_weight: 10.0,
            critic_steps: 5,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0
            || self.lr <= 0.0
            || self.latent_dim == 0
            || self.rho <= 0.0
            || self.gp_weight < 0.0
            || self.critic_steps == 0
        {
            return Err(Error::Config(format!("invalid train config: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Headline loss: AE reconstruction, VAE total, GAN critic.
    pub loss: f64,
    /// Secondary component: VAE KL term, GAN generator loss; zero for AE.
    pub aux: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedModels {
    pub kind: ModelKind,
    pub generator: GeneratorModel,
    pub encoder: Option<EncoderModel>,
    pub discriminator: Option<DiscriminatorModel>,
    pub history: Vec<EpochStats>,
    pub arch: ArchConfig,
}

fn build_generator(arch: ArchConfig, kind: ModelKind, rng: &mut SeededRng) -> Result<GeneratorModel> {
    let net = arch.generator_net()?;
    let params = net.init_params(rng)?;
    Ok(GeneratorModel {
        net,
        params,
        latent_dim: arch.latent_dim,
        kind,
        arch,
    })
}

fn build_encoder(arch: ArchConfig, variational: bool, rng: &mut SeededRng) -> Result<EncoderModel> {
    let trunk = arch.encoder_trunk()?;
    let mu_head = arch.encoder_head("enc.mu")?;
    let mut params = trunk.init_params(rng)?;
    for (name, t) in mu_head.init_params(rng)?.iter() {
        params.insert(name, t.clone())?;
    }
    let logvar_head = if variational {
        let head = arch.encoder_head("enc.logvar")?;
        // start the variance head near zero so sigma ~ 1 early on
        for (name, t) in head.init_params(rng)?.iter() {
            params.insert(name, t.scale(0.1))?;
        }
        Some(head)
    } else {
        None
    };
    Ok(EncoderModel {
        trunk,
        mu_head,
        logvar_head,
        params,
        latent_dim: arch.latent_dim,
    })
}

fn build_critic(arch: ArchConfig, rng: &mut SeededRng) -> Result<DiscriminatorModel> {
    let net = arch.critic_net()?;
    let params = net.init_params(rng)?;
    Ok(DiscriminatorModel { net, params })
}

fn shuffled_indices(n: usize, rng: &mut SeededRng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

fn check_finite(loss: f64, what: &str, epoch: usize, batch: usize) -> Result<()> {
    if !loss.is_finite() {
        return Err(Error::Numerical(format!(
            "{what} became non-finite ({loss}) at epoch {epoch}, batch {batch}"
        )));
    }
    Ok(())
}

/// Train a model of the requested kind on the dataset. Deterministic in
/// the config seed: weight init, shuffling and sampling all derive from
/// it; two runs produce bit-identical parameters.
pub fn train(kind: ModelKind, dataset: &Dataset, config: &TrainConfig) -> Result<TrainedModels> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("cannot train on an empty dataset".to_string()));
    }
    let image_size = dataset.image_shape()[0];
    let arch = ArchConfig {
        image_size,
        latent_dim: config.latent_dim,
        base_channels: config.base_channels,
        leaky_alpha: config.leaky_alpha,
    };
    let mut init_rng = rng_from_seed(derive_seed(config.seed, 1));
    let mut shuffle_rng = rng_from_seed(derive_seed(config.seed, 2));
    let mut noise_rng = rng_from_seed(derive_seed(config.seed, 3));

    let mut generator = build_generator(arch, kind, &mut init_rng)?;
    let mut encoder = match kind {
        ModelKind::Ae => Some(build_encoder(arch, false, &mut init_rng)?),
        ModelKind::Vae => Some(build_encoder(arch, true, &mut init_rng)?),
        ModelKind::Gan => None,
    };
    let mut discriminator = match kind {
        ModelKind::Gan => Some(build_critic(arch, &mut init_rng)?),
        _ => None,
    };

    let adam = AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    };
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let order = shuffled_indices(dataset.len(), &mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut aux_sum = 0.0;
        let mut batches = 0usize;

        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch = dataset.batch(chunk)?;
            match kind {
                ModelKind::Ae => {
                    let enc = encoder.as_mut().expect("AE has an encoder");
                    let mut tape = Tape::new();
                    let be = Bindings::bind(&mut tape, &enc.params);
                    let bgen = Bindings::bind(&mut tape, &generator.params);
                    let x = tape.leaf(batch);
                    let loss =
                        ae_loss_on_tape(&mut tape, (enc, &be), (&generator, &bgen), x)?;
                    let value = tape.value(loss).item();
                    check_finite(value, "AE loss", epoch, batch_idx)?;
                    let gm = tape.backward(loss)?;
                    enc.params.adam_step(&be.gradients(&tape, &gm), &adam)?;
                    generator.params.adam_step(&bgen.gradients(&tape, &gm), &adam)?;
                    loss_sum += value;
                }
                ModelKind::Vae => {
                    let enc = encoder.as_mut().expect("VAE has an encoder");
                    let mut tape = Tape::new();
                    let be = Bindings::bind(&mut tape, &enc.params);
                    let bgen = Bindings::bind(&mut tape, &generator.params);
                    let n = chunk.len();
                    let x = tape.leaf(batch);
                    let eps = standard_normal(&[n, config.latent_dim], &mut noise_rng);
                    let (total, _recon, kl) = vae_loss_on_tape(
                        &mut tape,
                        (enc, &be),
                        (&generator, &bgen),
                        x,
                        config.rho,
                        &eps,
                    )?;
                    let value = tape.value(total).item();
                    check_finite(value, "VAE loss", epoch, batch_idx)?;
                    let gm = tape.backward(total)?;
                    enc.params.adam_step(&be.gradients(&tape, &gm), &adam)?;
                    generator.params.adam_step(&bgen.gradients(&tape, &gm), &adam)?;
                    loss_sum += value;
                    aux_sum += tape.value(kl).item();
                }
                ModelKind::Gan => {
                    let critic = discriminator.as_mut().expect("GAN has a critic");
                    let n = chunk.len();

                    // critic step: generator params frozen
                    let critic_value = {
                        let mut tape = Tape::new();
                        let bgen = Bindings::bind_frozen(&mut tape, &generator.params);
                        let bd = Bindings::bind(&mut tape, &critic.params);
                        let x = tape.leaf(batch);
                        let z = standard_normal(&[n, config.latent_dim], &mut noise_rng);
                        let mix = uniform(&[n], 0.0, 1.0, &mut noise_rng);
                        let vars = crate::models::wgan_losses_on_tape(
                            &mut tape,
                            (&generator, &bgen),
                            (critic, &bd),
                            x,
                            &z,
                            &mix,
                            config.gp_weight,
                        )?;
                        let value = tape.value(vars.critic).item();
                        check_finite(value, "critic loss", epoch, batch_idx)?;
                        let gm = tape.backward(vars.critic)?;
                        critic.params.adam_step(&bd.gradients(&tape, &gm), &adam)?;
                        value
                    };
                    loss_sum += critic_value;

                    // generator step every critic_steps batches
                    if (batch_idx + 1) % config.critic_steps == 0 {
                        let mut tape = Tape::new();
                        let bgen = Bindings::bind(&mut tape, &generator.params);
                        let bd = Bindings::bind_frozen(&mut tape, &critic.params);
                        let z = standard_normal(&[n, config.latent_dim], &mut noise_rng);
                        let zv = tape.leaf(z);
                        let fake = generator.forward_on_tape(&mut tape, &bgen, zv)?;
                        let scores = critic.score_on_tape(&mut tape, &bd, fake)?;
                        let mean = tape.mean_all(scores);
                        let gen_loss = tape.scale(mean, -1.0);
                        let value = tape.value(gen_loss).item();
                        check_finite(value, "generator loss", epoch, batch_idx)?;
                        let gm = tape.backward(gen_loss)?;
                        generator.params.adam_step(&bgen.gradients(&tape, &gm), &adam)?;
                        aux_sum += value;
                    }
                }
            }
            batches += 1;
        }

        history.push(EpochStats {
            epoch,
            loss: loss_sum / batches.max(1) as f64,
            aux: aux_sum / batches.max(1) as f64,
        });
    }

    Ok(TrainedModels {
        kind,
        generator,
        encoder,
        discriminator,
        history,
        arch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{generate_shapes, ShapesConfig};

    fn tiny_dataset(count: usize, seed: u64) -> Dataset {
        generate_shapes(&ShapesConfig::new(16, count, seed)).unwrap()
    }

    fn tiny_config(epochs: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 8,
            latent_dim: 4,
            base_channels: 2,
            seed,
            ..TrainConfig::new(4)
        }
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let ds = tiny_dataset(8, 1);
        let cfg = tiny_config(0, 3);
        let out = train(ModelKind::Ae, &ds, &cfg).unwrap();
        assert!(out.history.is_empty());
        // identical to a fresh init with the same seed
        let again = train(ModelKind::Ae, &ds, &cfg).unwrap();
        for ((na, ta), (nb, tb)) in out.generator.params.iter().zip(again.generator.params.iter()) {
            assert_eq!(na, nb);
            assert_eq!(ta.data(), tb.data());
        }
    }

    #[test]
    fn ae_training_decreases_loss() {
        let ds = tiny_dataset(24, 5);
        let out = train(ModelKind::Ae, &ds, &tiny_config(8, 7)).unwrap();
        let first = out.history.first().unwrap().loss;
        let last = out.history.last().unwrap().loss;
        assert!(last < first, "loss {first} -> {last}");
    }

    #[test]
    fn vae_kl_finite_and_recon_decreases() {
        let ds = tiny_dataset(24, 6);
        let out = train(ModelKind::Vae, &ds, &tiny_config(6, 8)).unwrap();
        for stats in &out.history {
            assert!(stats.aux.is_finite(), "KL must stay finite");
        }
        let first = out.history.first().unwrap().loss;
        let last = out.history.last().unwrap().loss;
        assert!(last < first, "VAE loss {first} -> {last}");
        assert!(out.encoder.as_ref().unwrap().is_variational());
    }

    #[test]
    fn gan_smoke_runs_and_is_deterministic() {
        let ds = tiny_dataset(16, 9);
        let cfg = TrainConfig {
            epochs: 2,
            critic_steps: 2,
            ..tiny_config(2, 11)
        };
        let a = train(ModelKind::Gan, &ds, &cfg).unwrap();
        let b = train(ModelKind::Gan, &ds, &cfg).unwrap();
        for ((na, ta), (nb, tb)) in a.generator.params.iter().zip(b.generator.params.iter()) {
            assert_eq!(na, nb);
            let bits_a: Vec<u64> = ta.data().iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = tb.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
        assert!(a.discriminator.is_some());
    }

    #[test]
    fn generated_images_stay_in_unit_range() {
        let ds = tiny_dataset(16, 10);
        let out = train(ModelKind::Ae, &ds, &tiny_config(2, 12)).unwrap();
        let mut rng = rng_from_seed(0);
        for _ in 0..50 {
            let z = standard_normal(&[4], &mut rng);
            let img = out.generator.generate(&z).unwrap();
            assert!(img.min_value() >= 0.0 && img.max_value() <= 1.0);
        }
    }
}
