//! The three generative models over a shared generator architecture,
//! their losses, the training loop and checkpoint IO.

mod arch;
mod io;
mod loss;
mod train;

pub use arch::ArchConfig;
pub use io::{load_models, save_models, ModelSidecar};
pub use loss::{
    ae_loss, ae_loss_on_tape, kl_normal, kl_normal_on_tape, vae_loss, vae_loss_on_tape,
    wgan_losses, wgan_losses_on_tape, VaeLossParts, WganLossParts,
};
pub use train::{train, EpochStats, TrainConfig, TrainedModels};

use serde::{Deserialize, Serialize};

use crate::autodiff::{Bindings, Mode, Network, ParamSet, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ae,
    Vae,
    Gan,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Ae => "ae",
            ModelKind::Vae => "vae",
            ModelKind::Gan => "gan",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ae" => Ok(ModelKind::Ae),
            "vae" => Ok(ModelKind::Vae),
            "gan" => Ok(ModelKind::Gan),
            other => Err(Error::Config(format!("unknown model kind '{other}'"))),
        }
    }
}

/// The map G from latent space to images, with a sigmoid output so every
/// generated pixel lies in [0,1].
#[derive(Debug, Clone)]
pub struct GeneratorModel {
    pub net: Network,
    pub params: ParamSet,
    pub latent_dim: usize,
    pub kind: ModelKind,
    pub arch: ArchConfig,
}

impl GeneratorModel {
    pub fn image_size(&self) -> usize {
        self.arch.image_size
    }

    fn check_latent(&self, z: &Tensor) -> Result<()> {
        if z.shape() != [self.latent_dim] {
            return Err(Error::shape("generator latent", &[self.latent_dim], z.shape()));
        }
        Ok(())
    }

    /// Batched forward on an existing tape.
    pub fn forward_on_tape(&self, tape: &mut Tape, bindings: &Bindings, z: Var) -> Result<Var> {
        self.net.forward(tape, bindings, z, Mode::Eval, None)
    }

    /// G(z) for a single latent vector; returns an (H,W) image.
    pub fn generate(&self, z: &Tensor) -> Result<Tensor> {
        self.check_latent(z)?;
        let mut tape = Tape::new();
        let bindings = Bindings::bind_frozen(&mut tape, &self.params);
        let zv = tape.leaf(z.reshape(&[1, self.latent_dim])?);
        let out = self.forward_on_tape(&mut tape, &bindings, zv)?;
        let n = self.image_size();
        tape.value(out).reshape(&[n, n])
    }

    /// G applied row-wise to a (N, latent_dim) batch -> (N,1,H,W).
    pub fn generate_batch(&self, z: &Tensor) -> Result<Tensor> {
        if z.shape().len() != 2 || z.shape()[1] != self.latent_dim {
            return Err(Error::InvalidArgument(format!(
                "generate_batch expects (N,{}), got {:?}",
                self.latent_dim,
                z.shape()
            )));
        }
        let mut tape = Tape::new();
        let bindings = Bindings::bind_frozen(&mut tape, &self.params);
        let zv = tape.leaf(z.clone());
        let out = self.forward_on_tape(&mut tape, &bindings, zv)?;
        Ok(tape.value(out).clone())
    }

    /// Forward pass that keeps the tape so the caller can pull
    /// vector-Jacobian products with respect to z. Parameters enter as
    /// constants; only the latent requires gradient.
    pub fn eval_for_vjp(&self, z: &Tensor) -> Result<GeneratorEval> {
        self.check_latent(z)?;
        let mut tape = Tape::new();
        let bindings = Bindings::bind_frozen(&mut tape, &self.params);
        let zv = tape.leaf(z.reshape(&[1, self.latent_dim])?.with_grad());
        let out = self.forward_on_tape(&mut tape, &bindings, zv)?;
        Ok(GeneratorEval {
            image_size: self.image_size(),
            latent_dim: self.latent_dim,
            tape,
            z_var: zv,
            out_var: out,
        })
    }
}

/// A kept generator forward pass: image value plus z-gradients.
pub struct GeneratorEval {
    image_size: usize,
    latent_dim: usize,
    tape: Tape,
    z_var: Var,
    out_var: Var,
}

impl GeneratorEval {
    pub fn image(&self) -> Result<Tensor> {
        self.tape
            .value(self.out_var)
            .reshape(&[self.image_size, self.image_size])
    }

    /// dz for a given cotangent on the output image.
    pub fn vjp(&self, seed: &Tensor) -> Result<Tensor> {
        let seed4 = seed.reshape(&[1, 1, self.image_size, self.image_size])?;
        let grads = self.tape.backward_seeded(self.out_var, &seed4)?;
        grads
            .grad_or_zeros(&self.tape, self.z_var)
            .reshape(&[self.latent_dim])
    }
}

/// Encoder: shared conv trunk plus one dense head (AE) or mean/log-var
/// heads (VAE). The variance head emits log sigma^2, exponentiated before
/// use so the variance is always positive.
#[derive(Debug, Clone)]
pub struct EncoderModel {
    pub trunk: Network,
    pub mu_head: Network,
    pub logvar_head: Option<Network>,
    pub params: ParamSet,
    pub latent_dim: usize,
}

impl EncoderModel {
    pub fn is_variational(&self) -> bool {
        self.logvar_head.is_some()
    }

    /// Mean encoding on an existing tape: (N,1,H,W) -> (N,latent).
    pub fn mu_on_tape(&self, tape: &mut Tape, bindings: &Bindings, x: Var) -> Result<Var> {
        let f = self.trunk.forward(tape, bindings, x, Mode::Eval, None)?;
        self.mu_head.forward(tape, bindings, f, Mode::Eval, None)
    }

    /// Mean and log-variance heads (VAE only).
    pub fn mu_logvar_on_tape(
        &self,
        tape: &mut Tape,
        bindings: &Bindings,
        x: Var,
    ) -> Result<(Var, Var)> {
        let head = self.logvar_head.as_ref().ok_or_else(|| {
            Error::InvalidArgument("encoder has no variance head (not a VAE)".to_string())
        })?;
        let f = self.trunk.forward(tape, bindings, x, Mode::Eval, None)?;
        let mu = self.mu_head.forward(tape, bindings, f, Mode::Eval, None)?;
        let logvar = head.forward(tape, bindings, f, Mode::Eval, None)?;
        Ok((mu, logvar))
    }

    /// Plain encoding of an image batch (the VAE returns the mean).
    pub fn encode_batch(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let bindings = Bindings::bind_frozen(&mut tape, &self.params);
        let xv = tape.leaf(x.clone());
        let mu = self.mu_on_tape(&mut tape, &bindings, xv)?;
        Ok(tape.value(mu).clone())
    }

    /// Encode one (H,W) image to a latent vector.
    pub fn encode(&self, image: &Tensor) -> Result<Tensor> {
        let (h, w) = (image.shape()[0], image.shape()[1]);
        let batch = image.reshape(&[1, 1, h, w])?;
        self.encode_batch(&batch)?.reshape(&[self.latent_dim])
    }
}

/// Wasserstein critic: scalar score per image, no output activation.
#[derive(Debug, Clone)]
pub struct DiscriminatorModel {
    pub net: Network,
    pub params: ParamSet,
}

impl DiscriminatorModel {
    /// (N,1,H,W) -> (N,1) scores.
    pub fn score_on_tape(&self, tape: &mut Tape, bindings: &Bindings, x: Var) -> Result<Var> {
        self.net.forward(tape, bindings, x, Mode::Eval, None)
    }

    pub fn score_batch(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let bindings = Bindings::bind_frozen(&mut tape, &self.params);
        let xv = tape.leaf(x.clone());
        let s = self.score_on_tape(&mut tape, &bindings, xv)?;
        Ok(tape.value(s).clone())
    }
}
