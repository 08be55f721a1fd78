//! Desk-scale network architectures, shared by the three generative
//! models per dataset: the generator always pairs a dense stem with two
//! stride-2 transposed-conv blocks, encoders and critics mirror it with
//! stride-2 convolutions. Image sides must be divisible by four.

use serde::{Deserialize, Serialize};

use crate::autodiff::{ConvSpec, Layer, Network};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub image_size: usize,
    pub latent_dim: usize,
    /// Channel count of the outermost conv block; doubled at the bottleneck.
    pub base_channels: usize,
    pub leaky_alpha: f64,
}

impl ArchConfig {
    pub fn shapes_default() -> Self {
        ArchConfig {
            image_size: 32,
            latent_dim: 10,
            base_channels: 8,
            leaky_alpha: 0.2,
        }
    }

    pub fn mnist_default() -> Self {
        ArchConfig {
            image_size: 28,
            latent_dim: 8,
            base_channels: 8,
            leaky_alpha: 0.2,
        }
    }

    fn check(&self) -> Result<()> {
        if self.image_size % 4 != 0 {
            return Err(Error::InvalidArgument(format!(
                "architecture needs image_size divisible by 4, got {}",
                self.image_size
            )));
        }
        if self.latent_dim == 0 || self.base_channels == 0 {
            return Err(Error::InvalidArgument(
                "latent_dim and base_channels must be positive".to_string(),
            ));
        }
        Ok(())
    }

    fn quarter(&self) -> usize {
        self.image_size / 4
    }

    /// Flattened feature size at the encoder/critic bottleneck.
    pub fn feature_dim(&self) -> usize {
        2 * self.base_channels * self.quarter() * self.quarter()
    }

    /// latent -> dense stem -> two stride-2 upsampling blocks -> a
    /// stride-1 refinement conv -> sigmoid. The refinement stage
    /// sharpens edges the strided upsampling alone leaves blurry.
    pub fn generator_net(&self) -> Result<Network> {
        self.check()?;
        let (c1, c2) = (self.base_channels, 2 * self.base_channels);
        let q = self.quarter();
        Ok(Network::new(
            vec![self.latent_dim],
            vec![
                Layer::Dense {
                    name: "gen.stem".into(),
                    in_dim: self.latent_dim,
                    out_dim: c2 * q * q,
                },
                Layer::LeakyRelu {
                    alpha: self.leaky_alpha,
                },
                Layer::Reshape {
                    shape: vec![c2, q, q],
                },
                Layer::ConvTranspose2d {
                    name: "gen.up1".into(),
                    spec: ConvSpec {
                        in_ch: c2,
                        out_ch: c1,
                        kernel: 4,
                        stride: 2,
                        pad: 1,
                    },
                },
                Layer::LeakyRelu {
                    alpha: self.leaky_alpha,
                },
                Layer::ConvTranspose2d {
                    name: "gen.up2".into(),
                    spec: ConvSpec {
                        in_ch: c1,
                        out_ch: c1,
                        kernel: 4,
                        stride: 2,
                        pad: 1,
                    },
                },
                Layer::LeakyRelu {
                    alpha: self.leaky_alpha,
                },
                Layer::Conv2d {
                    name: "gen.refine".into(),
                    spec: ConvSpec {
                        in_ch: c1,
                        out_ch: 1,
                        kernel: 3,
                        stride: 1,
                        pad: 1,
                    },
                },
                Layer::Sigmoid,
            ],
        ))
    }

    /// image -> two stride-2 conv blocks -> flattened features.
    pub fn encoder_trunk(&self) -> Result<Network> {
        self.check()?;
        let (c1, c2) = (self.base_channels, 2 * self.base_channels);
        Ok(Network::new(
            vec![1, self.image_size, self.image_size],
            vec![
                Layer::Conv2d {
                    name: "enc.down1".into(),
                    spec: ConvSpec {
                        in_ch: 1,
                        out_ch: c1,
                        kernel: 4,
                        stride: 2,
                        pad: 1,
                    },
                },
                Layer::LeakyRelu {
                    alpha: self.leaky_alpha,
                },
                Layer::Conv2d {
                    name: "enc.down2".into(),
                    spec: ConvSpec {
                        in_ch: c1,
                        out_ch: c2,
                        kernel: 4,
                        stride: 2,
                        pad: 1,
                    },
                },
                Layer::LeakyRelu {
                    alpha: self.leaky_alpha,
                },
                Layer::Reshape {
                    shape: vec![self.feature_dim()],
                },
            ],
        ))
    }

    /// One dense head on top of the trunk features.
    pub fn encoder_head(&self, name: &str) -> Result<Network> {
        self.check()?;
        Ok(Network::new(
            vec![self.feature_dim()],
            vec![Layer::Dense {
                name: name.to_string(),
                in_dim: self.feature_dim(),
                out_dim: self.latent_dim,
            }],
        ))
    }

    /// Wasserstein critic: conv trunk plus a scalar dense head, no output
    /// activation.
    pub fn critic_net(&self) -> Result<Network> {
        self.check()?;
        let (c1, c2) = (self.base_channels, 2 * self.base_channels);
        Ok(Network::new(
            vec![1, self.image_size, self.image_size],
            vec![
                Layer::Conv2d {
                    name: "disc.down1".into(),
                    spec: ConvSpec {
                        in_ch: 1,
                        out_ch: c1,
                        kernel: 4,
                        stride: 2,
                        pad: 1,
                    },
                },
                Layer::LeakyRelu {
                    alpha: self.leaky_alpha,
                },
                Layer::Conv2d {
                    name: "disc.down2".into(),
                    spec: ConvSpec {
                        in_ch: c1,
                        out_ch: c2,
                        kernel: 4,
                        stride: 2,
                        pad: 1,
                    },
                },
                Layer::LeakyRelu {
                    alpha: self.leaky_alpha,
                },
                Layer::Reshape {
                    shape: vec![self.feature_dim()],
                },
                Layer::Dense {
                    name: "disc.head".into(),
                    in_dim: self.feature_dim(),
                    out_dim: 1,
                },
            ],
        ))
    }
}
