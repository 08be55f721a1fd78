//! Gradient correctness against the central finite-difference oracle.
//!
//! Every layer kind appears in at least one network below; backward
//! gradients must match finite differences (step 1e-5) to a relative
//! error of 1e-4, for parameters and inputs alike.

mod support;

use genreg::autodiff::{ConvSpec, Layer, Mode, Network};
use support::gradcheck_network;

const TOL: f64 = 1e-4;

fn dense_net() -> Network {
    Network::new(
        vec![5],
        vec![
            Layer::Dense {
                name: "fc1".into(),
                in_dim: 5,
                out_dim: 7,
            },
            Layer::Tanh,
            Layer::Dense {
                name: "fc2".into(),
                in_dim: 7,
                out_dim: 3,
            },
        ],
    )
}

#[test]
fn dense_tanh_stack() {
    for seed in [1, 2, 3] {
        let worst = gradcheck_network(dense_net(), 2, seed, Mode::Eval);
        assert!(worst <= TOL, "seed {seed}: rel err {worst}");
    }
}

#[test]
fn conv_leaky_relu() {
    let net = Network::new(
        vec![2, 6, 6],
        vec![
            Layer::Conv2d {
                name: "c1".into(),
                spec: ConvSpec {
                    in_ch: 2,
                    out_ch: 3,
                    kernel: 3,
                    stride: 1,
                    pad: 1,
                },
            },
            Layer::LeakyRelu { alpha: 0.2 },
            Layer::Conv2d {
                name: "c2".into(),
                spec: ConvSpec {
                    in_ch: 3,
                    out_ch: 2,
                    kernel: 4,
                    stride: 2,
                    pad: 1,
                },
            },
        ],
    );
    for seed in [5, 6] {
        let worst = gradcheck_network(net.clone(), 2, seed, Mode::Eval);
        assert!(worst <= TOL, "seed {seed}: rel err {worst}");
    }
}

#[test]
fn conv_transpose_sigmoid() {
    let net = Network::new(
        vec![3, 4, 4],
        vec![
            Layer::ConvTranspose2d {
                name: "u1".into(),
                spec: ConvSpec {
                    in_ch: 3,
                    out_ch: 2,
                    kernel: 4,
                    stride: 2,
                    pad: 1,
                },
            },
            Layer::Sigmoid,
        ],
    );
    for seed in [9, 10] {
        let worst = gradcheck_network(net.clone(), 2, seed, Mode::Eval);
        assert!(worst <= TOL, "seed {seed}: rel err {worst}");
    }
}

#[test]
fn relu_reshape_dense() {
    let net = Network::new(
        vec![1, 4, 4],
        vec![
            Layer::Conv2d {
                name: "c".into(),
                spec: ConvSpec {
                    in_ch: 1,
                    out_ch: 2,
                    kernel: 3,
                    stride: 1,
                    pad: 1,
                },
            },
            Layer::Relu,
            Layer::Reshape { shape: vec![32] },
            Layer::Dense {
                name: "fc".into(),
                in_dim: 32,
                out_dim: 4,
            },
        ],
    );
    for seed in [21, 22] {
        let worst = gradcheck_network(net.clone(), 2, seed, Mode::Eval);
        assert!(worst <= TOL, "seed {seed}: rel err {worst}");
    }
}

#[test]
fn dropout_with_frozen_mask() {
    let net = Network::new(
        vec![6],
        vec![
            Layer::Dense {
                name: "fc".into(),
                in_dim: 6,
                out_dim: 6,
            },
            Layer::Dropout { p: 0.3 },
            Layer::Tanh,
        ],
    );
    for seed in [31, 32] {
        let worst = gradcheck_network(net.clone(), 3, seed, Mode::Train);
        assert!(worst <= TOL, "seed {seed}: rel err {worst}");
    }
}

#[test]
fn full_generator_shaped_stack() {
    // dense stem -> reshape -> transposed convs -> sigmoid, the shape all
    // generators in this crate take
    let net = Network::new(
        vec![4],
        vec![
            Layer::Dense {
                name: "stem".into(),
                in_dim: 4,
                out_dim: 2 * 4 * 4,
            },
            Layer::LeakyRelu { alpha: 0.2 },
            Layer::Reshape { shape: vec![2, 4, 4] },
            Layer::ConvTranspose2d {
                name: "up".into(),
                spec: ConvSpec {
                    in_ch: 2,
                    out_ch: 1,
                    kernel: 4,
                    stride: 2,
                    pad: 1,
                },
            },
            Layer::Sigmoid,
        ],
    );
    for seed in [41, 42] {
        let worst = gradcheck_network(net.clone(), 2, seed, Mode::Eval);
        assert!(worst <= TOL, "seed {seed}: rel err {worst}");
    }
}

mod latent_and_penalty {
    use super::support::{finite_diff, rel_err};
    use genreg::autodiff::{Bindings, ParamSet, Tape};
    use genreg::models::{wgan_losses, ArchConfig, DiscriminatorModel, GeneratorModel, ModelKind};
    use genreg::rng::{rng_from_seed, standard_normal, uniform};
    use genreg::tensor::Tensor;

    fn tiny_arch() -> ArchConfig {
        ArchConfig {
            image_size: 16,
            latent_dim: 4,
            base_channels: 2,
            leaky_alpha: 0.2,
        }
    }

    fn make_generator(seed: u64) -> GeneratorModel {
        let cfg = tiny_arch();
        let net = cfg.generator_net().unwrap();
        let params = net.init_params(&mut rng_from_seed(seed)).unwrap();
        GeneratorModel {
            net,
            params,
            latent_dim: cfg.latent_dim,
            kind: ModelKind::Ae,
            arch: cfg,
        }
    }

    #[test]
    fn latent_gradient_of_generator_fit_matches_finite_differences() {
        // d/dz ||G(z) - x0||^2 via the kept-tape VJP, against the oracle
        let generator = make_generator(3);
        let mut rng = rng_from_seed(4);
        let x0 = uniform(&[16, 16], 0.0, 1.0, &mut rng);
        for trial in 0..5 {
            let z = standard_normal(&[4], &mut rng);
            let eval = generator.eval_for_vjp(&z).unwrap();
            let residual = eval.image().unwrap().sub(&x0).unwrap();
            let grad = eval.vjp(&residual.scale(2.0)).unwrap();

            let fd = finite_diff(
                |zz| {
                    generator
                        .generate(zz)
                        .unwrap()
                        .sub(&x0)
                        .unwrap()
                        .sqnorm()
                },
                &z,
                1e-5,
            );
            let err = rel_err(&grad, &fd);
            assert!(err <= 1e-4, "trial {trial}: rel err {err}");
        }
    }

    #[test]
    fn gradient_penalty_parameter_gradient_matches_finite_differences() {
        // the critic loss (including GP) must be differentiable w.r.t.
        // the critic parameters; this exercises the on-tape unrolled
        // input-gradient pass end to end
        let generator = make_generator(13);
        let cfg = tiny_arch();
        let net = cfg.critic_net().unwrap();
        let params = net.init_params(&mut rng_from_seed(14)).unwrap();
        let critic = DiscriminatorModel { net, params };

        let mut rng = rng_from_seed(15);
        let real = uniform(&[3, 1, 16, 16], 0.0, 1.0, &mut rng);
        let z = standard_normal(&[3, 4], &mut rng);
        let mix = uniform(&[3], 0.0, 1.0, &mut rng);

        // backward gradients of the critic loss
        let (critic_grads, critic_loss) = {
            let mut tape = Tape::new();
            let bg = Bindings::bind_frozen(&mut tape, &generator.params);
            let bd = Bindings::bind(&mut tape, &critic.params);
            let x = tape.leaf(real.clone());
            let vars = genreg::models::wgan_losses_on_tape(
                &mut tape,
                (&generator, &bg),
                (&critic, &bd),
                x,
                &z,
                &mix,
                10.0,
            )
            .unwrap();
            let gm = tape.backward(vars.critic).unwrap();
            (bd.gradients(&tape, &gm), tape.value(vars.critic).item())
        };
        assert!(critic_loss.is_finite());

        // finite differences through the full loss for each parameter
        let loss_at = |p: &ParamSet| -> f64 {
            let mut tape = Tape::new();
            let bg = Bindings::bind_frozen(&mut tape, &generator.params);
            let probe = DiscriminatorModel {
                net: critic.net.clone(),
                params: p.clone(),
            };
            let bd = Bindings::bind_frozen(&mut tape, p);
            let x = tape.leaf(real.clone());
            let vars = genreg::models::wgan_losses_on_tape(
                &mut tape,
                (&generator, &bg),
                (&probe, &bd),
                x,
                &z,
                &mix,
                10.0,
            )
            .unwrap();
            tape.value(vars.critic).item()
        };
        for name in critic.params.names().map(str::to_string).collect::<Vec<_>>() {
            let base = critic.params.get(&name).unwrap().clone();
            let fd = finite_diff(
                |t| {
                    let mut p = critic.params.clone();
                    p.set(&name, t.clone()).unwrap();
                    loss_at(&p)
                },
                &base,
                1e-5,
            );
            let err = rel_err(&critic_grads[&name], &fd);
            assert!(err <= 1e-4, "param {name}: rel err {err}");
        }
    }

    #[test]
    fn wgan_loss_values_are_consistent_across_calls() {
        let generator = make_generator(23);
        let cfg = tiny_arch();
        let net = cfg.critic_net().unwrap();
        let params = net.init_params(&mut rng_from_seed(24)).unwrap();
        let critic = DiscriminatorModel { net, params };
        let real = uniform(&[4, 1, 16, 16], 0.0, 1.0, &mut rng_from_seed(25));
        let a = wgan_losses(&real, &generator, &critic, 10.0, 7).unwrap();
        let b = wgan_losses(&real, &generator, &critic, 10.0, 7).unwrap();
        assert_eq!(a.critic.to_bits(), b.critic.to_bits());
        assert_eq!(a.generator.to_bits(), b.generator.to_bits());
        assert!(a.gradient_penalty >= 0.0);
    }
}
