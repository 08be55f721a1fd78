use std::time::Instant;

use genreg::autodiff::{ConvSpec, Layer, Network};
use genreg::datasets::{generate_shapes, ShapesConfig};
use genreg::eval::{encode_by_optimization, psnr};
use genreg::models::{ArchConfig, EncoderModel, GeneratorModel, ModelKind};
use genreg::autodiff::{AdamConfig, Bindings, Tape};
use genreg::rng::{derive_seed, rng_from_seed};
use genreg::solvers::Stopping;

// hand-rolled AE training over a custom generator net, to iterate on
// architectures without touching the library
fn train_ae(
    gen_net: &Network,
    trunk: &Network,
    head: &Network,
    data: &genreg::datasets::Dataset,
    epochs: usize,
    seed: u64,
    batch: usize,
    peak_lr: f64,
    schedule: bool,
    bias_init: f64,
    final_name: &str,
) -> (GeneratorModel, EncoderModel) {
    let mut rng = rng_from_seed(derive_seed(seed, 1));
    let mut gen_params = gen_net.init_params(&mut rng).unwrap();
    if bias_init != 0.0 {
        let b = gen_params.get(&format!("{final_name}.b")).unwrap().map(|_| bias_init);
        gen_params.set(&format!("{final_name}.b"), b).unwrap();
    }
    let mut enc_params = trunk.init_params(&mut rng).unwrap();
    for (n, t) in head.init_params(&mut rng).unwrap().iter() {
        enc_params.insert(n, t.clone()).unwrap();
    }
    let mut shuffle_rng = rng_from_seed(derive_seed(seed, 2));
    use rand::Rng;
    for _epoch in 0..epochs {
        let lr = if schedule {
            let warm = 3.0f64;
            let e = _epoch as f64;
            if e < warm {
                peak_lr * (e + 1.0) / warm
            } else {
                let t = (e - warm) / (epochs as f64 - warm).max(1.0);
                1e-4 + (peak_lr - 1e-4) * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
            }
        } else {
            peak_lr
        };
        let adam = AdamConfig { lr, ..AdamConfig::default() };
        let mut idx: Vec<usize> = (0..data.len()).collect();
        for i in (1..idx.len()).rev() {
            let j = shuffle_rng.gen_range(0..=i);
            idx.swap(i, j);
        }
        for chunk in idx.chunks(batch) {
            let batch = data.batch(chunk).unwrap();
            let mut tape = Tape::new();
            let be = Bindings::bind(&mut tape, &enc_params);
            let bg = Bindings::bind(&mut tape, &gen_params);
            let x = tape.leaf(batch);
            let f = trunk.forward(&mut tape, &be, x, genreg::autodiff::Mode::Eval, None).unwrap();
            let z = head.forward(&mut tape, &be, f, genreg::autodiff::Mode::Eval, None).unwrap();
            let xh = gen_net.forward(&mut tape, &bg, z, genreg::autodiff::Mode::Eval, None).unwrap();
            let d = tape.sub(xh, x).unwrap();
            let sq = tape.sqnorm(d).unwrap();
            let loss = tape.scale(sq, 1.0 / chunk.len() as f64);
            let gm = tape.backward(loss).unwrap();
            enc_params.adam_step(&be.gradients(&tape, &gm), &adam).unwrap();
            gen_params.adam_step(&bg.gradients(&tape, &gm), &adam).unwrap();
        }
    }
    let arch = ArchConfig { image_size: 32, latent_dim: 10, base_channels: 8, leaky_alpha: 0.2 };
    (
        GeneratorModel { net: gen_net.clone(), params: gen_params, latent_dim: 10, kind: ModelKind::Ae, arch },
        EncoderModel { trunk: trunk.clone(), mu_head: head.clone(), logvar_head: None, params: enc_params, latent_dim: 10 },
    )
}

fn stem16_generator(ch: usize) -> Network {
    Network::new(
        vec![10],
        vec![
            Layer::Dense { name: "gen.stem".into(), in_dim: 10, out_dim: ch * 16 * 16 },
            Layer::LeakyRelu { alpha: 0.2 },
            Layer::Reshape { shape: vec![ch, 16, 16] },
            Layer::ConvTranspose2d {
                name: "gen.up".into(),
                spec: ConvSpec { in_ch: ch, out_ch: ch, kernel: 4, stride: 2, pad: 1 },
            },
            Layer::LeakyRelu { alpha: 0.2 },
            Layer::Conv2d {
                name: "gen.refine".into(),
                spec: ConvSpec { in_ch: ch, out_ch: 1, kernel: 3, stride: 1, pad: 1 },
            },
            Layer::Sigmoid,
        ],
    )
}

fn main() {
    let train_set = generate_shapes(&ShapesConfig::new(32, 1500, 11)).unwrap();
    let test_set = generate_shapes(&ShapesConfig::new(32, 10, 12)).unwrap();
    let arch = ArchConfig { image_size: 32, latent_dim: 10, base_channels: 8, leaky_alpha: 0.2 };
    let trunk = arch.encoder_trunk().unwrap();
    let head = arch.encoder_head("enc.mu").unwrap();

    for (tag, ch, epochs, seed, batch, lr, sched, bias) in [
        ("b16-lr2e3-sched-bias", 8usize, 60usize, 21u64, 16usize, 2e-3, true, -2.0),
        ("b16-lr1e3-sched-bias", 8, 60, 21, 16, 1e-3, true, -2.0),
        ("b32-lr2e3-sched-bias", 8, 60, 21, 32, 2e-3, true, -2.0),
        ("b16-lr2e3-sched-nobias", 8, 60, 21, 16, 2e-3, true, 0.0),
    ] {
        let gen_net = stem16_generator(ch);
        let t0 = Instant::now();
        let (generator, encoder) = train_ae(&gen_net, &trunk, &head, &train_set, epochs, seed, batch, lr, sched, bias, "gen.refine");
        let dt = t0.elapsed().as_secs_f64();
        let mut mean_psnr = 0.0;
        for (i, img) in test_set.images.iter().enumerate() {
            let res = encode_by_optimization(img, &generator, Some(&encoder), 1, derive_seed(31, i as u64), &Stopping { max_iters: 300, tol: 1e-9 }).unwrap();
            mean_psnr += psnr(&res.image, img, 1.0).unwrap();
        }
        mean_psnr /= test_set.len() as f64;
        println!("{tag}: train {:.0}s, encode PSNR {:.2}", dt, mean_psnr);
    }
}
