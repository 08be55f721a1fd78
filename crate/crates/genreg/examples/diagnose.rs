use genreg::datasets::{generate_shapes, ShapesConfig};
use genreg::eval::{encode_by_optimization, psnr};
use genreg::models::{train, ModelKind, TrainConfig};
use genreg::rng::derive_seed;
use genreg::solvers::Stopping;

fn main() {
    let test_set = generate_shapes(&ShapesConfig::new(32, 10, 99)).unwrap();
    let stop = Stopping { max_iters: 300, tol: 1e-9 };
    for (tag, n, epochs, batch) in [
        ("n400-e250-b8", 400usize, 250usize, 8usize),
        ("n800-e150-b8", 800, 150, 8),
        ("n1500-e100-b8", 1500, 100, 8),
        ("n800-e150-b4", 800, 150, 4),
    ] {
        let train_set = generate_shapes(&ShapesConfig::new(32, n, 11)).unwrap();
        let cfg = TrainConfig {
            epochs,
            batch_size: batch,
            latent_dim: 10,
            base_channels: 8,
            seed: 21,
            ..TrainConfig::new(10)
        };
        let t0 = std::time::Instant::now();
        let ae = train(ModelKind::Ae, &train_set, &cfg).unwrap();
        let dt = t0.elapsed().as_secs_f64();
        let mut mean = 0.0;
        for (i, img) in test_set.images.iter().enumerate() {
            let res = encode_by_optimization(
                img, &ae.generator, ae.encoder.as_ref(), 1,
                derive_seed(31, i as u64), &stop,
            ).unwrap();
            mean += psnr(&res.image, img, 1.0).unwrap();
        }
        println!(
            "{tag}: {:.0}s, AE loss {:.2}, test encode PSNR {:.2}",
            dt,
            ae.history.last().unwrap().loss,
            mean / test_set.len() as f64
        );
    }
}
