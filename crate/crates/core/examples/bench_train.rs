//! Training-throughput benchmark at the experiment scale: one network,
//! 20000 examples, the default configuration.
//!
//!     cargo run --release -p dcem-core --example bench_train

use dcem_core::nnet::{train_with_loss, Network, TrainConfig, WeightedBce};
use dcem_core::synthgen::{generate, solve_sim_params, SimConfig};
use std::time::Instant;

fn main() {
    let sim = SimConfig::new(2.0, 0.5, 1.0, 0.0, 20_000, 42);
    let t0 = Instant::now();
    let params = solve_sim_params(&sim).unwrap();
    println!("calibration: {:.2?}", t0.elapsed());

    let (train, _, _) = generate::<f64>(&sim, &params);
    let feats = train.features();
    let loss = WeightedBce::new(train.y_obs(), None);
    let cfg = TrainConfig::<f64>::default();
    let init = Network::new(&[2, 64, 64, 1], cfg.seed);

    let t0 = Instant::now();
    let out = train_with_loss(&init, &feats, &loss, &cfg, None).unwrap();
    let dt = t0.elapsed();
    println!(
        "{} epochs on {} examples: {:.2?} ({:.1} ms/epoch), final loss {:.6}",
        cfg.epochs,
        feats.len(),
        dt,
        dt.as_secs_f64() * 1e3 / cfg.epochs as f64,
        out.history.last().unwrap()
    );
}
