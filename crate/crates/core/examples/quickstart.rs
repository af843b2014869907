//! Fit the censorship-aware EM learner and the naive baselines on one small
//! synthetic setting and print their test metrics.
//!
//!     cargo run --release -p dcem-core --example quickstart

use dcem_core::baselines::{fit_baseline, Method};
use dcem_core::dcem::{fit_dcem, EmConfig};
use dcem_core::metrics::evaluate;
use dcem_core::nnet::TrainConfig;
use dcem_core::synthgen::{generate, solve_sim_params, SimConfig};

fn main() {
    let sim = SimConfig::new(2.0, 0.5, 1.0, 0.0, 4000, 42);
    let params = solve_sim_params(&sim).expect("feasible setting");
    println!(
        "calibrated: mu = ({:.3}, {:.3}), tau = ({:.3}, {:.3}), c_y = {:.3}",
        params.mu_0, params.mu_1, params.tau_0, params.tau_1, params.c_y
    );
    let (train, val, test) = generate::<f64>(&sim, &params);
    let labels = test.y_bool();
    let groups = test.groups();

    let em = EmConfig::<f64> {
        train: TrainConfig {
            epochs: 300,
            ..Default::default()
        },
        ..Default::default()
    };

    for method in [Method::YObs, Method::TestedOnly, Method::Oracle] {
        let fit = fit_baseline(method, &train, &val, &em).expect("baseline fits");
        let rep = evaluate(&fit.score(&test).unwrap(), &labels, &groups).unwrap();
        println!("{:<12} auc {:.3}  roc gap {:.3}", method.tag(), rep.auc, rep.roc_gap);
    }
    let fit = fit_dcem(&train, &val, &em).expect("dcem fits");
    let scores = fit.network.predict(&test.features()).unwrap();
    let rep = evaluate(&scores, &labels, &groups).unwrap();
    println!(
        "{:<12} auc {:.3}  roc gap {:.3}  ({} em iterations)",
        "dcem", rep.auc, rep.roc_gap, fit.n_iters
    );
}
