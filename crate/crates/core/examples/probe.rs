// Landscape probe: oracle/tested/y_obs at reduced scale across anchors.
use dcem_core::baselines::{fit_baseline, Method};
use dcem_core::dcem::EmConfig;
use dcem_core::metrics::evaluate;
use dcem_core::nnet::TrainConfig;
use dcem_core::synthgen::*;
use std::f64::consts::PI;

fn main() {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(8000.0) as usize;
    let epochs = args.get(1).copied().unwrap_or(500.0) as usize;
    for psi in [0.0, PI / 3.0, 2.0 * PI / 3.0, PI] {
        let sim = SimConfig::new(2.0, 0.5, 1.0, psi, n, 42);
        let params = solve_sim_params(&sim).unwrap();
        let (train, val, test) = generate::<f64>(&sim, &params);
        let labels = test.y_bool();
        let groups = test.groups();
        let em = EmConfig::<f64> {
            train: TrainConfig { epochs, ..Default::default() },
            ..Default::default()
        };
        let mut line = format!("psi {psi:.2}:");
        for m in [
            Method::Oracle,
            Method::TestedOnly,
            Method::YObs,
            Method::ImputationOnly,
            Method::NoCausalReg,
        ] {
            let fit = fit_baseline(m, &train, &val, &em).unwrap();
            let rep = evaluate(&fit.score(&test).unwrap(), &labels, &groups).unwrap();
            line.push_str(&format!(" {} {:.3}/{:.3}", m.tag(), rep.auc, rep.roc_gap));
        }
        let fit = dcem_core::dcem::fit_dcem(&train, &val, &em).unwrap();
        let rep = evaluate(&fit.network.predict(&test.features()).unwrap(), &labels, &groups).unwrap();
        line.push_str(&format!(" dcem {:.3}/{:.3} it{}", rep.auc, rep.roc_gap, fit.n_iters));
        println!("{line}");
    }
}
