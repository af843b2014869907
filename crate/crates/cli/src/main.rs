//! Command-line harness for disparate-censorship experiments.
//!
//! Subcommands:
//!   simulate   calibrate one setting and emit dataset CSVs
//!   fit        fit one method on one setting and print its metrics
//!   sweep      run a (setting x method x seed) grid into a result CSV
//!   report     aggregate a result CSV per method
//!   verify     run the closed-form theory checks
//!
//! Flags: --config PATH, --out PATH, --workers N, --seed N.

use dcem_cli::config::ConfigFile;
use dcem_cli::report::build_report;
use dcem_cli::sweep::{
    fit_method, job_seeds, read_rows, run_sweep, write_rows_atomic, EmTemplate, ResultRow, Setting,
    SweepConfig,
};
use dcem_cli::verify;
use dcem_core::metrics::{calibration_bins, evaluate};
use dcem_core::synthgen::{generate, monte_carlo_rates, solve_sim_params, SimConfig};
use dcem_core::{Error, Result};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

struct Args {
    command: String,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    workers: Option<usize>,
    seed: u64,
    positional: Vec<String>,
}

const USAGE: &str = "usage: dcem <simulate|fit|sweep|report|verify> \
                     [--config PATH] [--out PATH] [--workers N] [--seed N] [ARGS]";

fn parse_args() -> Result<Args> {
    let mut it = std::env::args().skip(1);
    let command = it
        .next()
        .ok_or_else(|| Error::OutOfRange(USAGE.to_string()))?;
    let mut args = Args {
        command,
        config: None,
        out: None,
        workers: None,
        seed: 42,
        positional: Vec::new(),
    };
    while let Some(a) = it.next() {
        let mut value = |name: &str| {
            it.next()
                .ok_or_else(|| Error::OutOfRange(format!("flag {name} needs a value")))
        };
        match a.as_str() {
            "--config" => args.config = Some(PathBuf::from(value("--config")?)),
            "--out" => args.out = Some(PathBuf::from(value("--out")?)),
            "--workers" => {
                args.workers = Some(value("--workers")?.parse().map_err(|_| {
                    Error::OutOfRange("--workers expects a positive integer".into())
                })?)
            }
            "--seed" => {
                args.seed = value("--seed")?
                    .parse()
                    .map_err(|_| Error::OutOfRange("--seed expects an integer".into()))?
            }
            other if other.starts_with("--") => {
                return Err(Error::OutOfRange(format!("unknown flag {other}\n{USAGE}")))
            }
            other => args.positional.push(other.to_string()),
        }
    }
    Ok(args)
}

fn require_config(args: &Args) -> Result<ConfigFile> {
    let path = args
        .config
        .as_ref()
        .ok_or_else(|| Error::OutOfRange(format!("{} requires --config", args.command)))?;
    ConfigFile::parse(path)
}

fn sim_from_section(cfg: &ConfigFile, section: &str, default_seed: u64) -> Result<SimConfig> {
    let s = cfg.section(section)?;
    Ok(SimConfig {
        q_t: s.f64("q_t")?,
        q_y: s.f64("q_y")?,
        k: s.f64("k")?,
        psi: s.f64_or("psi", 0.0)?,
        n: s.usize_or("n", 20_000)?,
        overlap_scale: s.f64_or("overlap_scale", 1.0)?,
        seed: s.u64_or("seed", default_seed)?,
    })
}

fn cmd_simulate(args: &Args) -> Result<()> {
    let cfg = require_config(args)?;
    let sim = sim_from_section(&cfg, "simulate", args.seed)?;
    let out_dir = args
        .out
        .clone()
        .ok_or_else(|| Error::OutOfRange("simulate requires --out DIR".into()))?;
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let t0 = Instant::now();
    let params = solve_sim_params(&sim)?;
    let (train, val, test) = generate::<f64>(&sim, &params);
    for ds in [&train, &val, &test] {
        let path = out_dir.join(format!("{}.csv", ds.split.name()));
        ds.write_csv(&path)?;
        println!("wrote {} ({} examples)", path.display(), ds.len());
    }
    let (py0, py1, pt0, pt1) = monte_carlo_rates(&sim, &params, 1_000_000);
    println!(
        "params: mu=({:.6}, {:.6}) tau=({:.6}, {:.6}) c_y={:.6}  [{:.1?}]",
        params.mu_0,
        params.mu_1,
        params.tau_0,
        params.tau_1,
        params.c_y,
        t0.elapsed()
    );
    println!(
        "achieved rates: P(Y|A=0)={py0:.4} P(Y|A=1)={py1:.4} P(T|A=0)={pt0:.4} P(T|A=1)={pt1:.4}"
    );
    Ok(())
}

fn cmd_fit(args: &Args) -> Result<()> {
    let cfg = require_config(args)?;
    let section = cfg.section("fit")?;
    let method = section.method("method")?;
    let sim = sim_from_section(&cfg, "fit", args.seed)?;
    let em_template = EmTemplate::from_section(&section)?;
    let setting = Setting {
        q_t: sim.q_t,
        q_y: sim.q_y,
        k: sim.k,
        psi: sim.psi,
    };
    let config_seed = sim.seed;
    let (data_seed, fit_seed) = job_seeds(
        args.seed,
        setting,
        sim.overlap_scale,
        sim.n,
        sim.seed,
        method,
    );
    let sim = SimConfig {
        seed: data_seed,
        ..sim
    };
    let params = solve_sim_params(&sim)?;
    let (train, val, test) = generate::<f64>(&sim, &params);
    let em = em_template.em_config(fit_seed);
    let start = Instant::now();
    let art = fit_method(method, &train, &val, &test, &em)?;
    let wall_ms = start.elapsed().as_millis();
    let rep = evaluate(&art.scores, &test.y_bool(), &test.groups())?;
    println!(
        "{} q_t={} q_y={} k={} psi={} seed={}: auc {:.6} roc_gap {:.6} em_iters {} ({} ms)",
        method.tag(),
        sim.q_t,
        sim.q_y,
        sim.k,
        sim.psi,
        config_seed,
        rep.auc,
        rep.roc_gap,
        art.n_em_iters,
        wall_ms
    );
    if let Some(out) = &args.out {
        let row = ResultRow {
            q_t: sim.q_t,
            q_y: sim.q_y,
            k: sim.k,
            psi: sim.psi,
            method: method.tag().to_string(),
            seed: config_seed,
            auc: Some(rep.auc),
            roc_gap: Some(rep.roc_gap),
            n_em_iters: art.n_em_iters,
            wall_ms,
        };
        write_rows_atomic(out, &[row])?;
        println!("wrote {}", out.display());
    }
    if let Some(path) = section.string_opt("calibration_out") {
        match art.propensity {
            Some(g) => {
                let t_hat = g.predict(&val.features_with_group())?;
                let tested: Vec<bool> = val.examples.iter().map(|e| e.t).collect();
                let bins = calibration_bins(&t_hat, &tested, 10);
                let mut body = String::from("mean_predicted,empirical_rate,count\n");
                for (p, r, n) in bins {
                    body.push_str(&format!("{p:.6},{r:.6},{n}\n"));
                }
                let mut f = std::fs::File::create(&path)
                    .map_err(|e| Error::io(path.clone(), e))?;
                f.write_all(body.as_bytes())
                    .map_err(|e| Error::io(path.clone(), e))?;
                println!("wrote {path}");
            }
            None => eprintln!("calibration_out ignored: {} has no propensity model", method.tag()),
        }
    }
    Ok(())
}

fn cmd_sweep(args: &Args) -> Result<()> {
    let cfg = require_config(args)?;
    let sweep = SweepConfig::from_file(&cfg, args.seed)?;
    let out = args
        .out
        .clone()
        .or_else(|| sweep.out.as_ref().map(PathBuf::from))
        .ok_or_else(|| Error::OutOfRange("sweep needs --out or `out =` in [sweep]".into()))?;
    let t0 = Instant::now();
    let summary = run_sweep(&sweep, &out)?;
    println!(
        "wrote {} rows to {} ({} skipped of {} requested, {} pseudo-label violations) in {:.1?}",
        summary.rows.len(),
        summary.out_path.display(),
        summary.jobs_skipped,
        summary.jobs_requested,
        summary.estep_violations,
        t0.elapsed()
    );
    Ok(())
}

fn cmd_report(args: &Args) -> Result<()> {
    let input = args
        .positional
        .first()
        .map(PathBuf::from)
        .or_else(|| args.config.clone())
        .ok_or_else(|| Error::OutOfRange("report needs a result CSV path".into()))?;
    let rows = read_rows(&input)?;
    let report = build_report(&rows)?;
    print!("{}", report.render_table());
    if let Some(out) = &args.out {
        report.write_csv(out)?;
        println!(
            "wrote {} and {}",
            out.display(),
            out.with_extension("tradeoff.csv").display()
        );
    }
    Ok(())
}

fn cmd_verify(args: &Args) -> Result<bool> {
    let checks = verify::verify_all();
    let mut all = true;
    for c in &checks {
        println!(
            "{:<40} {}  {}",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.detail
        );
        all &= c.passed;
    }
    if let Some(out) = &args.out {
        verify::write_contour_csv(out)?;
        println!("wrote {}", out.display());
    }
    Ok(all)
}

fn run() -> Result<bool> {
    let args = parse_args()?;
    if let Some(workers) = args.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| Error::OutOfRange(format!("rayon pool: {e}")))?;
    }
    match args.command.as_str() {
        "simulate" => cmd_simulate(&args).map(|()| true),
        "fit" => cmd_fit(&args).map(|()| true),
        "sweep" => cmd_sweep(&args).map(|()| true),
        "report" => cmd_report(&args).map(|()| true),
        "verify" => cmd_verify(&args),
        other => Err(Error::OutOfRange(format!(
            "unknown subcommand `{other}`\n{USAGE}"
        ))),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
