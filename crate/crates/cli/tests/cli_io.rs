//! End-to-end checks of the harness: sweep determinism, skip accounting,
//! CSV schemas, and the binary's subcommand surface.

use dcem_cli::config::ConfigFile;
use dcem_cli::report::build_report;
use dcem_cli::sweep::{read_rows, run_sweep, SweepConfig, CSV_HEADER};
use std::path::PathBuf;
use std::process::Command;

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dcem-cli-{}-{}", name, std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn tiny_sweep_text(methods: &str) -> String {
    format!(
        "[sweep]\nq_t = 2\nq_y = 0.5\nk = 1\npsi = 0\nmethods = {methods}\nseeds = 42\n\
         n = 400\nepochs = 60\nmax_iters = 2\n"
    )
}

#[test]
fn single_setting_single_method_yields_one_row() {
    let cfg = ConfigFile::parse_str("t", &tiny_sweep_text("oracle")).unwrap();
    let sweep = SweepConfig::from_file(&cfg, 42).unwrap();
    let dir = temp_dir("one-row");
    let out = dir.join("rows.csv");
    let summary = run_sweep(&sweep, &out).unwrap();
    assert_eq!(summary.rows.len(), 1);
    assert_eq!(summary.jobs_requested, 1);
    assert_eq!(summary.jobs_skipped, 0);
    let rows = read_rows(&out).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].method, "oracle");
    assert_eq!(rows[0].seed, 42);
}

/// Metric columns (everything except wall_ms) byte-identical across reruns.
fn metric_columns(path: &PathBuf) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .map(|l| {
            let mut parts: Vec<&str> = l.split(',').collect();
            parts.pop();
            parts.join(",")
        })
        .collect()
}

#[test]
fn rerunning_a_sweep_reproduces_metric_columns() {
    let cfg = ConfigFile::parse_str("t", &tiny_sweep_text("oracle, y_obs")).unwrap();
    let sweep = SweepConfig::from_file(&cfg, 42).unwrap();
    let dir = temp_dir("det");
    let out1 = dir.join("a.csv");
    let out2 = dir.join("b.csv");
    run_sweep(&sweep, &out1).unwrap();
    run_sweep(&sweep, &out2).unwrap();
    assert_eq!(metric_columns(&out1), metric_columns(&out2));
}

#[test]
fn rows_are_isolated_from_other_settings() {
    let base = ConfigFile::parse_str("t", &tiny_sweep_text("oracle")).unwrap();
    let small = SweepConfig::from_file(&base, 42).unwrap();
    let wide_text = tiny_sweep_text("oracle").replace("psi = 0", "psi = 0, pi");
    let wide_cfg = ConfigFile::parse_str("t", &wide_text).unwrap();
    let wide = SweepConfig::from_file(&wide_cfg, 42).unwrap();
    let dir = temp_dir("iso");
    let out_small = dir.join("small.csv");
    let out_wide = dir.join("wide.csv");
    run_sweep(&small, &out_small).unwrap();
    run_sweep(&wide, &out_wide).unwrap();
    let small_rows = read_rows(&out_small).unwrap();
    let wide_rows = read_rows(&out_wide).unwrap();
    assert_eq!(wide_rows.len(), 2);
    let matching = wide_rows
        .iter()
        .find(|r| r.psi == 0.0)
        .expect("psi=0 row present");
    assert_eq!(matching.auc, small_rows[0].auc);
    assert_eq!(matching.roc_gap, small_rows[0].roc_gap);
}

#[test]
fn infeasible_settings_are_skipped_with_accounting() {
    // q_t = 4, k = 3 implies a group testing rate of 1.2
    let text = "[sweep]\nq_t = 1, 4\nq_y = 0.5\nk = 3\npsi = 0\nmethods = oracle\nseeds = 42\n\
                n = 300\nepochs = 40\n";
    let cfg = ConfigFile::parse_str("t", text).unwrap();
    let sweep = SweepConfig::from_file(&cfg, 42).unwrap();
    let dir = temp_dir("skip");
    let out = dir.join("rows.csv");
    let summary = run_sweep(&sweep, &out).unwrap();
    assert_eq!(summary.jobs_requested, 2);
    assert_eq!(summary.jobs_skipped, 1);
    assert_eq!(summary.rows.len(), 1);
    assert_eq!(summary.rows.len() + summary.jobs_skipped, summary.jobs_requested);
}

#[test]
fn report_runs_on_sweep_output() {
    let cfg = ConfigFile::parse_str("t", &tiny_sweep_text("oracle, tested_only")).unwrap();
    let sweep = SweepConfig::from_file(&cfg, 42).unwrap();
    let dir = temp_dir("report");
    let out = dir.join("rows.csv");
    run_sweep(&sweep, &out).unwrap();
    let rows = read_rows(&out).unwrap();
    let report = build_report(&rows).unwrap();
    assert_eq!(report.aggregates.len(), 2);
    for a in &report.aggregates {
        assert_eq!(a.n, 1);
        assert_eq!(a.auc.range, 0.0);
    }
    let table = report.render_table();
    assert!(table.contains("oracle"));
    assert!(table.contains("tested_only"));
}

#[test]
fn binary_simulate_fit_and_report_round_trip() {
    let dir = temp_dir("bin");
    let config_path = dir.join("cfg.txt");
    std::fs::write(
        &config_path,
        "[simulate]\nq_t = 2\nq_y = 0.5\nk = 1\npsi = 0\nn = 300\nseed = 7\n\n\
         [fit]\nq_t = 2\nq_y = 0.5\nk = 1\npsi = 0\nn = 300\nseed = 7\nmethod = oracle\nepochs = 40\n\n\
         [sweep]\nq_t = 2\nq_y = 0.5\nk = 1\npsi = 0\nmethods = oracle\nseeds = 7\nn = 300\nepochs = 40\n",
    )
    .unwrap();
    let bin = env!("CARGO_BIN_EXE_dcem");

    let sim_dir = dir.join("data");
    let status = Command::new(bin)
        .args(["simulate", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(&sim_dir)
        .status()
        .unwrap();
    assert!(status.success());
    for split in ["train", "validation", "test"] {
        assert!(sim_dir.join(format!("{split}.csv")).exists());
    }

    let row_csv = dir.join("fit.csv");
    let status = Command::new(bin)
        .args(["fit", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(&row_csv)
        .status()
        .unwrap();
    assert!(status.success());
    let rows = read_rows(&row_csv).unwrap();
    assert_eq!(rows.len(), 1);

    let report_csv = dir.join("report.csv");
    let status = Command::new(bin)
        .arg("report")
        .arg(&row_csv)
        .arg("--out")
        .arg(&report_csv)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&report_csv).unwrap();
    assert!(text.starts_with("method,"));
    assert!(report_csv.with_extension("tradeoff.csv").exists());
}

#[test]
fn binary_rejects_unknown_subcommand_and_bad_config() {
    let bin = env!("CARGO_BIN_EXE_dcem");
    let status = Command::new(bin).arg("frobnicate").status().unwrap();
    assert!(!status.success());

    let dir = temp_dir("bad");
    let config_path = dir.join("bad.txt");
    std::fs::write(&config_path, "[sweep]\nq_t = banana\n").unwrap();
    let out = Command::new(bin)
        .args(["sweep", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(dir.join("x.csv"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.txt"), "diagnostic names the file: {err}");
}

#[test]
fn csv_header_is_stable() {
    assert_eq!(
        CSV_HEADER,
        "q_t,q_y,k,psi,method,seed,auc,roc_gap,n_em_iters,wall_ms"
    );
}

#[test]
fn binary_verify_writes_contour_and_exits_zero() {
    let dir = temp_dir("verify");
    let contour = dir.join("contour.csv");
    let bin = env!("CARGO_BIN_EXE_dcem");
    let out = Command::new(bin)
        .args(["verify", "--out"])
        .arg(&contour)
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("closed_form_vs_grid_oracle"));
    assert!(stdout.matches("PASS").count() >= 10);
    assert!(!stdout.contains("FAIL"));
    let text = std::fs::read_to_string(&contour).unwrap();
    assert!(text.starts_with("q,t_hat,y_opt,r\n"));
    assert!(text.lines().count() > 1000);
}
