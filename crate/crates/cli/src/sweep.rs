//! Sweep orchestration: run a grid of (setting, method, seed) jobs with
//! isolated random substreams and collect one CSV row per job.
//!
//! Each job's streams are derived by hashing the master seed with the
//! setting tuple, the method tag, and the dataset seed, so a row is
//! unchanged when other settings are added to or removed from the sweep.
//! Dataset streams exclude the method, so every method in a sweep sees the
//! same simulated data for a given setting and seed.

use crate::config::{ConfigFile, MethodSel, SectionView};
use dcem_core::baselines::fit_baseline;
use dcem_core::dcem::{fit_dcem, EmConfig};
use dcem_core::metrics::evaluate;
use dcem_core::nnet::TrainConfig;
use dcem_core::rng::{mix, tag};
use dcem_core::synthgen::{generate, solve_sim_params, Dataset, SimConfig};
use dcem_core::{Error, Result};
use rayon::prelude::*;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// One simulation setting of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setting {
    pub q_t: f64,
    pub q_y: f64,
    pub k: f64,
    pub psi: f64,
}

impl Setting {
    /// Stable hash of the setting tuple from exact float bits.
    fn hash(&self, overlap_scale: f64, n: usize) -> u64 {
        mix(
            tag("setting"),
            &[
                self.q_t.to_bits(),
                self.q_y.to_bits(),
                self.k.to_bits(),
                self.psi.to_bits(),
                overlap_scale.to_bits(),
                n as u64,
            ],
        )
    }
}

/// Parsed sweep specification.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub q_t: Vec<f64>,
    pub q_y: Vec<f64>,
    pub k: Vec<f64>,
    pub psi: Vec<f64>,
    pub methods: Vec<MethodSel>,
    pub seeds: Vec<u64>,
    pub n: usize,
    pub overlap_scale: f64,
    pub master_seed: u64,
    pub em: EmTemplate,
    pub out: Option<String>,
}

/// EM and training knobs shared by every job.
#[derive(Debug, Clone)]
pub struct EmTemplate {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Examples per gradient step; 0 selects full-batch training.
    pub batch_size: usize,
    /// Adam epochs per EM M-step.
    pub m_step_epochs: usize,
    pub max_iters: usize,
    pub patience: usize,
    pub warm_start: bool,
    pub temperature: f64,
    pub hidden: Vec<usize>,
}

impl Default for EmTemplate {
    fn default() -> Self {
        EmTemplate {
            epochs: 1000,
            learning_rate: 1e-3,
            weight_decay: 0.0,
            batch_size: 128,
            m_step_epochs: 50,
            max_iters: 50,
            patience: 3,
            warm_start: true,
            temperature: 1.0,
            hidden: vec![64, 64],
        }
    }
}

impl EmTemplate {
    pub fn from_section(s: &SectionView<'_>) -> Result<EmTemplate> {
        let d = EmTemplate::default();
        Ok(EmTemplate {
            epochs: s.usize_or("epochs", d.epochs)?,
            learning_rate: s.f64_or("learning_rate", d.learning_rate)?,
            weight_decay: s.f64_or("weight_decay", d.weight_decay)?,
            batch_size: s.usize_or("batch_size", d.batch_size)?,
            m_step_epochs: s.usize_or("m_step_epochs", d.m_step_epochs)?,
            max_iters: s.usize_or("max_iters", d.max_iters)?,
            patience: s.usize_or("patience", d.patience)?,
            warm_start: s.usize_or("warm_start", 1)? != 0,
            temperature: s.f64_or("temperature", d.temperature)?,
            hidden: d.hidden,
        })
    }

    pub fn em_config(&self, fit_seed: u64) -> EmConfig<f64> {
        EmConfig {
            max_iters: self.max_iters,
            patience: self.patience,
            warm_start: self.warm_start,
            temperature: self.temperature,
            hidden: self.hidden.clone(),
            m_step_epochs: self.m_step_epochs,
            train: TrainConfig {
                learning_rate: self.learning_rate,
                weight_decay: self.weight_decay,
                epochs: self.epochs,
                batch_size: (self.batch_size > 0).then_some(self.batch_size),
                patience: None,
                seed: fit_seed,
            },
            ..EmConfig::default()
        }
    }
}

impl SweepConfig {
    pub fn from_file(cfg: &ConfigFile, master_seed: u64) -> Result<SweepConfig> {
        let s = cfg.section("sweep")?;
        Ok(SweepConfig {
            q_t: s.f64_list("q_t")?,
            q_y: s.f64_list("q_y")?,
            k: s.f64_list("k")?,
            psi: s.f64_list("psi")?,
            methods: s.methods("methods")?,
            seeds: s.u64_list_or("seeds", &[42])?,
            n: s.usize_or("n", 20_000)?,
            overlap_scale: s.f64_or("overlap_scale", 1.0)?,
            master_seed: s.u64_or("seed", master_seed)?,
            em: EmTemplate::from_section(&s)?,
            out: s.string_opt("out"),
        })
    }

    pub fn settings(&self) -> Vec<Setting> {
        let mut out = Vec::new();
        for &q_t in &self.q_t {
            for &q_y in &self.q_y {
                for &k in &self.k {
                    for &psi in &self.psi {
                        out.push(Setting { q_t, q_y, k, psi });
                    }
                }
            }
        }
        out
    }
}

/// One CSV row of sweep results. `auc`/`roc_gap` are `None` when the
/// evaluation was invalid (degenerate group labels), written as `NA`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub q_t: f64,
    pub q_y: f64,
    pub k: f64,
    pub psi: f64,
    pub method: String,
    pub seed: u64,
    pub auc: Option<f64>,
    pub roc_gap: Option<f64>,
    pub n_em_iters: usize,
    pub wall_ms: u128,
}

pub const CSV_HEADER: &str = "q_t,q_y,k,psi,method,seed,auc,roc_gap,n_em_iters,wall_ms";

fn fmt_metric(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => "NA".to_string(),
    }
}

impl ResultRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.q_t,
            self.q_y,
            self.k,
            self.psi,
            self.method,
            self.seed,
            fmt_metric(self.auc),
            fmt_metric(self.roc_gap),
            self.n_em_iters,
            self.wall_ms
        )
    }

    pub fn from_csv(path: &str, line_no: usize, line: &str) -> Result<ResultRow> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 10 fields, got {}", f.len()),
            ));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::parse(path, line_no, format!("bad {what} `{s}`")))
        };
        let metric = |s: &str, what: &str| -> Result<Option<f64>> {
            if s == "NA" {
                Ok(None)
            } else {
                num(s, what).map(Some)
            }
        };
        Ok(ResultRow {
            q_t: num(f[0], "q_t")?,
            q_y: num(f[1], "q_y")?,
            k: num(f[2], "k")?,
            psi: num(f[3], "psi")?,
            method: f[4].to_string(),
            seed: f[5]
                .parse()
                .map_err(|_| Error::parse(path, line_no, format!("bad seed `{}`", f[5])))?,
            auc: metric(f[6], "auc")?,
            roc_gap: metric(f[7], "roc_gap")?,
            n_em_iters: f[8]
                .parse()
                .map_err(|_| Error::parse(path, line_no, format!("bad n_em_iters `{}`", f[8])))?,
            wall_ms: f[9]
                .parse()
                .map_err(|_| Error::parse(path, line_no, format!("bad wall_ms `{}`", f[9])))?,
        })
    }
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        Some((_, h)) => {
            return Err(Error::parse(
                path.display().to_string(),
                1,
                format!("unexpected header `{h}`"),
            ))
        }
        None => return Err(Error::parse(path.display().to_string(), 1, "empty file")),
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| ResultRow::from_csv(&path.display().to_string(), i + 1, l))
        .collect()
}

/// Result of one fitted and evaluated job.
struct JobOutcome {
    row: ResultRow,
    estep_violations: usize,
}

/// A fitted method's artifacts: test-split scores plus diagnostics.
pub struct FitArtifacts {
    pub scores: Vec<f64>,
    pub n_em_iters: usize,
    pub estep_violations: usize,
    pub propensity: Option<dcem_core::dcem::PropensityModel<f64>>,
}

/// Fit one method on pre-generated splits and score the test split.
pub fn fit_method(
    method: MethodSel,
    train: &Dataset<f64>,
    val: &Dataset<f64>,
    test: &Dataset<f64>,
    em: &EmConfig<f64>,
) -> Result<FitArtifacts> {
    match method {
        MethodSel::Dcem => {
            let fit = fit_dcem(train, val, em)?;
            Ok(FitArtifacts {
                scores: fit.network.predict(&test.features())?,
                n_em_iters: fit.n_iters,
                estep_violations: fit.estep_violations,
                propensity: fit.propensity,
            })
        }
        MethodSel::Baseline(m) => {
            let fit = fit_baseline(m, train, val, em)?;
            Ok(FitArtifacts {
                scores: fit.score(test)?,
                n_em_iters: fit.n_em_iters,
                estep_violations: fit.estep_violations,
                propensity: fit.propensity,
            })
        }
    }
}

/// Fit one method and evaluate on the test split, mapping degenerate
/// evaluations to the invalid marker.
pub fn fit_and_eval(
    method: MethodSel,
    train: &Dataset<f64>,
    val: &Dataset<f64>,
    test: &Dataset<f64>,
    em: &EmConfig<f64>,
) -> Result<(Option<f64>, Option<f64>, usize, usize)> {
    let art = fit_method(method, train, val, test, em)?;
    let labels = test.y_bool();
    let groups = test.groups();
    match evaluate(&art.scores, &labels, &groups) {
        Ok(rep) => Ok((
            Some(rep.auc),
            Some(rep.roc_gap),
            art.n_em_iters,
            art.estep_violations,
        )),
        Err(Error::SingleClassGroup { .. }) | Err(Error::SingleClassLabels) => {
            Ok((None, None, art.n_em_iters, art.estep_violations))
        }
        Err(e) => Err(e),
    }
}

/// Stream seeds for one job: `(data_seed, fit_seed)` derived from the
/// master seed, the setting tuple, the method, and the dataset seed.
pub fn job_seeds(
    master_seed: u64,
    setting: Setting,
    overlap_scale: f64,
    n: usize,
    seed: u64,
    method: MethodSel,
) -> (u64, u64) {
    let shash = setting.hash(overlap_scale, n);
    (
        mix(master_seed, &[shash, tag("data"), seed]),
        mix(master_seed, &[shash, tag(method.tag()), seed]),
    )
}

/// Summary of a finished sweep.
#[derive(Debug)]
pub struct SweepSummary {
    pub rows: Vec<ResultRow>,
    /// Jobs requested, including skipped ones.
    pub jobs_requested: usize,
    /// Jobs skipped because the setting was infeasible.
    pub jobs_skipped: usize,
    pub estep_violations: usize,
    pub out_path: PathBuf,
}

/// Run the sweep and write the result CSV atomically (temp file + rename),
/// rows sorted canonically by setting tuple, method, and seed.
pub fn run_sweep(cfg: &SweepConfig, out_path: &Path) -> Result<SweepSummary> {
    let settings = cfg.settings();
    let per_setting = cfg.methods.len() * cfg.seeds.len();
    let mut feasible = Vec::new();
    let mut skipped = 0usize;
    for s in settings.iter() {
        let sim = SimConfig {
            q_t: s.q_t,
            q_y: s.q_y,
            k: s.k,
            psi: s.psi,
            n: cfg.n,
            overlap_scale: cfg.overlap_scale,
            seed: 0,
        };
        match sim.validate() {
            Ok(()) => feasible.push(*s),
            Err(e) => {
                skipped += per_setting;
                eprintln!(
                    "skipping setting q_t={} q_y={} k={} psi={}: {e}",
                    s.q_t, s.q_y, s.k, s.psi
                );
            }
        }
    }

    let jobs: Vec<(Setting, u64)> = feasible
        .iter()
        .flat_map(|s| cfg.seeds.iter().map(|&seed| (*s, seed)))
        .collect();

    let outcomes: Vec<Result<Vec<JobOutcome>>> = jobs
        .par_iter()
        .map(|&(setting, seed)| run_setting(cfg, setting, seed))
        .collect();

    let mut rows = Vec::new();
    let mut violations = 0usize;
    for res in outcomes {
        for o in res? {
            violations += o.estep_violations;
            rows.push(o.row);
        }
    }
    rows.sort_by(|a, b| {
        (a.q_t, a.q_y, a.k, a.psi)
            .partial_cmp(&(b.q_t, b.q_y, b.k, b.psi))
            .unwrap()
            .then_with(|| a.method.cmp(&b.method))
            .then_with(|| a.seed.cmp(&b.seed))
    });

    write_rows_atomic(out_path, &rows)?;
    Ok(SweepSummary {
        jobs_requested: settings.len() * per_setting,
        jobs_skipped: skipped,
        rows,
        estep_violations: violations,
        out_path: out_path.to_path_buf(),
    })
}

fn run_setting(cfg: &SweepConfig, setting: Setting, seed: u64) -> Result<Vec<JobOutcome>> {
    let shash = setting.hash(cfg.overlap_scale, cfg.n);
    let data_seed = mix(cfg.master_seed, &[shash, tag("data"), seed]);
    let sim = SimConfig {
        q_t: setting.q_t,
        q_y: setting.q_y,
        k: setting.k,
        psi: setting.psi,
        n: cfg.n,
        overlap_scale: cfg.overlap_scale,
        seed: data_seed,
    };
    let params = solve_sim_params(&sim)?;
    let (train, val, test) = generate::<f64>(&sim, &params);

    let mut out = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let (_, fit_seed) = job_seeds(
            cfg.master_seed,
            setting,
            cfg.overlap_scale,
            cfg.n,
            seed,
            method,
        );
        let em = cfg.em.em_config(fit_seed);
        let start = Instant::now();
        let (auc, roc_gap, n_iters, viol) = fit_and_eval(method, &train, &val, &test, &em)?;
        out.push(JobOutcome {
            row: ResultRow {
                q_t: setting.q_t,
                q_y: setting.q_y,
                k: setting.k,
                psi: setting.psi,
                method: method.tag().to_string(),
                seed,
                auc,
                roc_gap,
                n_em_iters: n_iters,
                wall_ms: start.elapsed().as_millis(),
            },
            estep_violations: viol,
        });
    }
    Ok(out)
}

pub fn write_rows_atomic(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut body = String::with_capacity(rows.len() * 80 + 80);
    body.push_str(CSV_HEADER);
    body.push('\n');
    for r in rows {
        body.push_str(&r.to_csv());
        body.push('\n');
    }
    let tmp = path.with_extension("csv.tmp");
    {
        let mut f =
            std::fs::File::create(&tmp).map_err(|e| Error::io(tmp.display().to_string(), e))?;
        f.write_all(body.as_bytes())
            .map_err(|e| Error::io(tmp.display().to_string(), e))?;
        f.sync_all().ok();
    }
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_round_trips_through_csv() {
        let row = ResultRow {
            q_t: 2.0,
            q_y: 0.5,
            k: 1.0,
            psi: std::f64::consts::FRAC_PI_3,
            method: "dcem".into(),
            seed: 42,
            auc: Some(0.7891234),
            roc_gap: None,
            n_em_iters: 7,
            wall_ms: 1234,
        };
        let line = row.to_csv();
        let back = ResultRow::from_csv("t", 2, &line).unwrap();
        assert_eq!(back.method, "dcem");
        assert_eq!(back.auc, Some(0.789123));
        assert_eq!(back.roc_gap, None);
        assert_eq!(back.n_em_iters, 7);
        assert!((back.psi - row.psi).abs() < 1e-15);
    }

    #[test]
    fn setting_hash_is_order_sensitive_and_stable() {
        let a = Setting {
            q_t: 2.0,
            q_y: 0.5,
            k: 1.0,
            psi: 0.0,
        };
        let b = Setting {
            q_t: 0.5,
            q_y: 2.0,
            k: 1.0,
            psi: 0.0,
        };
        assert_eq!(a.hash(1.0, 100), a.hash(1.0, 100));
        assert_ne!(a.hash(1.0, 100), b.hash(1.0, 100));
        assert_ne!(a.hash(1.0, 100), a.hash(2.0, 100));
    }
}
