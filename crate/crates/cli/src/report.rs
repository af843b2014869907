//! Aggregate sweep results per method, plus tradeoff histogram bins.

use crate::sweep::ResultRow;
use dcem_core::metrics::{aggregate, Aggregate};
use dcem_core::{Error, Result};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// AUC band edges for the tradeoff report; bands are
/// `(-inf, .775], (.775, .825], (.825, .875], (.875, inf)`.
pub const AUC_BAND_EDGES: [f64; 3] = [0.775, 0.825, 0.875];

pub fn auc_band(auc: f64) -> usize {
    AUC_BAND_EDGES.iter().take_while(|&&e| auc > e).count()
}

pub fn band_label(idx: usize) -> &'static str {
    match idx {
        0 => "(-inf,0.775]",
        1 => "(0.775,0.825]",
        2 => "(0.825,0.875]",
        _ => "(0.875,inf)",
    }
}

/// Per-method aggregate line.
#[derive(Debug, Clone)]
pub struct MethodAggregate {
    pub method: String,
    pub n: usize,
    pub invalid: usize,
    pub auc: Aggregate<f64>,
    pub roc_gap: Aggregate<f64>,
}

/// One tradeoff bin: ROC gaps of a method's rows whose AUC falls in a band.
#[derive(Debug, Clone)]
pub struct TradeoffBin {
    pub method: String,
    pub band: usize,
    pub n: usize,
    pub mean_roc_gap: f64,
    pub min_roc_gap: f64,
    pub max_roc_gap: f64,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub aggregates: Vec<MethodAggregate>,
    pub bins: Vec<TradeoffBin>,
}

pub fn build_report(rows: &[ResultRow]) -> Result<Report> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("no result rows"));
    }
    let mut by_method: BTreeMap<&str, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        by_method.entry(&r.method).or_default().push(r);
    }
    let mut aggregates = Vec::new();
    let mut bins = Vec::new();
    for (method, rs) in &by_method {
        let valid: Vec<&&ResultRow> = rs
            .iter()
            .filter(|r| r.auc.is_some() && r.roc_gap.is_some())
            .collect();
        if valid.is_empty() {
            return Err(Error::EmptyInput("method has no valid rows"));
        }
        let aucs: Vec<f64> = valid.iter().map(|r| r.auc.unwrap()).collect();
        let gaps: Vec<f64> = valid.iter().map(|r| r.roc_gap.unwrap()).collect();
        aggregates.push(MethodAggregate {
            method: method.to_string(),
            n: rs.len(),
            invalid: rs.len() - valid.len(),
            auc: aggregate(&aucs)?,
            roc_gap: aggregate(&gaps)?,
        });
        let mut banded: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for r in &valid {
            banded
                .entry(auc_band(r.auc.unwrap()))
                .or_default()
                .push(r.roc_gap.unwrap());
        }
        for (band, gaps) in banded {
            let agg = aggregate(&gaps)?;
            bins.push(TradeoffBin {
                method: method.to_string(),
                band,
                n: gaps.len(),
                mean_roc_gap: gaps.iter().sum::<f64>() / gaps.len() as f64,
                min_roc_gap: agg.min,
                max_roc_gap: agg.max,
            });
        }
    }
    Ok(Report { aggregates, bins })
}

impl Report {
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<18} {:>4} {:>8} {:>8} {:>8} {:>8}  {:>8} {:>8} {:>8} {:>8}\n",
            "method", "n", "auc_med", "auc_min", "auc_max", "auc_rng", "gap_med", "gap_max",
            "gap_min", "gap_rng"
        ));
        for a in &self.aggregates {
            out.push_str(&format!(
                "{:<18} {:>4} {:>8.3} {:>8.3} {:>8.3} {:>8.3}  {:>8.3} {:>8.3} {:>8.3} {:>8.3}\n",
                a.method,
                a.n,
                a.auc.median,
                a.auc.min,
                a.auc.max,
                a.auc.range,
                a.roc_gap.median,
                a.roc_gap.max,
                a.roc_gap.min,
                a.roc_gap.range
            ));
        }
        out.push('\n');
        out.push_str(&format!(
            "{:<18} {:<14} {:>4} {:>10} {:>10} {:>10}\n",
            "method", "auc_band", "n", "gap_mean", "gap_min", "gap_max"
        ));
        for b in &self.bins {
            out.push_str(&format!(
                "{:<18} {:<14} {:>4} {:>10.3} {:>10.3} {:>10.3}\n",
                b.method,
                band_label(b.band),
                b.n,
                b.mean_roc_gap,
                b.min_roc_gap,
                b.max_roc_gap
            ));
        }
        out
    }

    /// Write `path` (per-method aggregates) and a sibling
    /// `<stem>.tradeoff.csv` (AUC-banded ROC gap bins).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut body = String::from(
            "method,n,invalid,auc_median,auc_min,auc_max,auc_range,roc_gap_median,roc_gap_min,roc_gap_max,roc_gap_range\n",
        );
        for a in &self.aggregates {
            body.push_str(&format!(
                "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                a.method,
                a.n,
                a.invalid,
                a.auc.median,
                a.auc.min,
                a.auc.max,
                a.auc.range,
                a.roc_gap.median,
                a.roc_gap.min,
                a.roc_gap.max,
                a.roc_gap.range
            ));
        }
        write_text(path, &body)?;
        let mut bins = String::from("method,auc_band,n,roc_gap_mean,roc_gap_min,roc_gap_max\n");
        for b in &self.bins {
            bins.push_str(&format!(
                "{},{},{},{:.6},{:.6},{:.6}\n",
                b.method,
                band_label(b.band),
                b.n,
                b.mean_roc_gap,
                b.min_roc_gap,
                b.max_roc_gap
            ));
        }
        let sibling = path.with_extension("tradeoff.csv");
        write_text(&sibling, &bins)
    }
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    f.write_all(body.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))
}
