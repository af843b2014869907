//! Discriminative and bias-mitigation metrics.
//!
//! AUC follows the Mann-Whitney convention (ties count one half). The ROC
//! gap is the absolute area between the per-group ROC curves, integrating
//! the piecewise-linear curves over the union of their false-positive-rate
//! breakpoints; it is zero exactly when both groups obtain the same
//! true-positive rate at every false-positive rate.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// ROC curve as an ordered list of `(fpr, tpr)` vertices from `(0, 0)` to
/// `(1, 1)`; ties are grouped at a single threshold, giving a diagonal
/// segment rather than a staircase step.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve<S> {
    pub points: Vec<(S, S)>,
}

/// Per-model evaluation summary.
#[derive(Debug, Clone)]
pub struct EvalReport<S> {
    pub auc: S,
    pub roc_gap: S,
    /// `(positives, negatives)` for groups 0 and 1.
    pub group_counts: [(usize, usize); 2],
}

fn class_counts<S: Scalar>(labels: &[bool]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l).count();
    (pos, labels.len() - pos)
}

fn sorted_by_score<S: Scalar>(scores: &[S], labels: &[bool]) -> Vec<(S, bool)> {
    let mut pairs: Vec<(S, bool)> = scores.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("scores must not be NaN"));
    pairs
}

/// Area under the ROC curve via the Mann-Whitney statistic:
/// `P(score+ > score-) + P(tie) / 2`.
pub fn auc<S: Scalar>(scores: &[S], labels: &[bool]) -> Result<S> {
    assert_eq!(scores.len(), labels.len());
    let (pos, neg) = class_counts::<S>(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassLabels);
    }
    let pairs = sorted_by_score(scores, labels);
    let mut neg_below = 0usize;
    let mut concordant = 0f64;
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i;
        let mut tie_pos = 0usize;
        let mut tie_neg = 0usize;
        while j < pairs.len() && pairs[j].0 == pairs[i].0 {
            if pairs[j].1 {
                tie_pos += 1;
            } else {
                tie_neg += 1;
            }
            j += 1;
        }
        concordant += tie_pos as f64 * neg_below as f64 + 0.5 * tie_pos as f64 * tie_neg as f64;
        neg_below += tie_neg;
        i = j;
    }
    Ok(S::from_f64_lossy(concordant / (pos as f64 * neg as f64)))
}

/// ROC curve over unique score thresholds, descending.
pub fn roc_curve<S: Scalar>(scores: &[S], labels: &[bool]) -> Result<RocCurve<S>> {
    assert_eq!(scores.len(), labels.len());
    let (pos, neg) = class_counts::<S>(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassLabels);
    }
    let mut pairs = sorted_by_score(scores, labels);
    pairs.reverse();
    let mut points = Vec::with_capacity(pairs.len() + 1);
    points.push((S::zero(), S::zero()));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i;
        while j < pairs.len() && pairs[j].0 == pairs[i].0 {
            if pairs[j].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        points.push((
            S::from_f64_lossy(fp as f64 / neg as f64),
            S::from_f64_lossy(tp as f64 / pos as f64),
        ));
        i = j;
    }
    Ok(RocCurve { points })
}

impl<S: Scalar> RocCurve<S> {
    /// Trapezoid area under the curve.
    pub fn area(&self) -> S {
        let half = S::from_f64_lossy(0.5);
        let mut acc = S::zero();
        for w in self.points.windows(2) {
            let (x0, y0) = w[0];
            let (x1, y1) = w[1];
            acc += (x1 - x0) * (y0 + y1) * half;
        }
        acc
    }

    /// Collapse vertical runs into unique-fpr breakpoints with the curve
    /// value entering (from the left) and exiting (to the right) each one.
    fn breakpoints(&self) -> Vec<(S, S, S)> {
        let mut out: Vec<(S, S, S)> = Vec::new();
        for &(f, t) in &self.points {
            match out.last_mut() {
                Some(last) if last.0 == f => last.2 = t,
                _ => out.push((f, t, t)),
            }
        }
        out
    }
}

/// Absolute area between the per-group ROC curves.
///
/// Both curves are treated as piecewise-linear over the union of their fpr
/// breakpoints; on intervals where the difference changes sign the
/// integral is split at the crossing, so the result is exact for the
/// polylines.
pub fn roc_gap<S: Scalar>(scores: &[S], labels: &[bool], groups: &[bool]) -> Result<S> {
    assert_eq!(scores.len(), labels.len());
    assert_eq!(scores.len(), groups.len());
    let mut parts: [(Vec<S>, Vec<bool>); 2] = [(Vec::new(), Vec::new()), (Vec::new(), Vec::new())];
    for i in 0..scores.len() {
        let g = usize::from(groups[i]);
        parts[g].0.push(scores[i]);
        parts[g].1.push(labels[i]);
    }
    for (g, (s, l)) in parts.iter().enumerate() {
        let (pos, neg) = class_counts::<S>(l);
        if s.is_empty() || pos == 0 || neg == 0 {
            return Err(Error::SingleClassGroup { group: g as u8 });
        }
    }
    let curve0 = roc_curve(&parts[0].0, &parts[0].1)?;
    let curve1 = roc_curve(&parts[1].0, &parts[1].1)?;
    Ok(area_between(&curve0, &curve1))
}

fn interp<S: Scalar>(bp: &[(S, S, S)], seg: &mut usize, f: S, entering: bool) -> S {
    // advance to the segment [bp[seg].0, bp[seg+1].0] containing f
    while *seg + 1 < bp.len() && bp[*seg + 1].0 < f {
        *seg += 1;
    }
    if entering && *seg + 1 < bp.len() && bp[*seg + 1].0 == f {
        return bp[*seg + 1].1;
    }
    let (f0, _, exit0) = bp[*seg];
    if f == f0 {
        return exit0;
    }
    let (f1, enter1, _) = bp[*seg + 1];
    exit0 + (enter1 - exit0) * (f - f0) / (f1 - f0)
}

/// Exact integral of `|tpr_a(f) - tpr_b(f)|` over `[0, 1]`.
pub fn area_between<S: Scalar>(a: &RocCurve<S>, b: &RocCurve<S>) -> S {
    let bpa = a.breakpoints();
    let bpb = b.breakpoints();
    let mut grid: Vec<S> = bpa.iter().map(|p| p.0).chain(bpb.iter().map(|p| p.0)).collect();
    grid.sort_by(|x, y| x.partial_cmp(y).unwrap());
    grid.dedup();
    let half = S::from_f64_lossy(0.5);
    let (mut seg_a, mut seg_b) = (0usize, 0usize);
    let mut area = S::zero();
    for w in grid.windows(2) {
        let (u, v) = (w[0], w[1]);
        if v <= u {
            continue;
        }
        let mut sa = seg_a;
        let mut sb = seg_b;
        let du = interp(&bpa, &mut sa, u, false) - interp(&bpb, &mut sb, u, false);
        let dv = interp(&bpa, &mut sa, v, true) - interp(&bpb, &mut sb, v, true);
        seg_a = sa;
        seg_b = sb;
        if du * dv >= S::zero() {
            area += (v - u) * (du.abs() + dv.abs()) * half;
        } else {
            let cross = u + (v - u) * du / (du - dv);
            area += (cross - u) * du.abs() * half + (v - cross) * dv.abs() * half;
        }
    }
    area
}

/// Order statistics over per-setting results.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate<S> {
    pub median: S,
    pub min: S,
    pub max: S,
    pub range: S,
}

/// Median (midpoint of the middle pair for even lengths), min, max, range.
pub fn aggregate<S: Scalar>(values: &[S]) -> Result<Aggregate<S>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("aggregate over no values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) * S::from_f64_lossy(0.5)
    };
    Ok(Aggregate {
        median,
        min: sorted[0],
        max: sorted[n - 1],
        range: sorted[n - 1] - sorted[0],
    })
}

/// Binned calibration pairs `(mean predicted, empirical rate, count)` over
/// equal-width probability bins; bins with no members are omitted.
pub fn calibration_bins<S: Scalar>(preds: &[S], outcomes: &[bool], n_bins: usize) -> Vec<(S, S, usize)> {
    assert_eq!(preds.len(), outcomes.len());
    let mut sums = vec![(S::zero(), 0usize, 0usize); n_bins];
    for (p, o) in preds.iter().zip(outcomes.iter()) {
        let idx = (p.to_f64().unwrap() * n_bins as f64)
            .floor()
            .clamp(0.0, n_bins as f64 - 1.0) as usize;
        sums[idx].0 += *p;
        sums[idx].1 += usize::from(*o);
        sums[idx].2 += 1;
    }
    sums.into_iter()
        .filter(|(_, _, n)| *n > 0)
        .map(|(s, pos, n)| {
            (
                s / S::from_usize(n).unwrap(),
                S::from_usize(pos).unwrap() / S::from_usize(n).unwrap(),
                n,
            )
        })
        .collect()
}

/// Full evaluation: AUC plus ROC gap and per-group class counts.
pub fn evaluate<S: Scalar>(scores: &[S], labels: &[bool], groups: &[bool]) -> Result<EvalReport<S>> {
    let auc_val = auc(scores, labels)?;
    let gap = roc_gap(scores, labels, groups)?;
    let mut group_counts = [(0usize, 0usize); 2];
    for i in 0..labels.len() {
        let g = usize::from(groups[i]);
        if labels[i] {
            group_counts[g].0 += 1;
        } else {
            group_counts[g].1 += 1;
        }
    }
    Ok(EvalReport {
        auc: auc_val,
        roc_gap: gap,
        group_counts,
    })
}
