//! Closed-form analysis of the per-example M-step objective.
//!
//! For an untested example with pseudo-label `q` and testing propensity
//! `t_hat`, the M-step minimizes
//!
//! ```text
//! J(y_hat) = bce(q, y_hat) - q * ln(1 - y_hat * t_hat)
//! ```
//!
//! over `y_hat` in `[0, 1]`. Setting the derivative to zero gives a
//! quadratic in `y_hat`; the in-range root is
//!
//! ```text
//! y_opt = (B - sqrt(D)) / (2 * t_hat * (1 + q)),
//! B = 2 q t_hat + 1,   D = B^2 - 4 q t_hat (q + 1).
//! ```
//!
//! The distance `r = q - y_opt` is the causal-regularization strength: how
//! far the regularizer pulls the optimum below the pseudo-label. It is zero
//! as `t_hat -> 0+` and grows with `t_hat`, so untested examples that look
//! highly testable get pushed down the hardest. [`grid_oracle`] minimizes
//! the same objective by brute force and is used to validate the closed
//! form, and [`lemma_suite`] checks the supporting algebraic facts
//! numerically.

use crate::nnet::bce;
use crate::scalar::{clamp_prob, Scalar};
use rayon::prelude::*;

/// One evaluated point of the per-example M-step analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptPoint<S> {
    /// Pseudo-label in `[0, 1]`.
    pub q: S,
    /// Testing propensity in `(0, 1]`.
    pub t_hat: S,
    /// Minimizer of the per-example objective.
    pub y_opt: S,
    /// Regularization strength `q - y_opt`.
    pub r: S,
}

/// Discriminant `D = B^2 - 4 q t_hat (q + 1)` of the optimality quadratic.
pub fn discriminant<S: Scalar>(q: S, t_hat: S) -> S {
    let b = S::from_f64_lossy(2.0) * q * t_hat + S::one();
    b * b - S::from_f64_lossy(4.0) * q * t_hat * (q + S::one())
}

/// Both quadratic roots `(minus, plus)`; the minus branch is the minimizer.
fn quadratic_roots<S: Scalar>(q: S, t_hat: S) -> (S, S) {
    let two = S::from_f64_lossy(2.0);
    let b = two * q * t_hat + S::one();
    // D >= 0 analytically; max() absorbs ~1e-16 negatives from cancellation
    // near the touch point (q = 1, t_hat = 1/2).
    let sqrt_d = discriminant(q, t_hat).max(S::zero()).sqrt();
    let denom = two * t_hat * (S::one() + q);
    ((b - sqrt_d) / denom, (b + sqrt_d) / denom)
}

/// Minimizer of the per-example M-step objective over `y_hat` in `[0, 1]`.
///
/// `t_hat = 0` makes the regularizer constant; the minimizer is `q` by
/// continuity.
pub fn y_opt_closed_form<S: Scalar>(q: S, t_hat: S) -> S {
    if t_hat <= S::zero() {
        return q;
    }
    quadratic_roots(q, t_hat).0
}

/// Causal-regularization strength `R = q - y_opt(q, t_hat)`.
///
/// The absolute value in the definition resolves to this sign because the
/// minimizer never exceeds the pseudo-label.
pub fn causal_reg_strength<S: Scalar>(q: S, t_hat: S) -> S {
    q - y_opt_closed_form(q, t_hat)
}

/// Per-example objective for an untested example: `bce(q, y) - q ln(1 - y t)`.
///
/// Logs are guarded by the shared probability clamp.
pub fn untested_objective<S: Scalar>(q: S, y_hat: S, t_hat: S) -> S {
    let reg = -(q * (S::one() - clamp_prob(y_hat * t_hat)).ln());
    bce(q, clamp_prob(y_hat), S::one()) + reg
}

/// Brute-force minimizer of [`untested_objective`] over the grid
/// `{0, res, 2 res, ..., 1}`.
///
/// Independent of the closed form; used as its oracle.
pub fn grid_oracle<S: Scalar>(q: S, t_hat: S, resolution: S) -> S {
    debug_assert!(resolution <= S::from_f64_lossy(1e-4));
    let steps = (S::one() / resolution).round().to_usize().unwrap_or(10_000);
    let mut best_y = S::zero();
    let mut best_val = S::infinity();
    for j in 0..=steps {
        let y = (resolution * S::from_usize(j).unwrap()).min(S::one());
        let v = untested_objective(q, y, t_hat);
        if v < best_val {
            best_val = v;
            best_y = y;
        }
    }
    best_y
}

/// Per-example objective for a tested example with label `y` in `{0, 1}`:
/// `bce(y, y_hat) + y * bce(y, y_hat * t_hat)`.
pub fn tested_objective<S: Scalar>(y: S, y_hat: S, t_hat: S) -> S {
    bce(y, clamp_prob(y_hat), S::one()) + y * bce(y, clamp_prob(y_hat * t_hat), S::one())
}

/// Brute-force minimizer of [`tested_objective`] over the same grid.
pub fn tested_grid_oracle<S: Scalar>(y: S, t_hat: S, resolution: S) -> S {
    let steps = (S::one() / resolution).round().to_usize().unwrap_or(10_000);
    let mut best_y = S::zero();
    let mut best_val = S::infinity();
    for j in 0..=steps {
        let yh = (resolution * S::from_usize(j).unwrap()).min(S::one());
        let v = tested_objective(y, yh, t_hat);
        if v < best_val {
            best_val = v;
            best_y = yh;
        }
    }
    best_y
}

/// Evaluate `(y_opt, r)` over a regular grid, for contour export.
pub fn contour_grid<S: Scalar>(n_q: usize, n_t: usize) -> Vec<OptPoint<S>> {
    let mut out = Vec::with_capacity(n_q * n_t);
    for i in 0..n_q {
        let q = S::from_usize(i).unwrap() / S::from_usize(n_q - 1).unwrap();
        for j in 1..=n_t {
            let t_hat = S::from_usize(j).unwrap() / S::from_usize(n_t).unwrap();
            let y_opt = y_opt_closed_form(q, t_hat);
            out.push(OptPoint {
                q,
                t_hat,
                y_opt,
                r: q - y_opt,
            });
        }
    }
    out
}

/// Outcome of one named check of [`lemma_suite`].
#[derive(Debug, Clone)]
pub struct LemmaCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Report from the numerical lemma suite.
#[derive(Debug, Clone)]
pub struct LemmaReport {
    pub checks: Vec<LemmaCheck>,
}

impl LemmaReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Grid specification for [`lemma_suite`]: `n_q + 1` values of `q` spanning
/// `[0, 1]` and `n_t` values of `t_hat` spanning `(0, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct LemmaGrid {
    pub n_q: usize,
    pub n_t: usize,
}

impl Default for LemmaGrid {
    fn default() -> Self {
        LemmaGrid { n_q: 100, n_t: 100 }
    }
}

const LEMMA_TOL: f64 = 1e-12;

/// Numerically verify the algebraic facts behind the closed form.
///
/// Checks, on the requested grid:
/// 1. the discriminant `D` is non-negative (to `1e-12`) and touches zero at
///    `(q, t_hat) = (1, 1/2)`;
/// 2. the plus branch of the quadratic is `>= 1`, so it is never the
///    in-range minimizer;
/// 3. the minus branch lies in `[0, 1]`;
/// 4. the sign of a central finite difference of `y_opt` in `t_hat` matches
///    `sign(1 - 2 t_hat q^2 - sqrt(D))` for `q < 1`, and `y_opt` is
///    non-increasing in `t_hat` at `q = 1`;
/// 5. the finite-difference slope of `y_opt` in `t_hat` stays bounded while
///    the inverse-propensity term `1 / t_hat` has slope growing without
///    bound as `t_hat -> 0+`.
pub fn lemma_suite(grid: LemmaGrid) -> LemmaReport {
    let mut checks = Vec::new();
    let qs: Vec<f64> = (0..=grid.n_q).map(|i| i as f64 / grid.n_q as f64).collect();
    let ts: Vec<f64> = (1..=grid.n_t)
        .map(|j| j as f64 / grid.n_t as f64)
        .collect();

    // 1. discriminant non-negative, exact touch at (1, 1/2)
    let min_d = qs
        .par_iter()
        .map(|&q| {
            ts.iter()
                .map(|&t| discriminant(q, t))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min);
    let touch = discriminant(1.0f64, 0.5);
    checks.push(LemmaCheck {
        name: "discriminant_nonnegative",
        passed: min_d >= -LEMMA_TOL && touch.abs() <= LEMMA_TOL,
        detail: format!("min D = {min_d:.3e}, D(1, 1/2) = {touch:.3e}"),
    });

    // 2. plus branch >= 1
    let min_plus = qs
        .iter()
        .flat_map(|&q| ts.iter().map(move |&t| quadratic_roots(q, t).1))
        .fold(f64::INFINITY, f64::min);
    checks.push(LemmaCheck {
        name: "plus_branch_out_of_range",
        passed: min_plus >= 1.0 - LEMMA_TOL,
        detail: format!("min plus-branch = {min_plus:.12}"),
    });

    // 3. minus branch in [0, 1]
    let (min_minus, max_minus) = qs
        .iter()
        .flat_map(|&q| ts.iter().map(move |&t| quadratic_roots(q, t).0))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    checks.push(LemmaCheck {
        name: "minus_branch_in_unit_interval",
        passed: min_minus >= -LEMMA_TOL && max_minus <= 1.0 + LEMMA_TOL,
        detail: format!("minus-branch range [{min_minus:.12}, {max_minus:.12}]"),
    });

    // 4. sign relation for q < 1; non-increase at q = 1. The finite
    // difference needs interior t_hat, so endpoints are skipped.
    let h = 1e-7f64;
    let mut sign_ok = true;
    let mut sign_detail = String::from("all signs matched");
    'outer: for &q in qs.iter().filter(|&&q| q < 1.0) {
        for &t in ts.iter().filter(|&&t| t > 2.0 * h && t < 1.0 - 2.0 * h) {
            let fd = (y_opt_closed_form(q, t + h) - y_opt_closed_form(q, t - h)) / (2.0 * h);
            let expr = 1.0 - 2.0 * t * q * q - discriminant(q, t).max(0.0).sqrt();
            let fd_zero = fd.abs() < 1e-9;
            let expr_zero = expr.abs() < 1e-9;
            let matched = (fd_zero && expr_zero) || (fd.signum() == expr.signum());
            if !matched {
                sign_ok = false;
                sign_detail = format!("mismatch at q={q}, t_hat={t}: fd={fd:.3e}, expr={expr:.3e}");
                break 'outer;
            }
        }
    }
    let mut corollary_ok = true;
    for w in ts.windows(2) {
        let lo = y_opt_closed_form(1.0f64, w[0]);
        let hi = y_opt_closed_form(1.0f64, w[1]);
        if hi > lo + LEMMA_TOL {
            corollary_ok = false;
        }
    }
    checks.push(LemmaCheck {
        name: "derivative_sign_relation",
        passed: sign_ok && corollary_ok,
        detail: if corollary_ok {
            sign_detail
        } else {
            String::from("y_opt increased in t_hat at q = 1")
        },
    });

    // 5. bounded slope for the M-step optimum vs unbounded 1/t_hat slope.
    let max_slope = qs
        .iter()
        .filter(|&&q| q <= 0.95)
        .flat_map(|&q| {
            ts.iter()
                .filter(|&&t| t >= 0.05 && t < 1.0 - 2.0 * h)
                .map(move |&t| {
                    ((y_opt_closed_form(q, t + h) - y_opt_closed_form(q, t - h)) / (2.0 * h)).abs()
                })
        })
        .fold(0.0f64, f64::max);
    let ipw_slopes: Vec<f64> = [0.1f64, 0.01, 0.001]
        .iter()
        .map(|&t| {
            let f = |x: f64| 1.0 / x;
            ((f(t + h) - f(t - h)) / (2.0 * h)).abs()
        })
        .collect();
    let bounded = max_slope <= 5.0;
    let diverging = ipw_slopes[2] > ipw_slopes[1]
        && ipw_slopes[1] > ipw_slopes[0]
        && ipw_slopes[0] > 20.0 * max_slope;
    checks.push(LemmaCheck {
        name: "slope_bounded_vs_ipw",
        passed: bounded && diverging,
        detail: format!(
            "max |d y_opt / d t_hat| = {max_slope:.4}; |d(1/t)/dt| at t=0.1,0.01,0.001 = \
             {:.1e}, {:.1e}, {:.1e}",
            ipw_slopes[0], ipw_slopes[1], ipw_slopes[2]
        ),
    });

    LemmaReport { checks }
}
