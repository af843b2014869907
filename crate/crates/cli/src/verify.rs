//! Numerical verification of the closed-form M-step analysis.
//!
//! Every check is exact about its tolerance; the table is also exercised by
//! the acceptance suite.

use dcem_core::theory::{
    causal_reg_strength, discriminant, grid_oracle, lemma_suite, tested_grid_oracle,
    y_opt_closed_form, LemmaGrid,
};
use dcem_core::{Error, Result};
use rayon::prelude::*;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct VerifyCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn spec_grid() -> (Vec<f64>, Vec<f64>) {
    let qs: Vec<f64> = (0..20).map(|i| i as f64 * 0.05).collect();
    let ts: Vec<f64> = (1..=20).map(|j| j as f64 * 0.05).collect();
    (qs, ts)
}

/// Closed form vs brute-force grid oracle at resolution `1e-5`, agreement
/// within twice the resolution.
pub fn check_closed_form_vs_oracle() -> VerifyCheck {
    let (qs, ts) = spec_grid();
    let res = 1e-5;
    let worst = qs
        .par_iter()
        .map(|&q| {
            ts.iter()
                .map(|&t| (y_opt_closed_form(q, t) - grid_oracle(q, t, res)).abs())
                .fold(0.0f64, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    VerifyCheck {
        name: "closed_form_vs_grid_oracle",
        passed: worst <= 2.0 * res,
        detail: format!("max |closed - oracle| = {worst:.2e} (tolerance {:.0e})", 2.0 * res),
    }
}

/// Regularization strength strictly increases in `t_hat` for `0 < q < 1`;
/// identically zero at `q = 0`.
pub fn check_strength_monotonicity() -> VerifyCheck {
    let (qs, ts) = spec_grid();
    let mut passed = true;
    let mut detail = String::from("strictly increasing at every q > 0; zero at q = 0");
    'outer: for &q in &qs {
        if q == 0.0 {
            for &t in &ts {
                if causal_reg_strength(q, t) != 0.0 {
                    passed = false;
                    detail = format!("nonzero strength at q=0, t_hat={t}");
                    break 'outer;
                }
            }
            continue;
        }
        let mut prev = f64::NEG_INFINITY;
        for &t in &ts {
            let r = causal_reg_strength(q, t);
            if r <= prev + 1e-10 {
                passed = false;
                detail = format!("no strict increase at q={q}, t_hat={t}: {r} vs {prev}");
                break 'outer;
            }
            prev = r;
        }
    }
    VerifyCheck {
        name: "strength_increases_in_t_hat",
        passed,
        detail,
    }
}

/// As `t_hat -> 0+` the optimum returns to the pseudo-label.
pub fn check_vanishing_propensity_limit() -> VerifyCheck {
    let (qs, _) = spec_grid();
    let worst = qs
        .iter()
        .map(|&q| (y_opt_closed_form(q, 1e-6) - q).abs())
        .fold(0.0f64, f64::max);
    VerifyCheck {
        name: "limit_recovers_pseudo_label",
        passed: worst <= 1e-3,
        detail: format!("max |y_opt(q, 1e-6) - q| = {worst:.2e}"),
    }
}

/// Discriminant non-negative on a 200x200 grid, touching zero at
/// `(q, t_hat) = (1, 1/2)`.
pub fn check_discriminant() -> VerifyCheck {
    let mut min_d = f64::INFINITY;
    for i in 0..200 {
        let q = i as f64 / 199.0;
        for j in 0..200 {
            let t = (j + 1) as f64 / 200.0;
            min_d = min_d.min(discriminant(q, t));
        }
    }
    let touch = discriminant(1.0f64, 0.5).abs();
    VerifyCheck {
        name: "discriminant_nonnegative_touches_zero",
        passed: min_d >= -1e-12 && touch <= 1e-12,
        detail: format!("min D = {min_d:.2e}, |D(1, 1/2)| = {touch:.2e}"),
    }
}

/// For tested examples the objective's grid minimizer equals the label.
pub fn check_tested_minimizer() -> VerifyCheck {
    let res = 1e-5;
    let mut worst = 0.0f64;
    for &y in &[0.0f64, 1.0] {
        for &t in &[0.25f64, 0.5, 1.0] {
            worst = worst.max((tested_grid_oracle(y, t, res) - y).abs());
        }
    }
    VerifyCheck {
        name: "tested_objective_minimized_at_label",
        passed: worst <= res,
        detail: format!("max |argmin - y| = {worst:.2e}"),
    }
}

/// Worked closed-form value `y_opt(1/2, 1) = 1/3`.
pub fn check_worked_value() -> VerifyCheck {
    let err = (y_opt_closed_form(0.5f64, 1.0) - 1.0 / 3.0).abs();
    VerifyCheck {
        name: "worked_value_one_third",
        passed: err <= 1e-12,
        detail: format!("|y_opt(0.5, 1) - 1/3| = {err:.2e}"),
    }
}

/// The full verification table: the six closed-form checks plus the
/// supporting lemma suite.
pub fn verify_all() -> Vec<VerifyCheck> {
    let mut checks = vec![
        check_closed_form_vs_oracle(),
        check_strength_monotonicity(),
        check_vanishing_propensity_limit(),
        check_discriminant(),
        check_tested_minimizer(),
        check_worked_value(),
    ];
    for c in lemma_suite(LemmaGrid { n_q: 200, n_t: 200 }).checks {
        checks.push(VerifyCheck {
            name: match c.name {
                "discriminant_nonnegative" => "lemma_discriminant_nonnegative",
                "plus_branch_out_of_range" => "lemma_plus_branch_out_of_range",
                "minus_branch_in_unit_interval" => "lemma_minus_branch_in_unit_interval",
                "derivative_sign_relation" => "lemma_derivative_sign_relation",
                "slope_bounded_vs_ipw" => "lemma_slope_bounded_vs_ipw",
                other => other,
            },
            passed: c.passed,
            detail: c.detail,
        });
    }
    checks
}

/// Contour export `(q, t_hat, y_opt, r)` for plotting the optimum surface.
pub fn write_contour_csv(path: &Path) -> Result<()> {
    let points = dcem_core::theory::contour_grid::<f64>(101, 100);
    let mut body = String::from("q,t_hat,y_opt,r\n");
    for p in points {
        body.push_str(&format!(
            "{:.6},{:.6},{:.6},{:.6}\n",
            p.q, p.t_hat, p.y_opt, p.r
        ));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    f.write_all(body.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_checks_pass() {
        assert!(check_vanishing_propensity_limit().passed);
        assert!(check_discriminant().passed);
        assert!(check_worked_value().passed);
        assert!(check_strength_monotonicity().passed);
    }
}
