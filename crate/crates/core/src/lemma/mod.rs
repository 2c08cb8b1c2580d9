//! Brute-force oracles and property checks for the supporting lemmas:
//! exact number-theoretic censuses, analytic inequalities evaluated on grids,
//! and seeded Monte Carlo probes with `3 sigma` slack.

mod analytic;
mod monte_carlo;
mod number;
mod suite;

pub use analytic::{cos_taylor_check, dirichlet_eigenvalue, dirichlet_rate_check, exit_interval_check, killed_survival,
    lclt_scan, tail_ratio_check, TailModel};
pub use monte_carlo::{
    eigenvalue_tail_probe, modified_l2_estimate, modified_l2_probe, set_probability_check, ModifiedL2Estimate,
    SetProbabilityVariant,
};
pub use number::{
    difference_pmf, divisibility_check, gcd_expectation_estimate, gcd_expectation_probe, level_set_census,
    level_set_count_check, s_star, unimodality_check, vz_uniform_check, GcdEstimate, GCD_CONSTANT,
};
pub use suite::{run_suite, SuiteOptions, SuiteOutcome, CHECK_NAMES};

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    /// Where the largest violation occurred.
    pub worst_case: String,
    /// Largest `measured - bound` over the check; non-positive when the bound holds outright.
    pub max_violation: f64,
    pub tolerance: f64,
}

impl CheckReport {
    pub fn new(name: &str, worst_case: String, max_violation: f64, tolerance: f64) -> Self {
        CheckReport {
            name: name.to_string(),
            passed: max_violation <= tolerance,
            worst_case,
            max_violation,
            tolerance,
        }
    }

    /// Re-judges the same measurement under a different tolerance.
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self.passed = self.max_violation <= tolerance;
        self
    }
}

/// Running maximum of a violation together with a description of where it happened.
#[derive(Debug, Clone)]
struct Worst {
    value: f64,
    at: String,
}

impl Worst {
    fn new() -> Self {
        Worst { value: f64::NEG_INFINITY, at: "none".into() }
    }

    fn update(&mut self, value: f64, at: impl FnOnce() -> String) {
        // NaN must surface as a failure rather than vanish in a comparison
        if value.is_nan() || value > self.value {
            self.value = if value.is_nan() { f64::INFINITY } else { value };
            self.at = at();
        }
    }

    fn report(self, name: &str, tolerance: f64) -> CheckReport {
        CheckReport::new(name, self.at, self.value, tolerance)
    }
}

/// Distance of `x` outside `[lo, hi]`, zero inside.
fn band_violation(x: f64, lo: f64, hi: f64) -> f64 {
    if x.is_nan() {
        f64::INFINITY
    } else {
        (lo - x).max(x - hi).max(0.0)
    }
}
