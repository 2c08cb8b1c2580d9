//! The default verification suite: every check with its recorded parameters and seed.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::analytic::{cos_taylor_check, dirichlet_eigenvalue, dirichlet_rate_check, exit_interval_check, lclt_scan,
    tail_ratio_check, TailModel};
use super::monte_carlo::{eigenvalue_tail_probe, modified_l2_probe, set_probability_check, SetProbabilityVariant};
use super::number::{
    divisibility_check, gcd_expectation_probe, level_set_census, level_set_count_check, unimodality_check,
    vz_uniform_check,
};
use super::CheckReport;
use crate::error::{Error, Result};
use crate::group::GroupSpec;
use crate::Model;

pub const CHECK_NAMES: [&str; 13] = [
    "vz_uniform",
    "divisibility",
    "unimodality",
    "gcd_expectation",
    "modified_l2",
    "set_probability",
    "cos_taylor",
    "exit_interval",
    "dirichlet_rate",
    "tail_ratio",
    "lclt_scan",
    "level_set_count",
    "eigenvalue_tail",
];

#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    /// Run only the named check.
    pub only: Option<String>,
    pub seed: u64,
    /// Replacement tolerances by check name; lets a caller force a failure.
    pub tolerance_overrides: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteOutcome {
    pub reports: Vec<CheckReport>,
}

impl SuiteOutcome {
    pub fn all_passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }
}

/// Keeps the report closest to (or furthest past) its tolerance.
fn combine(name: &str, reports: Vec<CheckReport>) -> CheckReport {
    let failed = reports.iter().filter(|r| !r.passed).count();
    let total = reports.len();
    let mut worst = reports
        .into_iter()
        .max_by(|a, b| (a.max_violation - a.tolerance).total_cmp(&(b.max_violation - b.tolerance)))
        .expect("every check runs at least one case");
    worst.name = name.to_string();
    worst.worst_case = format!("{} [{failed} of {total} cases failed]", worst.worst_case);
    worst
}

fn run_check(name: &str, seed: u64) -> Result<CheckReport> {
    let reports: Vec<CheckReport> = match name {
        "vz_uniform" => {
            let entries = [-3i64, -2, -1, 1, 2, 3];
            let mut cases = Vec::new();
            for m in 2..=12u64 {
                for k in 1..=3u32 {
                    for code in 0..entries.len().pow(k) {
                        let v: Vec<i64> = (0..k).map(|i| entries[code / entries.len().pow(i) % entries.len()]).collect();
                        cases.push((m, v));
                    }
                }
            }
            cases.par_iter().map(|(m, v)| vz_uniform_check(&[*m], v)).collect::<Result<_>>()?
        }
        "divisibility" => {
            let mut out = Vec::new();
            for model in Model::ALL {
                for s in [0.1, 0.5, 3.0, 40.0, 400.0] {
                    for r in [1, 5, 10, 30] {
                        for gamma in [2, 3, 7] {
                            out.push(divisibility_check(model, s, r, gamma)?);
                        }
                    }
                }
            }
            out
        }
        "unimodality" => [(0.0, 60), (0.5, 60), (2.5, 60), (40.0, 200), (400.0, 200)]
            .iter()
            .map(|&(s, m)| unimodality_check(s, m))
            .collect::<Result<_>>()?,
        "gcd_expectation" => {
            let mut out = Vec::new();
            for d in 0..=2u32 {
                for size in 1..=d as usize + 3 {
                    out.push(gcd_expectation_probe(d, size, 10, 25.0, 20_000, seed ^ (d as u64) << 8 ^ size as u64)?);
                }
            }
            out
        }
        "modified_l2" => {
            let g = GroupSpec::cyclic(10_007)?;
            Model::ALL.iter().map(|&m| modified_l2_probe(&g, 200, m, 0.0, 4, 5_000, seed)).collect::<Result<_>>()?
        }
        "set_probability" => {
            let all: Vec<usize> = (0..20).collect();
            let mut out = Vec::new();
            for model in Model::ALL {
                for set in [&all[..19], &all[..]] {
                    out.push(set_probability_check(1e4, 20, model, 0.0, set, SetProbabilityVariant::Typical, 20_000, seed)?);
                }
                for size in 1..=4 {
                    let set: Vec<usize> = (0..size).collect();
                    out.push(set_probability_check(
                        1e12,
                        4,
                        model,
                        0.0,
                        &set,
                        SetProbabilityVariant::LocalOnly,
                        20_000,
                        seed,
                    )?);
                }
            }
            out
        }
        "cos_taylor" => vec![cos_taylor_check(1_000_000)?],
        "exit_interval" => {
            let grid: Vec<f64> = (1..=100).map(|i| 0.1 * i as f64).collect();
            (1..=12).map(|ell| exit_interval_check(ell, &grid)).collect::<Result<_>>()?
        }
        "dirichlet_rate" => [1, 2, 4, 8, 12, 20, 30]
            .par_iter()
            .map(|&ell| dirichlet_rate_check(ell, 1e3 / dirichlet_eigenvalue(ell)?))
            .collect::<Result<_>>()?,
        "tail_ratio" => {
            let s_grid = [0.01, 0.5, 3.0, 100.0, 1e4];
            let r_grid = [0.1, 1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0, 5000.0];
            [TailModel::Poisson, TailModel::Srw]
                .iter()
                .map(|&m| tail_ratio_check(m, &s_grid, &r_grid))
                .collect::<Result<_>>()?
        }
        "lclt_scan" => Model::ALL.iter().map(|&m| lclt_scan(m, &[10.0, 100.0, 1e3, 1e4, 1e5])).collect::<Result<_>>()?,
        "level_set_count" => {
            let mut out = Vec::new();
            for moduli in [&[12][..], &[36], &[6, 4], &[101]] {
                let g = GroupSpec::new(moduli)?;
                let top = level_set_census(&g)?.len() as u64 - 1;
                for s in 1..=top {
                    out.push(level_set_count_check(&g, s)?);
                }
            }
            out
        }
        "eigenvalue_tail" => vec![
            eigenvalue_tail_probe(&GroupSpec::cyclic(101)?, 12, 101, 100_000, seed)?,
            eigenvalue_tail_probe(&GroupSpec::cyclic(36)?, 9, 6, 100_000, seed)?,
        ],
        other => return Err(Error::InvalidInput(format!("unknown check `{other}`"))),
    };
    Ok(combine(name, reports))
}

pub fn run_suite(opts: &SuiteOptions) -> Result<SuiteOutcome> {
    let names: Vec<&str> = match &opts.only {
        Some(only) => {
            let name = CHECK_NAMES
                .iter()
                .find(|&&n| n == only)
                .ok_or_else(|| Error::InvalidInput(format!("unknown check `{only}`; known: {}", CHECK_NAMES.join(", "))))?;
            vec![name]
        }
        None => CHECK_NAMES.to_vec(),
    };
    for name in opts.tolerance_overrides.keys() {
        if !CHECK_NAMES.contains(&name.as_str()) {
            return Err(Error::InvalidInput(format!("tolerance override for unknown check `{name}`")));
        }
    }
    let reports = names
        .par_iter()
        .enumerate()
        .map(|(i, name)| {
            let report = run_check(name, opts.seed.wrapping_add(i as u64))?;
            Ok(match opts.tolerance_overrides.get(*name) {
                Some(&tol) => report.with_tolerance(tol),
                None => report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteOutcome { reports })
}
