//! Experiment drivers: each command samples its instances on per-replicate
//! streams, evaluates them in parallel, and merges results by replicate index
//! so the output does not depend on scheduling.

mod config;
mod output;

pub use config::{Command, ExperimentConfig, Format, TimeGrid};
pub use output::{Cell, Output, Table, TOOL, VERSION};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::entropic::{asymptotic_times, solve_times, AsymptoticReport, EntropicSolution};
use crate::error::{Error, Result};
use crate::group::{GeneratorMultiset, GroupSpec};
use crate::lemma::{run_suite, CheckReport, SuiteOptions};
use crate::numeric::normal_tail;
use crate::rng;
use crate::spectral::{
    cheeger_bounds, cheeger_exact, eigenvalues, gap_summary, heat_kernel_row, l2_bound, tv_exact, GapSummary,
    SpectralData, CHEEGER_MAX_N,
};
use crate::Model;

/// Jobs predicted above this many DFT butterfly-equivalents need `force`.
pub const BUDGET_LIMIT: f64 = 1e9;
/// Seed used by `verify` when none is given.
pub const VERIFY_SEED: u64 = 1729;
/// Multiples of `n^{2/k}` swept by the gap-scan summary.
pub const GAP_SWEEP: [f64; 6] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0];

/// One sampled Cayley graph.
struct Instance {
    replicate: usize,
    digest: String,
    z: GeneratorMultiset,
    spec: SpectralData,
    gap: GapSummary,
}

fn instance(group: &GroupSpec, k: usize, model: Model, seed: u64, stream: u64, replicate: usize) -> Result<Instance> {
    let z = group.sample_generators(k, &mut rng::stream(seed, stream))?;
    let spec = eigenvalues(group, &z, model)?;
    let gap = gap_summary(&spec);
    Ok(Instance { replicate, digest: z.digest(), z, spec, gap })
}

fn dft_cost(n: f64) -> f64 {
    n * n.log2().max(1.0)
}

/// Predicted work of a job in DFT butterfly-equivalents; one eigenvalue term counts as one.
pub fn estimated_cost(config: &ExperimentConfig) -> Result<f64> {
    let reps = config.replicates as f64;
    let n = || config.group().map(|g| g.order() as f64);
    let ks: f64 = config.k.iter().map(|&k| k as f64).sum();
    Ok(match config.command {
        Command::Entropic | Command::Verify => 0.0,
        Command::Spectrum => reps * n()? * ks,
        Command::TvCurve => {
            let points = match &config.t_grid {
                TimeGrid::Auto { points } | TimeGrid::Log { points, .. } | TimeGrid::Linear { points, .. } => *points,
                TimeGrid::List(ts) => ts.len(),
            };
            reps * (n()? * ks + points as f64 * dft_cost(n()?))
        }
        Command::CutoffProfile => reps * (n()? * ks + config.alphas.len() as f64 * dft_cost(n()?)),
        Command::GapScan => reps * n()? * ks,
        Command::Cheeger => reps * (n()? * ks + 2f64.powf(n()?) * 2.0 * ks),
    })
}

fn check_budget(config: &ExperimentConfig) -> Result<()> {
    let estimated = estimated_cost(config)?;
    if estimated > BUDGET_LIMIT && !config.force {
        return Err(Error::Budget { estimated, limit: BUDGET_LIMIT });
    }
    Ok(())
}

/// Runs the configured command after the budget check.
pub fn run(config: &ExperimentConfig) -> Result<Output> {
    check_budget(config)?;
    match config.command {
        Command::Spectrum => run_spectrum(config),
        Command::TvCurve => run_tv_curve(config),
        Command::CutoffProfile => run_cutoff_profile(config),
        Command::GapScan => run_gap_scan(config),
        Command::Entropic => run_entropic_report(config),
        Command::Verify => run_verify(config),
        Command::Cheeger => run_cheeger(config),
    }
}

fn finish(config: &ExperimentConfig, table: Table) -> Output {
    Output { config: config.clone(), table, summary: None, success: true }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn describe(values: &[f64]) -> Vec<(&'static str, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    vec![
        ("mean", values.iter().sum::<f64>() / values.len() as f64),
        ("min", quantile(&sorted, 0.0)),
        ("q10", quantile(&sorted, 0.1)),
        ("median", quantile(&sorted, 0.5)),
        ("q90", quantile(&sorted, 0.9)),
        ("max", quantile(&sorted, 1.0)),
    ]
}

pub fn run_spectrum(config: &ExperimentConfig) -> Result<Output> {
    let group = config.group()?;
    let (k, seed) = (config.single_k()?, config.seed()?);
    let instances: Vec<Instance> = (0..config.replicates)
        .into_par_iter()
        .map(|r| instance(group, k, config.model, seed, r as u64, r))
        .collect::<Result<_>>()?;
    let mut table = Table::new(&["replicate", "seed", "digest", "index", "element", "re", "im"]);
    for inst in &instances {
        for (i, l) in inst.spec.eigenvalues().iter().enumerate() {
            let x = group.element_of(i as u64);
            let coords: Vec<String> = x.coords().iter().map(|c| c.to_string()).collect();
            table.push(vec![
                ("replicate", inst.replicate.into()),
                ("seed", seed.into()),
                ("digest", inst.digest.clone().into()),
                ("index", i.into()),
                ("element", coords.join(" ").into()),
                ("re", l.re.into()),
                ("im", l.im.into()),
            ]);
        }
    }
    Ok(finish(config, table))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvPoint {
    pub t: f64,
    pub tv: f64,
    pub l2_bound: f64,
    /// `exp(-gamma t) / 2`, the spectral lower envelope.
    pub floor: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TvCurve {
    pub replicate: usize,
    pub digest: String,
    pub gamma: f64,
    pub connected: bool,
    pub points: Vec<TvPoint>,
}

/// The bracket of the automatic grid: `[t_{-3}, t_3]`, with the lower end
/// moved to `t_0 / 100` when `t_{-3}` is clamped at zero.
pub fn auto_bracket(n: f64, k: usize, model: Model) -> Result<(f64, f64)> {
    let sol = solve_times(n, k, model, &[-3.0, 3.0])?;
    let lo = sol.time(-3.0).unwrap_or(0.0);
    let hi = sol.time(3.0).unwrap_or(sol.t0);
    Ok((if lo > 0.0 { lo } else { sol.t0 / 100.0 }, hi))
}

pub fn tv_curves(config: &ExperimentConfig) -> Result<Vec<TvCurve>> {
    let group = config.group()?;
    let (k, seed) = (config.single_k()?, config.seed()?);
    let times = config.t_grid.resolve(match config.t_grid {
        TimeGrid::Auto { .. } => auto_bracket(group.order() as f64, k, config.model)?,
        _ => (0.0, 0.0),
    });
    (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let inst = instance(group, k, config.model, seed, r as u64, r)?;
            let points = times
                .iter()
                .map(|&t| {
                    let row = heat_kernel_row(&inst.spec, t)?;
                    Ok(TvPoint {
                        t,
                        tv: tv_exact(&row),
                        l2_bound: l2_bound(&inst.spec, t),
                        floor: 0.5 * (-inst.gap.gamma * t).exp(),
                    })
                })
                .collect::<Result<_>>()?;
            Ok(TvCurve { replicate: r, digest: inst.digest, gamma: inst.gap.gamma, connected: inst.gap.connected, points })
        })
        .collect()
}

pub fn run_tv_curve(config: &ExperimentConfig) -> Result<Output> {
    let seed = config.seed()?;
    let curves = tv_curves(config)?;
    let mut table = Table::new(&["replicate", "seed", "digest", "t", "tv", "l2_bound", "floor"]);
    for c in &curves {
        for p in &c.points {
            table.push(vec![
                ("replicate", c.replicate.into()),
                ("seed", seed.into()),
                ("digest", c.digest.clone().into()),
                ("t", p.t.into()),
                ("tv", p.tv.into()),
                ("l2_bound", p.l2_bound.into()),
                ("floor", p.floor.into()),
            ]);
        }
    }
    Ok(finish(config, table))
}

#[derive(Debug, Clone, Serialize)]
pub struct CutoffRecord {
    pub replicate: usize,
    pub digest: String,
    pub connected: bool,
    /// Exact `d_Z(t_alpha)`, in the order of the profile's alphas.
    pub tv: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CutoffProfile {
    pub solution: EntropicSolution,
    pub alphas: Vec<f64>,
    /// `Psi(alpha)`, the standard normal upper tail.
    pub targets: Vec<f64>,
    pub records: Vec<CutoffRecord>,
}

impl CutoffProfile {
    pub fn values(&self, alpha_index: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.tv[alpha_index]).collect()
    }

    pub fn mean(&self, alpha_index: usize) -> f64 {
        let v = self.values(alpha_index);
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn cutoff_profile(config: &ExperimentConfig) -> Result<CutoffProfile> {
    let group = config.group()?;
    let (k, seed) = (config.single_k()?, config.seed()?);
    if k < group.dim() {
        return Err(Error::InvalidInput(format!("k = {k} generators cannot generate a rank-{} group", group.dim())));
    }
    let solution = solve_times(group.order() as f64, k, config.model, &config.alphas)?;
    let times: Vec<f64> = solution.t_alpha.iter().map(|&(_, t)| t).collect();
    let records = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let inst = instance(group, k, config.model, seed, r as u64, r)?;
            let tv = times.iter().map(|&t| Ok(tv_exact(&heat_kernel_row(&inst.spec, t)?))).collect::<Result<_>>()?;
            Ok(CutoffRecord { replicate: r, digest: inst.digest, connected: inst.gap.connected, tv })
        })
        .collect::<Result<_>>()?;
    Ok(CutoffProfile {
        alphas: config.alphas.clone(),
        targets: config.alphas.iter().map(|&a| normal_tail(a)).collect(),
        solution,
        records,
    })
}

pub fn run_cutoff_profile(config: &ExperimentConfig) -> Result<Output> {
    let seed = config.seed()?;
    let profile = cutoff_profile(config)?;
    let mut table =
        Table::new(&["label", "replicate", "seed", "digest", "connected", "alpha", "t_alpha", "tv", "target"]);
    for rec in &profile.records {
        for (i, &alpha) in profile.alphas.iter().enumerate() {
            table.push(vec![
                ("label", "replicate".into()),
                ("replicate", rec.replicate.into()),
                ("seed", seed.into()),
                ("digest", rec.digest.clone().into()),
                ("connected", rec.connected.into()),
                ("alpha", alpha.into()),
                ("t_alpha", profile.solution.t_alpha[i].1.into()),
                ("tv", rec.tv[i].into()),
                ("target", profile.targets[i].into()),
            ]);
        }
    }
    for (i, &alpha) in profile.alphas.iter().enumerate() {
        for (stat, value) in describe(&profile.values(i)) {
            table.push(vec![
                ("label", stat.into()),
                ("alpha", alpha.into()),
                ("t_alpha", profile.solution.t_alpha[i].1.into()),
                ("tv", value.into()),
                ("target", profile.targets[i].into()),
            ]);
        }
    }
    Ok(finish(config, table))
}

#[derive(Debug, Clone, Serialize)]
pub struct GapRecord {
    pub k: usize,
    pub replicate: usize,
    pub digest: String,
    pub gap: GapSummary,
    /// `t_rel / n^{2/k}`; infinite for a disconnected instance.
    pub ratio: f64,
}

/// Per-replicate relaxation times. With several `k`, the replicate of the
/// `i`-th value reads stream `(i << 32) + r`.
pub fn gap_scan(config: &ExperimentConfig) -> Result<Vec<GapRecord>> {
    let group = config.group()?;
    let seed = config.seed()?;
    if config.k.is_empty() {
        return Err(Error::InvalidInput("gap-scan needs at least one k".into()));
    }
    let n = group.order() as f64;
    let jobs: Vec<(usize, usize, usize)> =
        config.k.iter().enumerate().flat_map(|(i, &k)| (0..config.replicates).map(move |r| (i, k, r))).collect();
    jobs.into_par_iter()
        .map(|(i, k, r)| {
            let inst = instance(group, k, config.model, seed, ((i as u64) << 32) + r as u64, r)?;
            Ok(GapRecord {
                k,
                replicate: r,
                digest: inst.digest,
                ratio: inst.gap.t_rel / n.powf(2.0 / k as f64),
                gap: inst.gap,
            })
        })
        .collect()
}

/// Fraction of records whose ratio exceeds `c`; disconnected instances count as above.
pub fn fraction_above(records: &[GapRecord], c: f64) -> f64 {
    records.iter().filter(|r| r.ratio > c).count() as f64 / records.len() as f64
}

pub fn run_gap_scan(config: &ExperimentConfig) -> Result<Output> {
    let seed = config.seed()?;
    let records = gap_scan(config)?;
    let mut table = Table::new(&[
        "label",
        "k",
        "replicate",
        "seed",
        "digest",
        "connected",
        "t_rel",
        "ratio",
        "gamma",
        "gamma_star",
        "value",
    ]);
    for r in &records {
        table.push(vec![
            ("label", "replicate".into()),
            ("k", r.k.into()),
            ("replicate", r.replicate.into()),
            ("seed", seed.into()),
            ("digest", r.digest.clone().into()),
            ("connected", r.gap.connected.into()),
            ("t_rel", r.gap.t_rel.into()),
            ("ratio", r.ratio.into()),
            ("gamma", r.gap.gamma.into()),
            ("gamma_star", r.gap.gamma_star.into()),
        ]);
    }
    for &k in &config.k {
        let of_k: Vec<GapRecord> = records.iter().filter(|r| r.k == k).cloned().collect();
        let ratios: Vec<f64> = of_k.iter().filter(|r| r.gap.connected).map(|r| r.ratio).collect();
        let mut stats = vec![
            ("connected_fraction".to_string(), ratios.len() as f64 / of_k.len() as f64),
            ("min_ratio".into(), ratios.iter().copied().fold(f64::INFINITY, f64::min)),
            ("max_ratio".into(), ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        ];
        for c in GAP_SWEEP {
            stats.push((format!("fraction_above_{c}"), fraction_above(&of_k, c)));
        }
        for (label, value) in stats {
            table.push(vec![("label", label.into()), ("k", k.into()), ("value", value.into())]);
        }
    }
    Ok(finish(config, table))
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropicRow {
    pub solution: EntropicSolution,
    pub asymptotic: AsymptoticReport,
}

/// `k` values reported when none are configured: `4`, `ceil(ln n)`, `ceil((ln n)^2)`.
pub fn default_k_sweep(n: f64) -> Vec<usize> {
    let l = n.ln();
    let mut ks = vec![4, l.ceil() as usize, (l * l).ceil() as usize];
    ks.dedup();
    ks
}

pub fn entropic_report(config: &ExperimentConfig) -> Result<Vec<EntropicRow>> {
    let ns = match (&config.n[..], &config.group) {
        ([], Some(g)) => vec![g.order() as f64],
        ([], None) => return Err(Error::InvalidInput("entropic needs n or a group".into())),
        (ns, _) => ns.to_vec(),
    };
    let cases: Vec<(f64, usize)> = ns
        .iter()
        .flat_map(|&n| {
            let ks = if config.k.is_empty() { default_k_sweep(n) } else { config.k.clone() };
            ks.into_iter().map(move |k| (n, k))
        })
        .collect();
    cases
        .into_par_iter()
        .map(|(n, k)| {
            Ok(EntropicRow {
                solution: solve_times(n, k, config.model, &config.alphas)?,
                asymptotic: asymptotic_times(n, k, config.model)?,
            })
        })
        .collect()
}

pub fn run_entropic_report(config: &ExperimentConfig) -> Result<Output> {
    let rows = entropic_report(config)?;
    let mut table = Table::default();
    for row in &rows {
        let (s, a) = (&row.solution, &row.asymptotic);
        let mut cells: Vec<(String, Cell)> = vec![
            ("n".into(), s.n.into()),
            ("k".into(), s.k.into()),
            ("model".into(), s.model.as_str().into()),
            ("regime".into(), a.regime.label().into()),
            ("kappa".into(), a.kappa.into()),
            ("t0".into(), s.t0.into()),
            ("v".into(), s.v.into()),
            ("omega".into(), s.omega.into()),
            ("h_t0".into(), s.h_t0.into()),
            ("predicted_t0".into(), a.predicted_t0.into()),
            ("relative_gap".into(), a.relative_gap.into()),
            ("solver_window".into(), a.solver_window.into()),
            ("predicted_window".into(), a.predicted_window.into()),
            ("window_relative_gap".into(), a.window_relative_gap.into()),
        ];
        for &(alpha, t) in &s.t_alpha {
            cells.push((format!("t_alpha[{alpha}]"), t.into()));
        }
        table.push(cells.iter().map(|(k, c)| (k.as_str(), c.clone())).collect());
    }
    let summary = json!({ "model": config.model, "rows": rows });
    Ok(Output { config: config.clone(), table, summary: Some(summary), success: true })
}

pub fn verify(config: &ExperimentConfig) -> Result<Vec<CheckReport>> {
    let opts = SuiteOptions {
        only: config.only.clone(),
        seed: config.seed.unwrap_or(VERIFY_SEED),
        tolerance_overrides: config.tolerances.clone(),
    };
    Ok(run_suite(&opts)?.reports)
}

pub fn run_verify(config: &ExperimentConfig) -> Result<Output> {
    let reports = verify(config)?;
    let mut table = Table::new(&["check", "passed", "max_violation", "tolerance", "worst_case"]);
    for r in &reports {
        table.push(vec![
            ("check", r.name.clone().into()),
            ("passed", r.passed.into()),
            ("max_violation", r.max_violation.into()),
            ("tolerance", r.tolerance.into()),
            ("worst_case", r.worst_case.clone().into()),
        ]);
    }
    let success = reports.iter().all(|r| r.passed);
    Ok(Output { config: config.clone(), table, summary: None, success })
}

#[derive(Debug, Clone, Serialize)]
pub struct CheegerRecord {
    pub replicate: usize,
    pub digest: String,
    pub phi: f64,
    pub gamma: f64,
    pub connected: bool,
    /// `(gamma / 2, sqrt(2 gamma))`; both zero when disconnected.
    pub bounds: (f64, f64),
}

pub fn cheeger_scan(config: &ExperimentConfig) -> Result<Vec<CheegerRecord>> {
    let group = config.group()?;
    let (k, seed) = (config.single_k()?, config.seed()?);
    if group.order() > CHEEGER_MAX_N {
        return Err(Error::ScaleCap(format!("cheeger needs n <= {CHEEGER_MAX_N}")));
    }
    (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let inst = instance(group, k, config.model, seed, r as u64, r)?;
            let phi = cheeger_exact(group, &inst.z)?;
            let bounds = if inst.gap.connected { cheeger_bounds(&inst.gap)? } else { (0.0, 0.0) };
            Ok(CheegerRecord { replicate: r, digest: inst.digest, phi, gamma: inst.gap.gamma, connected: inst.gap.connected, bounds })
        })
        .collect()
}

pub fn run_cheeger(config: &ExperimentConfig) -> Result<Output> {
    let seed = config.seed()?;
    let records = cheeger_scan(config)?;
    let mut table = Table::new(&[
        "replicate",
        "seed",
        "digest",
        "connected",
        "phi",
        "gamma",
        "lower",
        "upper",
        "within",
        "phi_over_sqrt_gamma",
    ]);
    for r in &records {
        let within = r.bounds.0 <= r.phi + 1e-12 && r.phi <= r.bounds.1 + 1e-12;
        table.push(vec![
            ("replicate", r.replicate.into()),
            ("seed", seed.into()),
            ("digest", r.digest.clone().into()),
            ("connected", r.connected.into()),
            ("phi", r.phi.into()),
            ("gamma", r.gamma.into()),
            ("lower", r.bounds.0.into()),
            ("upper", r.bounds.1.into()),
            ("within", within.into()),
            ("phi_over_sqrt_gamma", (r.phi / r.gamma.sqrt()).into()),
        ]);
    }
    Ok(finish(config, table))
}
