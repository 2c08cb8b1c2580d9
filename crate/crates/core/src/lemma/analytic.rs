//! Analytic inequalities: the cosine sandwich, exit from an interval, the
//! Dirichlet decay rate, tail-to-point ratios and the local CLT.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use super::{band_violation, CheckReport, Worst};
use crate::entropic::ln_step_pmf;
use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, ln_poisson_pmf};
use crate::Model;

const MAX_ELL: u64 = 30;

/// `2 (pi x)^2 >= 1 - cos(2 pi x) >= 2 e^{-7 pi^2 x^2 / 18} (pi x)^2 >= (2/3) (pi x)^2` on `[-1/2, 1/2]`.
pub fn cos_taylor_check(grid_points: usize) -> Result<CheckReport> {
    if grid_points < 1000 {
        return Err(Error::InvalidInput(format!("grid needs at least 1000 points, got {grid_points}")));
    }
    let mut worst = Worst::new();
    for i in 0..grid_points {
        let theta = -0.5 + i as f64 / (grid_points - 1) as f64;
        let a = PI * theta;
        let top = 2.0 * a * a;
        // 1 - cos(2a) without cancellation near 0
        let mid = 2.0 * a.sin().powi(2);
        let low = 2.0 * (-7.0 * PI * PI * theta * theta / 18.0).exp() * a * a;
        let floor = 2.0 / 3.0 * a * a;
        for (gap, which) in [(mid - top, "upper"), (low - mid, "middle"), (floor - low, "lower")] {
            worst.update(gap, || format!("{which} link at theta = {theta}"));
        }
    }
    Ok(worst.report("cos_taylor", 1e-12))
}

fn check_ell(ell: u64) -> Result<()> {
    if !(1..=MAX_ELL).contains(&ell) {
        return Err(Error::InvalidInput(format!("ell must lie in 1..={MAX_ELL}, got {ell}")));
    }
    Ok(())
}

/// `ln P_0(tau > s)` for the rate-1 SRW killed on leaving `{-ell+1, ..., ell-1}`,
/// by uniformisation: `sum_N Po(s)(N) (P^N 1)(0)` with `P` the killed jump chain.
fn ln_killed_survival(ell: u64, s: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    if ell == 1 {
        // the first jump always exits
        return -s;
    }
    let width = 2 * ell as usize - 1;
    let centre = ell as usize - 1;
    let last = (s + 40.0 * s.sqrt() + 50.0).ceil() as u64;
    let first = (s - 40.0 * s.sqrt()).floor().max(0.0) as u64;
    let mut u = vec![1.0f64; width];
    let mut next = vec![0.0; width];
    let mut ln_scale = 0.0;
    let mut terms = Vec::with_capacity((last - first + 1) as usize);
    for n in 0..=last {
        if n >= first {
            terms.push(ln_poisson_pmf(n, s) + u[centre].ln() + ln_scale);
        }
        for x in 0..width {
            let left = if x > 0 { u[x - 1] } else { 0.0 };
            let right = if x + 1 < width { u[x + 1] } else { 0.0 };
            next[x] = 0.5 * (left + right);
        }
        std::mem::swap(&mut u, &mut next);
        let top = u.iter().copied().fold(0.0, f64::max);
        u.iter_mut().for_each(|v| *v /= top);
        ln_scale += top.ln();
    }
    let peak = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    peak + compensated_sum(terms.iter().map(|t| (t - peak).exp())).ln()
}

pub fn killed_survival(ell: u64, s: f64) -> Result<f64> {
    check_ell(ell)?;
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::InvalidInput(format!("invalid time s = {s}")));
    }
    Ok(ln_killed_survival(ell, s).exp())
}

/// `P_0(tau > s) >= e^{-lambda s}` with `lambda = 1 - cos(pi / (2 ell))`,
/// plus the eigen-identity of `mu(x) = cos(pi x / (2 ell))` and monotonicity in `s`.
pub fn exit_interval_check(ell: u64, s_grid: &[f64]) -> Result<CheckReport> {
    check_ell(ell)?;
    let c = (PI / (2.0 * ell as f64)).cos();
    let lambda = 1.0 - c;
    let mut worst = Worst::new();

    let l = ell as i64;
    let mu = |x: i64| if x.abs() >= l { 0.0 } else { (PI * x as f64 / (2.0 * ell as f64)).cos() };
    for x in -l + 1..l {
        let image = 0.5 * (mu(x - 1) + mu(x + 1));
        worst.update((image - c * mu(x)).abs(), || format!("ell={ell}: eigen-identity at x = {x}"));
    }

    let mut grid = s_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let mut prev = f64::INFINITY;
    for &s in &grid {
        let ln_surv = ln_killed_survival(ell, s);
        // relative shortfall below the exponential bound
        worst.update(1.0 - (ln_surv + lambda * s).exp(), || format!("ell={ell}, s={s}: survival below e^(-lambda s)"));
        worst.update(ln_surv.exp() - prev, || format!("ell={ell}, s={s}: survival increased"));
        prev = ln_surv.exp();
    }
    Ok(worst.report("exit_interval", 1e-12))
}

/// Smallest eigenvalue of `I - P` on `{-ell+1, ..., ell-1}` with `P` the killed
/// jump chain, by Sturm-sequence bisection.
pub fn dirichlet_eigenvalue(ell: u64) -> Result<f64> {
    check_ell(ell)?;
    let size = 2 * ell as usize - 1;
    // eigenvalues of the tridiagonal (1 on the diagonal, -1/2 off it) below x
    let below = |x: f64| -> usize {
        let mut count = 0;
        let mut d = 1.0 - x;
        for i in 0..size {
            if i > 0 {
                d = 1.0 - x - 0.25 / d;
            }
            // a zero pivot is read as x sitting just above an eigenvalue
            if d == 0.0 {
                d = -f64::EPSILON;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    let (mut lo, mut hi) = (0.0, 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `-(1/t) ln P_0(tau > t)` within 1% of the Dirichlet eigenvalue at `t = t_max`.
pub fn dirichlet_rate_check(ell: u64, t_max: f64) -> Result<CheckReport> {
    let lambda = dirichlet_eigenvalue(ell)?;
    if !(t_max >= 200.0 / lambda) || !t_max.is_finite() {
        return Err(Error::InvalidInput(format!("t_max must be at least 200 / lambda = {}", 200.0 / lambda)));
    }
    let rate = -ln_killed_survival(ell, t_max) / t_max;
    let gap = (rate / lambda - 1.0).abs();
    Ok(CheckReport::new(
        "dirichlet_rate",
        format!("ell={ell}, t={t_max:.4e}: rate {rate:.6e} vs lambda_A {lambda:.6e}"),
        gap,
        0.01,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailModel {
    Poisson,
    Srw,
}

const RATIO_BAND: (f64, f64) = (0.05, 20.0);
const LOG_TAIL_BAND: (f64, f64) = (0.1, 10.0);

/// `ln P(X = y)` for the tail models.
fn ln_point(model: TailModel, s: f64, y: i64) -> f64 {
    match model {
        TailModel::Poisson if y < 0 => f64::NEG_INFINITY,
        TailModel::Poisson => ln_poisson_pmf(y as u64, s),
        TailModel::Srw => ln_step_pmf(Model::Undirected, s, y).unwrap_or(f64::NEG_INFINITY),
    }
}

/// `(ln P(X = x), P(X in tail) / P(X = x))` for the tail starting at `x` in direction `step`.
fn tail_from(model: TailModel, s: f64, x: i64, step: i64) -> (f64, f64) {
    let base = ln_point(model, s, x);
    let mut terms = vec![1.0];
    let mut y = x;
    loop {
        y += step;
        if y < 0 && model == TailModel::Poisson {
            break;
        }
        let term = (ln_point(model, s, y) - base).exp();
        terms.push(term);
        // terms decay once past the mode; stop when negligible
        let mean = if model == TailModel::Poisson { s } else { 0.0 };
        if term < 1e-18 && (y as f64 - mean).abs() > s.sqrt() {
            break;
        }
    }
    (base, compensated_sum(terms))
}

fn log_tail_scale(r: f64, s: f64) -> f64 {
    r * (r / s).min(1.0) * (r / s).max(E).ln()
}

/// Tail-to-point ratios against `(s/r) v 1` and log-tails against
/// `r ((r/s) ^ 1) log((r/s) v e)`, both within frozen two-sided bands.
/// Grid points with `r < sqrt(s)` are outside the claim and skipped.
pub fn tail_ratio_check(model: TailModel, s_grid: &[f64], r_grid: &[f64]) -> Result<CheckReport> {
    let mut worst = Worst::new();
    let mut tested = 0;
    for &s in s_grid {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::InvalidInput(format!("invalid time s = {s}")));
        }
        for &r in r_grid {
            if r < s.sqrt() {
                continue;
            }
            // (tail start, effective r, direction)
            let mut cases = Vec::new();
            match model {
                TailModel::Poisson => {
                    let up = (s + r).ceil();
                    cases.push((up as i64, up - s, 1, "upper"));
                    let down = (s - r).floor();
                    if down >= 0.0 && s - down <= s {
                        cases.push((down as i64, s - down, -1, "lower"));
                    }
                }
                TailModel::Srw => cases.push((r.ceil() as i64, r.ceil(), 1, "upper")),
            }
            for (x, r_eff, step, side) in cases {
                tested += 1;
                let (ln_p, ratio) = tail_from(model, s, x, step);
                let scaled = ratio / (s / r_eff).max(1.0);
                worst.update(band_violation(scaled, RATIO_BAND.0, RATIO_BAND.1), || {
                    format!("{model:?} {side} s={s} r={r_eff}: ratio / ((s/r) v 1) = {scaled:.4}")
                });
                let log_tail = -(ln_p + ratio.ln());
                let scaled_log = log_tail / log_tail_scale(r_eff, s);
                worst.update(band_violation(scaled_log, LOG_TAIL_BAND.0, LOG_TAIL_BAND.1), || {
                    format!("{model:?} {side} s={s} r={r_eff}: log-tail / scale = {scaled_log:.4}")
                });
            }
        }
    }
    if tested == 0 {
        return Err(Error::InvalidInput("no grid point satisfies r >= sqrt(s)".into()));
    }
    Ok(worst.report("tail_ratio", 0.0))
}

/// Frozen constant in the local CLT error bound `C s^{-1/4}`.
const LCLT_CONSTANT: f64 = 2.0;

/// Largest `|ln(P(X = y) sqrt(2 pi s) e^{(y - mean)^2 / (2s)})|` over `|y - mean| <= s^{7/12}`.
fn lclt_error(model: Model, s: f64) -> Result<(f64, i64)> {
    let mean = match model {
        Model::Directed => s,
        Model::Undirected => 0.0,
    };
    let reach = s.powf(7.0 / 12.0);
    let lo = (mean - reach).ceil() as i64;
    let hi = (mean + reach).floor() as i64;
    let mut best = (0.0, lo);
    for y in lo..=hi {
        let x = y as f64 - mean;
        let e = (ln_step_pmf(model, s, y)? + 0.5 * (2.0 * PI * s).ln() + x * x / (2.0 * s)).abs();
        if e > best.0 {
            best = (e, y);
        }
    }
    Ok(best)
}

pub fn lclt_scan(model: Model, s_grid: &[f64]) -> Result<CheckReport> {
    let mut worst = Worst::new();
    for &s in s_grid {
        if !(s >= 10.0) || !s.is_finite() {
            return Err(Error::InvalidInput(format!("local CLT scan needs s >= 10, got {s}")));
        }
        let (err, y) = lclt_error(model, s)?;
        let bound = LCLT_CONSTANT * s.powf(-0.25);
        worst.update(err - bound, || format!("{model} s={s}: error {err:.4e} at y = {y} vs {bound:.4e}"));
    }
    Ok(worst.report("lclt_scan", 0.0))
}
