//! Entropy of the auxiliary walk and the entropic / cutoff time solver.
//!
//! For per-coordinate time `s = t/k` write `H(s)` for the entropy of one
//! coordinate. The entropic time `t_0` solves `k H(t_0/k) = ln n`; with
//! `v = Var Q_1(t_0)` the cutoff time `t_a` solves
//! `k H(t_a/k) = ln n + a sqrt(v k)`.

mod pmf;

pub use pmf::{default_half_width, ln_step_pmf, step_pmf, StepDistribution, PMF_FLOOR};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::Model;

/// Relative bisection tolerance for every time solve.
pub const SOLVER_RTOL: f64 = 1e-12;
const BRACKET_CAP: f64 = 1_152_921_504_606_846_976.0; // 2^60

/// Beyond this per-coordinate time the entropy and its moments come from
/// their large-`s` expansions; the dropped terms are `O(s^-3)`.
const ASYMPTOTIC_S: f64 = 1e8;

fn gaussian_entropy(s: f64) -> f64 {
    0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * s).ln()
}

fn check_time(s: f64) -> Result<()> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::InvalidInput(format!("per-coordinate time must be finite and >= 0, got {s}")));
    }
    Ok(())
}

pub fn entropy(model: Model, s: f64) -> Result<f64> {
    check_time(s)?;
    if s == 0.0 {
        return Ok(0.0);
    }
    if s > ASYMPTOTIC_S {
        return Ok(gaussian_entropy(s)
            - match model {
                Model::Directed => 1.0 / (12.0 * s) + 1.0 / (24.0 * s * s),
                Model::Undirected => 1.0 / (48.0 * s * s),
            });
    }
    Ok(StepDistribution::new(model, s)?.entropy())
}

pub fn entropy_derivative(model: Model, s: f64) -> Result<f64> {
    check_time(s)?;
    if s == 0.0 {
        return Err(Error::InvalidInput("entropy derivative needs s > 0".into()));
    }
    if s > ASYMPTOTIC_S {
        return Ok(1.0 / (2.0 * s)
            + match model {
                Model::Directed => 1.0 / (12.0 * s * s),
                Model::Undirected => 1.0 / (24.0 * s * s * s),
            });
    }
    Ok(StepDistribution::new(model, s)?.entropy_derivative())
}

/// Mean and variance of `Q_1` at per-coordinate time `s`.
pub fn q1_moments(model: Model, s: f64) -> Result<(f64, f64)> {
    check_time(s)?;
    if s == 0.0 {
        return Ok((0.0, 0.0));
    }
    if s > ASYMPTOTIC_S {
        let v = match model {
            Model::Directed => 0.5 - 1.0 / (12.0 * s),
            Model::Undirected => 0.5 + 1.0 / (4.0 * s),
        };
        return Ok((entropy(model, s)?, v));
    }
    Ok(StepDistribution::new(model, s)?.q1_moments())
}

/// Smallest `t >= 0` with `k H(t/k) >= target` (per-coordinate target `target / k`).
fn solve_entropy_time(model: Model, k: f64, per_coord_target: f64, start_hi: f64) -> Result<f64> {
    if per_coord_target <= 0.0 {
        return Ok(0.0);
    }
    let value = |t: f64| entropy(model, t / k).map(|h| h - per_coord_target);
    let mut lo = 0.0;
    let mut hi = start_hi;
    while value(hi)? < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > BRACKET_CAP {
            return Err(Error::Unreachable { target: per_coord_target * k });
        }
    }
    for _ in 0..400 {
        if hi - lo <= SOLVER_RTOL * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if value(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `H^{-1}(y)`: the per-coordinate time at which one coordinate has entropy `y`.
pub fn inverse_entropy(model: Model, y: f64) -> Result<f64> {
    if !(y >= 0.0) {
        return Err(Error::InvalidInput(format!("entropy target {y} is negative")));
    }
    let start = (2.0 * y).exp().max(4.0);
    solve_entropy_time(model, 1.0, y, start)
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropicSolution {
    pub n: f64,
    pub k: usize,
    pub model: Model,
    pub t0: f64,
    /// `Var Q_1(t_0)`.
    pub v: f64,
    /// `(v k)^{1/4}`.
    pub omega: f64,
    /// Per-coordinate entropy at `t_0`, `ln n / k`.
    pub h_t0: f64,
    /// `(alpha, t_alpha)` in the order requested.
    pub t_alpha: Vec<(f64, f64)>,
    /// Alphas whose target entropy is not positive; their time is 0.
    pub clamped: Vec<f64>,
}

impl EntropicSolution {
    pub fn time(&self, alpha: f64) -> Option<f64> {
        self.t_alpha.iter().find(|(a, _)| *a == alpha).map(|&(_, t)| t)
    }

    /// Per-coordinate entropy target for `alpha`.
    pub fn target(&self, alpha: f64) -> f64 {
        (self.n.ln() + alpha * (self.v * self.k as f64).sqrt()) / self.k as f64
    }
}

/// Solves for `t_0`, `v` and each `t_alpha`.
pub fn solve_times(n: f64, k: usize, model: Model, alphas: &[f64]) -> Result<EntropicSolution> {
    if !(n >= 2.0) || k < 1 {
        return Err(Error::InvalidInput(format!("need n >= 2 and k >= 1, got n = {n}, k = {k}")));
    }
    if alphas.iter().any(|a| !a.is_finite()) {
        return Err(Error::InvalidInput("alphas must be finite".into()));
    }
    let kf = k as f64;
    let start_hi = kf * n.powf(2.0 / kf).max(4.0);
    let h_t0 = n.ln() / kf;
    let t0 = solve_entropy_time(model, kf, h_t0, start_hi)?;
    let (_, v) = q1_moments(model, t0 / kf)?;
    let spread = (v * kf).sqrt();

    let mut t_alpha = Vec::with_capacity(alphas.len());
    let mut clamped = Vec::new();
    for &alpha in alphas {
        let t = if alpha == 0.0 {
            t0
        } else {
            let target = (n.ln() + alpha * spread) / kf;
            if target <= 0.0 {
                clamped.push(alpha);
            }
            solve_entropy_time(model, kf, target, start_hi)?
        };
        t_alpha.push((alpha, t));
    }
    Ok(EntropicSolution { n, k, model, t0, v, omega: (v * kf).powf(0.25), h_t0, t_alpha, clamped })
}

/// `f(lambda) = H^{-1}(1/lambda)`.
pub fn f_lambda(lambda: f64, model: Model) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    inverse_entropy(model, 1.0 / lambda)
}

/// `g(lambda) = sqrt(v) / (f H'(f))` with `v = Var Q_1` at `s = f(lambda)`.
pub fn g_lambda(lambda: f64, model: Model) -> Result<f64> {
    let f = f_lambda(lambda, model)?;
    let (_, v) = q1_moments(model, f)?;
    Ok(v.sqrt() / (f * entropy_derivative(model, f)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "label")]
pub enum Regime {
    /// `kappa < 0.2`
    #[serde(rename = "k << log n")]
    FewGenerators,
    /// `0.2 <= kappa <= 5`, reported with `lambda = kappa`
    #[serde(rename = "k ~ lambda log n")]
    Proportional { lambda: f64 },
    /// `kappa > 5`
    #[serde(rename = "k >> log n")]
    ManyGenerators,
}

impl Regime {
    pub fn classify(n: f64, k: usize) -> Self {
        let kappa = k as f64 / n.ln();
        if kappa < 0.2 {
            Regime::FewGenerators
        } else if kappa > 5.0 {
            Regime::ManyGenerators
        } else {
            Regime::Proportional { lambda: kappa }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Regime::FewGenerators => "k << log n",
            Regime::Proportional { .. } => "k ~ lambda log n",
            Regime::ManyGenerators => "k >> log n",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticReport {
    pub regime: Regime,
    pub kappa: f64,
    pub predicted_t0: f64,
    /// Predicted `t_1 - t_0`.
    pub predicted_window: f64,
    pub solver_t0: f64,
    pub solver_window: f64,
    /// `|solver_t0 / predicted_t0 - 1|`.
    pub relative_gap: f64,
    pub window_relative_gap: f64,
}

/// Leading-order entropic time and window for the regime of `(n, k)`.
pub fn asymptotic_times(n: f64, k: usize, model: Model) -> Result<AsymptoticReport> {
    let sol = solve_times(n, k, model, &[1.0])?;
    let kf = k as f64;
    let kappa = kf / n.ln();
    let regime = Regime::classify(n, k);
    let (predicted_t0, window_factor) = match regime {
        Regime::FewGenerators => (kf * n.powf(2.0 / kf) / (2.0 * std::f64::consts::PI * std::f64::consts::E), 2f64.sqrt()),
        Regime::Proportional { lambda } => (kf * f_lambda(lambda, model)?, g_lambda(lambda, model)?),
        Regime::ManyGenerators => (kf / (kappa * kappa.ln()), (kappa * kappa.ln()).sqrt()),
    };
    let predicted_window = predicted_t0 * window_factor / kf.sqrt();
    let solver_window = sol.time(1.0).unwrap_or(sol.t0) - sol.t0;
    Ok(AsymptoticReport {
        regime,
        kappa,
        predicted_t0,
        predicted_window,
        solver_t0: sol.t0,
        solver_window,
        relative_gap: (sol.t0 / predicted_t0 - 1.0).abs(),
        window_relative_gap: (solver_window / predicted_window - 1.0).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(Model::Directed, 0.0).unwrap(), 0.0);
        assert_eq!(entropy(Model::Undirected, 0.0).unwrap(), 0.0);
        // Po(1) entropy by direct summation of -p ln p over x < 60.
        let mut p = (-1f64).exp();
        let mut oracle = 0.0;
        for x in 0..60 {
            if x > 0 {
                p /= x as f64;
            }
            oracle -= p * p.ln();
        }
        let h = entropy(Model::Directed, 1.0).unwrap();
        assert!((h - oracle).abs() < 1e-14);
        assert!((h - 1.3048).abs() < 5e-5);
        let gaussian = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * 100.0).ln();
        assert!((entropy(Model::Undirected, 100.0).unwrap() / gaussian - 1.0).abs() < 0.01);
    }

    #[test]
    fn entropy_strictly_increasing() {
        for model in Model::ALL {
            let mut prev = -1.0;
            let mut s = 1e-6;
            while s < 5e3 {
                let h = entropy(model, s).unwrap();
                assert!(h > prev, "{model} s {s}");
                prev = h;
                s *= 1.07;
            }
        }
    }

    #[test]
    fn derivative_examples() {
        let d = entropy_derivative(Model::Undirected, 200.0).unwrap();
        assert!((d * 400.0 - 1.0).abs() < 0.005, "{d}");
        let s = 1e-3;
        let d = entropy_derivative(Model::Directed, s).unwrap();
        assert!((d / (1.0 / s).ln() - 1.0).abs() < 0.15, "{d}");
        assert!(entropy_derivative(Model::Directed, 0.0).is_err());
        for model in Model::ALL {
            let eps = 1e-6;
            let fd = (entropy(model, 1.0 + eps).unwrap() - entropy(model, 1.0 - eps).unwrap()) / (2.0 * eps);
            assert!((entropy_derivative(model, 1.0).unwrap() - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn q1_moment_examples() {
        assert_eq!(q1_moments(Model::Undirected, 0.0).unwrap(), (0.0, 0.0));
        let (_, v) = q1_moments(Model::Undirected, 1e3).unwrap();
        assert!((v / 0.5 - 1.0).abs() < 0.05, "{v}");
        let s = 1e-3;
        let (_, v) = q1_moments(Model::Directed, s).unwrap();
        assert!((v / (s * (1.0 / s).ln().powi(2)) - 1.0).abs() < 0.2, "{v}");
    }

    #[test]
    fn window_doubling_changes_nothing() {
        for model in Model::ALL {
            for &s in &[1e-4, 0.3, 3.0, 45.0, 900.0] {
                let a = StepDistribution::new(model, s).unwrap();
                let b = StepDistribution::with_half_width(model, s, 2.0 * default_half_width(s)).unwrap();
                let (ma, va) = a.q1_moments();
                let (mb, vb) = b.q1_moments();
                assert!((ma - mb).abs() < 1e-12 && (va - vb).abs() < 1e-12, "{model} s {s}");
            }
        }
    }

    #[test]
    fn variance_continuity_near_t0() {
        for model in Model::ALL {
            for &(n, k) in &[(1e6, 4usize), (1e6, 14), (1e5, 100)] {
                let sol = solve_times(n, k, model, &[]).unwrap();
                for frac in [-0.01, -0.005, 0.005, 0.01] {
                    let t = sol.t0 * (1.0 + frac);
                    let (_, v) = q1_moments(model, t / k as f64).unwrap();
                    assert!((v - sol.v).abs() / sol.v <= 0.05);
                }
            }
        }
    }

    #[test]
    fn solver_examples() {
        let sol = solve_times(1e8, 4, Model::Undirected, &[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(sol.time(0.0), Some(sol.t0));
        let predicted = 4.0 * 1e4 / (2.0 * std::f64::consts::PI * std::f64::consts::E);
        assert!((predicted - 2342.0).abs() < 1.0);
        assert!((sol.t0 / predicted - 1.0).abs() < 0.05);
        for model in Model::ALL {
            for &(n, k) in &[(1e3, 3usize), (1e6, 20), (1e5, 400), (1e8, 4)] {
                let sol = solve_times(n, k, model, &[-1.0, 1.0]).unwrap();
                let (tm, tp) = (sol.time(-1.0).unwrap(), sol.time(1.0).unwrap());
                assert!(tm < sol.t0 && sol.t0 < tp, "{model} n {n} k {k}");
                let h = entropy(model, sol.t0 / k as f64).unwrap();
                assert!((h * k as f64 - n.ln()).abs() < 1e-8 * n.ln());
                let h1 = entropy(model, tp / k as f64).unwrap();
                assert!((h1 - sol.target(1.0)).abs() < 1e-8);
            }
        }
        assert!(solve_times(1.0, 3, Model::Directed, &[]).is_err());
        assert!(solve_times(10.0, 0, Model::Directed, &[]).is_err());
    }

    #[test]
    fn negative_targets_clamp_to_zero() {
        let sol = solve_times(100_003.0, 400, Model::Undirected, &[-1.5, 0.0]).unwrap();
        assert_eq!(sol.time(-1.5), Some(0.0));
        assert_eq!(sol.clamped, vec![-1.5]);
    }

    #[test]
    fn asymptotic_examples() {
        // kappa = 4 / ln 1e6 ~ 0.29 sits above the 0.2 threshold
        assert!(matches!(Regime::classify(1e6, 4), Regime::Proportional { lambda } if (lambda - 0.2895).abs() < 1e-3));
        assert_eq!(Regime::classify(1e6, 2), Regime::FewGenerators);
        assert_eq!(Regime::classify(1e6, 2).label(), "k << log n");
        let rep = asymptotic_times(1e3, 1_000_000, Model::Directed).unwrap();
        assert_eq!(rep.regime, Regime::ManyGenerators);
        let kappa = 1e6 / 1e3f64.ln();
        assert!((rep.predicted_t0 - 1e3f64.ln() / kappa.ln()).abs() < 1e-9);

        // (t_a - t_0) / t_0 ~ a sqrt(2 / k) to first order in a / sqrt(k)
        for model in Model::ALL {
            let sol = solve_times(1e100, 8, model, &[-0.1, 0.1]).unwrap();
            for a in [-0.1, 0.1] {
                let rel = (sol.time(a).unwrap() - sol.t0) / sol.t0;
                assert!((rel / (a * (2.0f64 / 8.0).sqrt()) - 1.0).abs() < 0.05, "{model} {a}: {rel}");
            }
        }
        let rep = asymptotic_times(1e300, 100, Model::Undirected).unwrap();
        assert_eq!(rep.regime, Regime::FewGenerators);
        assert!(rep.relative_gap < 0.05 && rep.window_relative_gap < 0.1, "{rep:?}");
    }

    #[test]
    fn expansion_joins_direct_sums() {
        for model in Model::ALL {
            let s = 0.999 * ASYMPTOTIC_S;
            let d = StepDistribution::new(model, s).unwrap();
            let (h, v) = d.q1_moments();
            let (ha, va) = q1_moments(model, 1.001 * ASYMPTOTIC_S).unwrap();
            let dh = 0.5 * (1.001f64 / 0.999).ln();
            assert!((ha - h - dh).abs() < 1e-9, "{model}: {h} {ha}");
            assert!((va - v).abs() < 1e-6, "{model}: {v} {va}");
            let rel = entropy_derivative(model, 1.001 * ASYMPTOTIC_S).unwrap() * s / (d.entropy_derivative() * s);
            assert!((rel - 0.999 / 1.001).abs() < 1e-6);
        }
    }

    #[test]
    fn f_and_g() {
        for model in Model::ALL {
            for lambda in [0.1, 1.0, 10.0] {
                let f = f_lambda(lambda, model).unwrap();
                assert!((entropy(model, f).unwrap() - 1.0 / lambda).abs() < 1e-9);
            }
            let mut prev = f64::INFINITY;
            for i in 1..40 {
                let f = f_lambda(0.05 * i as f64, model).unwrap();
                assert!(f < prev);
                prev = f;
            }
            assert!(g_lambda(1.0, model).unwrap() > 0.0);
        }
        let fu = f_lambda(1.0, Model::Undirected).unwrap();
        let fd = f_lambda(1.0, Model::Directed).unwrap();
        assert!((fu - fd).abs() > 1e-3);
        assert!(f_lambda(0.0, Model::Directed).is_err());
    }
}
