//! The auxiliary walk `W(t)` on `Z^k`, the entropy statistic `Q(t)`, typicality
//! and Monte Carlo probes of the Gaussian cutoff profile.
//!
//! The Cayley walk is realised as `S(t) = sum_i W_i(t) Z_i`, where the `W_i`
//! are independent rate-`1/k` Poisson processes (directed) or rate-`1/k`
//! simple random walks (undirected).

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::entropic::{self, default_half_width, StepDistribution};
use crate::error::{Error, Result};
use crate::group::{Element, GeneratorMultiset, GroupSpec};
use crate::numeric::normal_tail;
use crate::rng;
use crate::Model;

/// Samples per independent random stream in the probes.
pub const PROBE_BLOCK: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuxiliaryState {
    pub w: Vec<i64>,
    pub t: f64,
    pub model: Model,
}

/// One coordinate `W_1(t)` at per-coordinate rate `s = t / k`.
fn sample_coordinate<R: Rng + ?Sized>(model: Model, s: f64, rng: &mut R) -> i64 {
    if s <= 0.0 {
        return 0;
    }
    let steps = Poisson::new(s).expect("positive finite rate").sample(rng) as u64;
    match model {
        Model::Directed => steps as i64,
        Model::Undirected => {
            let ups = Binomial::new(steps, 0.5).expect("valid binomial").sample(rng);
            2 * ups as i64 - steps as i64
        }
    }
}

pub fn sample_w<R: Rng + ?Sized>(model: Model, t: f64, k: usize, rng: &mut R) -> Result<AuxiliaryState> {
    if !(t >= 0.0) || !t.is_finite() || k < 1 {
        return Err(Error::InvalidInput(format!("need finite t >= 0 and k >= 1, got t = {t}, k = {k}")));
    }
    let s = t / k as f64;
    Ok(AuxiliaryState { w: (0..k).map(|_| sample_coordinate(model, s, rng)).collect(), t, model })
}

/// `Q(t) = -ln mu_t(w) = -sum_i ln nu_{t/k}(w_i)`.
pub fn q_value(model: Model, t: f64, k: usize, w: &[i64]) -> Result<f64> {
    if w.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: w.len() });
    }
    let s = t / k as f64;
    if s == 0.0 {
        return match w.iter().find(|&&x| x != 0) {
            Some(&value) => Err(Error::PmfUnderflow { value, s }),
            None => Ok(0.0),
        };
    }
    let law = StepDistribution::new(model, s)?;
    q_with_law(&law, w)
}

fn q_with_law(law: &StepDistribution, w: &[i64]) -> Result<f64> {
    let mut q = 0.0;
    for &x in w {
        let l = law.ln_pmf(x);
        if l == f64::NEG_INFINITY {
            return Err(Error::PmfUnderflow { value: x, s: law.s() });
        }
        q -= l;
    }
    Ok(q)
}

/// `S(t) = W(t) . Z`.
pub fn simulate_s<R: Rng + ?Sized>(
    group: &GroupSpec,
    z: &GeneratorMultiset,
    model: Model,
    t: f64,
    rng: &mut R,
) -> Result<Element> {
    let w = sample_w(model, t, z.k(), rng)?;
    group.dot(&w.w, z)
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeResult {
    pub alpha: f64,
    pub t_alpha: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
    /// `Psi(alpha)`.
    pub target: f64,
    pub seed: u64,
}

impl ProbeResult {
    fn new(alpha: f64, t_alpha: f64, hits: usize, samples: usize, seed: u64) -> Self {
        let estimate = hits as f64 / samples as f64;
        ProbeResult {
            alpha,
            t_alpha,
            estimate,
            stderr: (estimate * (1.0 - estimate) / samples as f64).sqrt(),
            samples,
            target: normal_tail(alpha),
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CltProbe {
    #[serde(flatten)]
    pub result: ProbeResult,
    /// `P(Q <= ln n - omega)`.
    pub estimate_minus: f64,
    /// `P(Q <= ln n + omega)`.
    pub estimate_plus: f64,
    pub omega: f64,
    /// Advisory accuracy band `3000^{3/4} / sqrt(k) + omega / sqrt(v k)`.
    pub advisory_slack: f64,
}

/// Counts of `k` iid coordinates over the cells of a law's window.
///
/// `Q` and every typicality event depend on `W` only through these counts,
/// so a multinomial draw replaces `k` separate coordinate draws.
struct CellSampler {
    /// cells sorted by decreasing probability: (probability, x)
    cells: Vec<(f64, i64)>,
    /// probability mass of `cells[i..]`
    suffix: Vec<f64>,
}

impl CellSampler {
    fn new(law: &StepDistribution) -> Self {
        let mut cells: Vec<(f64, i64)> = law.iter().filter(|&(_, p)| p > 0.0).map(|(x, p)| (p, x)).collect();
        cells.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut suffix = vec![0.0; cells.len() + 1];
        for i in (0..cells.len()).rev() {
            suffix[i] = suffix[i + 1] + cells[i].0;
        }
        Self { cells, suffix }
    }

    /// Calls `visit(x, count)` for every cell with a nonzero count.
    fn sample<R: Rng + ?Sized>(&self, k: u64, rng: &mut R, mut visit: impl FnMut(i64, u64)) {
        let mut remaining = k;
        for (i, &(p, x)) in self.cells.iter().enumerate() {
            if remaining == 0 {
                break;
            }
            let q = (p / self.suffix[i]).min(1.0);
            let c = if i + 1 == self.cells.len() || q >= 1.0 {
                remaining
            } else {
                Binomial::new(remaining, q).expect("valid binomial").sample(rng)
            };
            if c > 0 {
                visit(x, c);
                remaining -= c;
            }
        }
    }
}

/// Runs `samples` draws in blocks, each block on its own stream, and sums the
/// per-block tallies. The result does not depend on thread scheduling.
fn blocked_tally<const N: usize>(
    seed: u64,
    samples: usize,
    draw: impl Fn(&mut rng::StreamRng) -> [bool; N] + Sync,
) -> [usize; N] {
    let blocks = samples.div_ceil(PROBE_BLOCK);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::substream(seed, 0, b as u64);
            let len = PROBE_BLOCK.min(samples - b * PROBE_BLOCK);
            let mut tally = [0usize; N];
            for _ in 0..len {
                for (t, hit) in tally.iter_mut().zip(draw(&mut r)) {
                    *t += hit as usize;
                }
            }
            tally
        })
        .reduce(|| [0; N], |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            a
        })
}

/// Estimates `P(Q(t_alpha) <= ln n)` and its `ln n +- omega` variants.
pub fn clt_probe(n: f64, k: usize, model: Model, alpha: f64, samples: usize, seed: u64) -> Result<CltProbe> {
    if samples < 1000 {
        return Err(Error::InvalidInput(format!("probe needs at least 1000 samples, got {samples}")));
    }
    let sol = entropic::solve_times(n, k, model, &[alpha])?;
    let t = sol.time(alpha).expect("solved alpha");
    let ln_n = n.ln();
    let omega = sol.omega;
    let law = StepDistribution::new(model, t / k as f64)?;
    let sampler = CellSampler::new(&law);
    let tally = blocked_tally::<3>(seed, samples, |r| {
        let mut q = 0.0;
        sampler.sample(k as u64, r, |x, c| q -= c as f64 * law.ln_pmf(x));
        [q <= ln_n, q <= ln_n - omega, q <= ln_n + omega]
    });
    let vk = sol.v * k as f64;
    Ok(CltProbe {
        result: ProbeResult::new(alpha, t, tally[0], samples, seed),
        estimate_minus: tally[1] as f64 / samples as f64,
        estimate_plus: tally[2] as f64 / samples as f64,
        omega,
        advisory_slack: 3000f64.powf(0.75) / (k as f64).sqrt() + omega / vk.sqrt(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TypicalityParams {
    pub alpha: f64,
    pub t_alpha: f64,
    /// `E W_1(t_alpha)`.
    pub mean: f64,
    pub r_alpha: u64,
    pub p_alpha: f64,
    /// `P(|W_1 - E W_1| > r_alpha)`.
    pub tail_at_r: f64,
    pub r_star: f64,
    pub p_star: f64,
    pub omega: f64,
}

impl TypicalityParams {
    /// Whether `x` meets the local window `|x - E W_1| <= r_alpha`.
    pub fn locally_typical(&self, x: i64) -> bool {
        (x as f64 - self.mean).abs() <= self.r_alpha as f64
    }
}

/// `P(|X - mean| > r)` over a law's window.
fn tail_beyond(law: &StepDistribution, mean: f64, r: f64) -> f64 {
    crate::numeric::compensated_sum(law.iter().filter(|&(x, _)| (x as f64 - mean).abs() > r).map(|(_, p)| p))
}

fn scan_radius(law: &StepDistribution, level: f64) -> Option<(u64, f64)> {
    let mean = law.mean();
    let (lo, hi) = law.window();
    let reach = (hi as f64 - mean).max(mean - lo as f64).ceil() as u64;
    // the tail is nonincreasing in r, so the first r that meets the level is minimal
    (0..=reach).map(|r| (r, tail_beyond(law, mean, r as f64))).find(|&(_, tail)| tail <= level)
}

pub fn typicality_params(n: f64, k: usize, model: Model, alpha: f64) -> Result<TypicalityParams> {
    let sol = entropic::solve_times(n, k, model, &[alpha])?;
    let t = sol.time(alpha).expect("solved alpha");
    typicality_params_at(n, k, model, alpha, t, sol.omega)
}

pub(crate) fn typicality_params_at(
    n: f64,
    k: usize,
    model: Model,
    alpha: f64,
    t: f64,
    omega: f64,
) -> Result<TypicalityParams> {
    let kf = k as f64;
    let s = t / kf;
    let level = kf.powf(-1.5);
    let mut law = StepDistribution::new(model, s)?;
    let mut found = scan_radius(&law, level);
    if found.is_none() {
        law = StepDistribution::with_half_width(model, s, 2.0 * default_half_width(s))?;
        found = scan_radius(&law, level);
    }
    let (r_alpha, tail_at_r) = found.ok_or_else(|| {
        Error::Numerical(format!("tail level k^(-3/2) = {level:.3e} not reached inside the support window"))
    })?;
    let mean = law.mean();
    let p_alpha = law
        .iter()
        .filter(|&(x, _)| (x as f64 - mean).abs() <= r_alpha as f64)
        .map(|(_, p)| p)
        .fold(f64::INFINITY, f64::min);
    Ok(TypicalityParams {
        alpha,
        t_alpha: t,
        mean,
        r_alpha,
        p_alpha,
        tail_at_r,
        r_star: 0.5 * n.powf(1.0 / kf) * kf.ln().powi(2),
        p_star: n.powf(-1.0 / kf) / (kf * kf),
        omega,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TypicalityProbe {
    /// Estimate of `P(W(t_alpha) not typical)`.
    #[serde(flatten)]
    pub result: ProbeResult,
    /// Frequency of failing the local window test.
    pub local_failure: f64,
    /// Frequency of failing the global test `mu(w) <= e^{-omega} / n`.
    pub global_failure: f64,
    pub params: TypicalityParams,
}

pub fn typicality_probe(n: f64, k: usize, model: Model, alpha: f64, samples: usize, seed: u64) -> Result<TypicalityProbe> {
    if samples < 1000 {
        return Err(Error::InvalidInput(format!("probe needs at least 1000 samples, got {samples}")));
    }
    let params = typicality_params(n, k, model, alpha)?;
    let law = StepDistribution::new(model, params.t_alpha / k as f64)?;
    let sampler = CellSampler::new(&law);
    let global_level = n.ln() + params.omega;
    let tally = blocked_tally::<3>(seed, samples, |r| {
        let mut q = 0.0;
        let mut local_ok = true;
        sampler.sample(k as u64, r, |x, c| {
            q -= c as f64 * law.ln_pmf(x);
            local_ok &= params.locally_typical(x);
        });
        let global_ok = q >= global_level;
        [!(local_ok && global_ok), !local_ok, !global_ok]
    });
    Ok(TypicalityProbe {
        result: ProbeResult::new(alpha, params.t_alpha, tally[0], samples, seed),
        local_failure: tally[1] as f64 / samples as f64,
        global_failure: tally[2] as f64 / samples as f64,
        params,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvErrorBudget {
    /// `2 ln(k / ln k) / sqrt(k)`.
    pub epsilon: f64,
    /// Whether `k <= ln n / (2 ln ln n)`, where the budget is claimed.
    pub in_regime: bool,
}

pub fn tv_error_budget(n: f64, k: f64) -> TvErrorBudget {
    let epsilon = 2.0 * (k / k.ln()).ln() / k.sqrt();
    let loglog = n.ln().ln();
    let in_regime = loglog > 0.0 && k <= 0.5 * n.ln() / loglog;
    TvErrorBudget { epsilon, in_regime }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_time_is_origin() {
        let mut r = rng::stream(1, 0);
        for model in Model::ALL {
            assert!(sample_w(model, 0.0, 5, &mut r).unwrap().w.iter().all(|&x| x == 0));
            let g = GroupSpec::new(&[5, 7]).unwrap();
            let z = g.sample_generators(3, &mut r).unwrap();
            assert!(simulate_s(&g, &z, model, 0.0, &mut r).unwrap().is_zero());
        }
        assert!(sample_w(Model::Directed, -1.0, 3, &mut r).is_err());
    }

    #[test]
    fn coordinate_moments() {
        let mut r = rng::stream(2, 0);
        let draws = 100_000;
        let (t, k) = (30.0, 10);
        let s: f64 = t / k as f64;
        let bound = 5.0 * (s / draws as f64).sqrt();
        let mean =
            (0..draws).map(|_| sample_w(Model::Directed, t, k, &mut r).unwrap().w[0] as f64).sum::<f64>() / draws as f64;
        assert!((mean - s).abs() < bound, "{mean}");
        let xs: Vec<f64> =
            (0..draws).map(|_| sample_w(Model::Undirected, t, k, &mut r).unwrap().w[0] as f64).collect();
        let m = xs.iter().sum::<f64>() / draws as f64;
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (draws - 1) as f64;
        // Var of a sample variance: (mu4 - s^2) / N with mu4 = s + 3 s^2
        let sd = ((s + 3.0 * s * s - s * s) / draws as f64).sqrt();
        assert!((var - s).abs() < 5.0 * sd, "{var}");
    }

    #[test]
    fn q_value_examples() {
        let s: f64 = 0.7;
        let p = entropic::step_pmf(Model::Undirected, s, 1).unwrap();
        let q = q_value(Model::Undirected, 3.0 * s, 3, &[1, -1, 1]).unwrap();
        assert!((q - 3.0 * -p.ln()).abs() < 1e-12);
        assert_eq!(q_value(Model::Directed, 0.0, 2, &[0, 0]).unwrap(), 0.0);
        assert!(q_value(Model::Directed, 1e-9, 2, &[0, 0]).unwrap() < 1e-8);
        assert!(matches!(q_value(Model::Directed, 1.0, 2, &[0, -1]), Err(Error::PmfUnderflow { .. })));
        assert!(q_value(Model::Directed, 1.0, 3, &[0, 1]).is_err());
    }

    #[test]
    fn q_is_additive_over_blocks() {
        let mut r = rng::stream(3, 0);
        for model in Model::ALL {
            let w = sample_w(model, 12.0, 6, &mut r).unwrap().w;
            let whole = q_value(model, 12.0, 6, &w).unwrap();
            let parts = q_value(model, 6.0, 3, &w[..3]).unwrap() + q_value(model, 6.0, 3, &w[3..]).unwrap();
            assert!((whole - parts).abs() < 1e-12);
        }
    }

    #[test]
    fn q_mean_matches_entropy() {
        let mut r = rng::stream(4, 0);
        for model in Model::ALL {
            let (t, k, draws) = (40.0, 8, 100_000);
            let s = t / k as f64;
            let (h, v) = entropic::q1_moments(model, s).unwrap();
            let mean = (0..draws)
                .map(|_| q_value(model, t, k, &sample_w(model, t, k, &mut r).unwrap().w).unwrap())
                .sum::<f64>()
                / draws as f64;
            let sd = (k as f64 * v / draws as f64).sqrt();
            assert!((mean - k as f64 * h).abs() < 5.0 * sd, "{model}: {mean} vs {}", k as f64 * h);
        }
    }

    #[test]
    fn cell_sampler_matches_coordinate_sampling() {
        // Q through multinomial counts has the same mean and variance as through k draws.
        let law = StepDistribution::new(Model::Undirected, 0.4).unwrap();
        let sampler = CellSampler::new(&law);
        let mut r = rng::stream(5, 0);
        let (k, draws) = (50u64, 40_000);
        let qs: Vec<f64> = (0..draws)
            .map(|_| {
                let mut q = 0.0;
                let mut total = 0;
                sampler.sample(k, &mut r, |x, c| {
                    q -= c as f64 * law.ln_pmf(x);
                    total += c;
                });
                assert_eq!(total, k);
                q
            })
            .collect();
        let (h, v) = law.q1_moments();
        let mean = qs.iter().sum::<f64>() / draws as f64;
        let var = qs.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        assert!((mean - k as f64 * h).abs() < 5.0 * (k as f64 * v / draws as f64).sqrt());
        assert!((var / (k as f64 * v) - 1.0).abs() < 0.05);
    }

    #[test]
    fn probes_are_deterministic() {
        let a = clt_probe(1e5, 50, Model::Directed, 0.5, 4000, 9).unwrap();
        let b = clt_probe(1e5, 50, Model::Directed, 0.5, 4000, 9).unwrap();
        assert_eq!(a.result.estimate, b.result.estimate);
        assert_eq!(a.estimate_plus, b.estimate_plus);
        assert!(clt_probe(1e5, 50, Model::Directed, 0.5, 10, 9).is_err());
    }

    #[test]
    fn clt_probe_ordering_and_targets() {
        let lo = clt_probe(1e12, 200, Model::Undirected, -2.0, 20_000, 1).unwrap();
        let hi = clt_probe(1e12, 200, Model::Undirected, 2.0, 20_000, 1).unwrap();
        assert!(lo.result.estimate > hi.result.estimate);
        assert!((hi.result.target - normal_tail(2.0)).abs() < 1e-15);
        let one = clt_probe(1e12, 200, Model::Undirected, 1.0, 20_000, 1).unwrap();
        assert!((one.result.target - 0.15866).abs() < 1e-5);
    }

    #[test]
    fn typicality_param_examples() {
        for model in Model::ALL {
            let p = typicality_params(1e6, 100, model, 0.0).unwrap();
            assert!((p.r_star - 12.17).abs() < 0.01 && (p.p_star / 8.71e-5 - 1.0).abs() < 1e-3);
            assert!(p.r_alpha as f64 <= p.r_star && p.p_alpha >= p.p_star, "{p:?}");
            let law = StepDistribution::new(model, p.t_alpha / 100.0).unwrap();
            let level = 100f64.powf(-1.5);
            assert!(p.tail_at_r <= level);
            if p.r_alpha > 0 {
                assert!(tail_beyond(&law, p.mean, p.r_alpha as f64 - 1.0) > level);
            }
            assert!(p.p_alpha <= law.pmf(p.mean.round() as i64));
        }
    }

    #[test]
    fn tv_budget_examples() {
        let b = tv_error_budget(1e300, std::f64::consts::E.powi(2));
        assert!((b.epsilon - 2.0 * (2.0 - 2f64.ln()) / std::f64::consts::E).abs() < 1e-12);
        assert!((b.epsilon - 0.961).abs() < 1e-3);
        let mut prev = f64::INFINITY;
        for k in 8..500 {
            let e = tv_error_budget(1e6, k as f64).epsilon;
            assert!(e < prev);
            prev = e;
        }
        assert!(!tv_error_budget(1e3, 50.0).in_regime);
    }

    #[test]
    fn two_state_walk_equilibrates() {
        let g = GroupSpec::cyclic(2).unwrap();
        let z = GeneratorMultiset::cyclic(&g, &[1]).unwrap();
        let mut r = rng::stream(6, 0);
        let runs = 100_000;
        let zeros = (0..runs).filter(|_| simulate_s(&g, &z, Model::Undirected, 40.0, &mut r).unwrap().is_zero()).count();
        let sigma = (runs as f64 * 0.25).sqrt();
        assert!((zeros as f64 - runs as f64 / 2.0).abs() < 5.0 * sigma);
    }
}
