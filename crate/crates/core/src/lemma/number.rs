//! Exact and sampled number-theoretic facts about `V = W - W'` and the
//! divisor structure of the group.

use rand_distr::{Binomial, Distribution, Poisson};
use serde::Serialize;

use super::{CheckReport, Worst};
use crate::entropic::{step_pmf, StepDistribution};
use crate::error::{Error, Result};
use crate::group::{Element, GroupSpec};
use crate::numeric::compensated_sum;
use crate::{rng, Model};

/// Frozen constant for the `|I| <= d + 1` branch of the gcd bound.
pub const GCD_CONSTANT: f64 = 8.0;

const VZ_MAX_ENUMERATION: u64 = 1_000_000;
const LEVEL_SET_MAX_ORDER: u64 = 100_000;

pub(crate) fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Enumerates every `Z in G^k` and checks that `V . Z` is exactly uniform on
/// `prod_j g_j Z_{m_j / g_j}`, `g_j = gcd(V_1, ..., V_k, m_j)`.
pub fn vz_uniform_check(moduli: &[u64], v: &[i64]) -> Result<CheckReport> {
    let group = GroupSpec::new(moduli)?;
    let n = group.order();
    let k = v.len();
    if k == 0 {
        return Err(Error::InvalidInput("V must have at least one coordinate".into()));
    }
    let total = (0..k).try_fold(1u64, |acc, _| acc.checked_mul(n).filter(|&x| x <= VZ_MAX_ENUMERATION));
    let Some(total) = total else {
        return Err(Error::ScaleCap(format!("n^k exceeds {VZ_MAX_ENUMERATION}")));
    };
    let d = group.dim();
    let g: Vec<u64> = moduli.iter().map(|&m| v.iter().fold(m, |acc, &x| gcd(acc, x.unsigned_abs() % m))).collect();
    let elements: Vec<Element> = group.elements().collect();
    // v_i mod m_j, so that each term is a small nonnegative product
    let v_mod: Vec<Vec<u64>> = v.iter().map(|&x| moduli.iter().map(|&m| x.rem_euclid(m as i64) as u64).collect()).collect();

    let mut counts = vec![0u64; n as usize];
    let mut digits = vec![0usize; k];
    let mut acc = vec![0u64; d];
    for _ in 0..total {
        acc.iter_mut().for_each(|a| *a = 0);
        for (i, &digit) in digits.iter().enumerate() {
            for (j, a) in acc.iter_mut().enumerate() {
                *a = (*a + v_mod[i][j] * elements[digit].0[j]) % moduli[j];
            }
        }
        counts[group.index_of(&Element(acc.clone())) as usize] += 1;
        // odometer over generator indices
        for digit in digits.iter_mut().rev() {
            *digit += 1;
            if *digit < n as usize {
                break;
            }
            *digit = 0;
        }
    }

    let support: u64 = moduli.iter().zip(&g).map(|(&m, &gj)| m / gj).product();
    let expected = total / support;
    let mut worst = Worst::new();
    for (idx, &c) in counts.iter().enumerate() {
        let y = group.element_of(idx as u64);
        let inside = y.0.iter().zip(&g).all(|(&yj, &gj)| yj % gj == 0);
        let want = if inside { expected } else { 0 };
        worst.update(c.abs_diff(want) as f64, || format!("moduli {moduli:?}, V {v:?}: count {c} at {y:?}, expected {want}"));
    }
    if total % support != 0 {
        worst.update(f64::INFINITY, || format!("support size {support} does not divide {total}"));
    }
    Ok(worst.report("vz_uniform", 0.0))
}

/// Exact law of `W_1 - W_1'` for iid coordinates at per-coordinate time `s`,
/// on `[-reach, reach]`.
pub fn difference_pmf(model: Model, s: f64, reach: usize) -> Result<Vec<f64>> {
    let law = StepDistribution::new(model, s)?;
    let (lo, hi) = law.window();
    let probs = law.probs();
    let reach = reach as i64;
    Ok((-reach..=reach)
        .map(|v| {
            compensated_sum((lo.max(lo + v)..=hi.min(hi + v)).map(|x| {
                let a = probs[(x - lo) as usize];
                let b = probs[(x - v - lo) as usize];
                a * b
            }))
        })
        .collect())
}

/// `P(gamma | V_1 | 0 < |V_1| <= 2r) <= 1 / gamma`, summed exactly.
pub fn divisibility_check(model: Model, s: f64, r: u64, gamma: u64) -> Result<CheckReport> {
    if gamma < 2 || r < 1 {
        return Err(Error::InvalidInput(format!("need gamma >= 2 and r >= 1, got gamma = {gamma}, r = {r}")));
    }
    let reach = 2 * r as usize;
    let q = difference_pmf(model, s, reach)?;
    let at = |v: i64| q[(v + reach as i64) as usize];
    let window = compensated_sum((1..=reach as i64).map(|v| at(v) + at(-v)));
    let hits = compensated_sum((1..=reach as i64).filter(|v| v % gamma as i64 == 0).map(|v| at(v) + at(-v)));
    if window <= 0.0 {
        return Err(Error::Numerical(format!("conditioning event 0 < |V| <= {reach} has zero mass at s = {s}")));
    }
    let prob = hits / window;
    Ok(CheckReport::new(
        "divisibility",
        format!("{model} s={s} r={r} gamma={gamma}: P = {prob:.6e}"),
        prob - 1.0 / gamma as f64,
        1e-12,
    ))
}

/// `m -> P(X_s = m)` is nonincreasing on `{0, ..., M}` for the rate-1 SRW.
pub fn unimodality_check(s: f64, max_m: u64) -> Result<CheckReport> {
    if !(s >= 0.0) {
        return Err(Error::InvalidInput(format!("negative time s = {s}")));
    }
    let p: Vec<f64> = (0..=max_m as i64).map(|m| step_pmf(Model::Undirected, s, m)).collect::<Result<_>>()?;
    let mut worst = Worst::new();
    worst.update(0.0, || format!("s={s}: monotone on 0..={max_m}"));
    for (m, pair) in p.windows(2).enumerate() {
        worst.update(pair[1] - pair[0], || format!("s={s}: P(X={}) > P(X={m})", m + 1));
    }
    Ok(worst.report("unimodality", 1e-14))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GcdEstimate {
    pub d: u32,
    pub i_size: usize,
    pub r: u64,
    /// Per-coordinate time; each `V_i` is a rate-1 SRW at time `2s`.
    pub s: f64,
    pub mean: f64,
    pub stderr: f64,
    pub bound: f64,
    /// Fraction of raw coordinate draws accepted into `0 < |V_i| <= 2r`.
    pub acceptance: f64,
}

/// Monte Carlo `E[g^d]` with `g = gcd(|V_i| : i in I)`, each `V_i` conditioned
/// on `0 < |V_i| <= 2r` by rejection.
pub fn gcd_expectation_estimate(d: u32, i_size: usize, r: u64, s: f64, samples: usize, seed: u64) -> Result<GcdEstimate> {
    if i_size < 1 || r < 1 || samples < 2 || !(s > 0.0) {
        return Err(Error::InvalidInput(format!(
            "need |I| >= 1, r >= 1, s > 0 and at least two samples; got |I| = {i_size}, r = {r}, s = {s}"
        )));
    }
    let mut rng = rng::stream(seed, 0);
    let steps = Poisson::new(2.0 * s).expect("positive rate");
    let mut draws = 0u64;
    let draw_cap = 1000 * samples as u64 * i_size as u64;
    let mut draw = |rng: &mut rng::StreamRng| -> Result<u64> {
        loop {
            draws += 1;
            if draws > draw_cap {
                return Err(Error::Numerical(format!("acceptance of 0 < |V| <= {} is below 1e-3 at s = {s}", 2 * r)));
            }
            let n = steps.sample(rng) as u64;
            let ups = Binomial::new(n, 0.5).expect("valid binomial").sample(rng);
            let v = (2 * ups).abs_diff(n);
            if v > 0 && v <= 2 * r {
                return Ok(v);
            }
        }
    };
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let mut g = 0;
        for _ in 0..i_size {
            g = gcd(g, draw(&mut rng)?);
        }
        let x = (g as f64).powi(d as i32);
        sum += x;
        sum_sq += x * x;
    }
    let mean = sum / samples as f64;
    let var = ((sum_sq - sum * mean) / (samples - 1) as f64).max(0.0);
    let (di, ii) = (d as i64, i_size as i64);
    let bound = if d == 0 {
        1.0
    } else if ii >= di + 2 {
        1.0 + 3.0 * 2f64.powi((di - ii) as i32)
    } else {
        GCD_CONSTANT * (2.0 * r as f64).powi((di - ii + 2) as i32)
    };
    Ok(GcdEstimate {
        d,
        i_size,
        r,
        s,
        mean,
        stderr: (var / samples as f64).sqrt(),
        bound,
        acceptance: (samples * i_size) as f64 / draws as f64,
    })
}

pub fn gcd_expectation_probe(d: u32, i_size: usize, r: u64, s: f64, samples: usize, seed: u64) -> Result<CheckReport> {
    let e = gcd_expectation_estimate(d, i_size, r, s, samples, seed)?;
    Ok(CheckReport::new(
        "gcd_expectation",
        format!(
            "d={d} |I|={i_size} r={r} s={s}: E[g^d] = {:.4} vs bound {:.4} (acceptance {:.3})",
            e.mean, e.bound, e.acceptance
        ),
        e.mean - e.bound,
        3.0 * e.stderr,
    ))
}

/// `s_*(x) = max_j m_j / gcd(x_j, m_j)`, the largest coordinate order.
pub fn s_star(group: &GroupSpec, x: &Element) -> u64 {
    group.moduli().iter().zip(&x.0).map(|(&m, &xj)| m / gcd(xj, m)).max().unwrap_or(1)
}

/// `|A(s)|` for every `s`, indexed by `s` (entry 0 is unused).
pub fn level_set_census(group: &GroupSpec) -> Result<Vec<u64>> {
    if group.order() > LEVEL_SET_MAX_ORDER {
        return Err(Error::ScaleCap(format!("census needs n <= {LEVEL_SET_MAX_ORDER}")));
    }
    let top = group.moduli().iter().copied().max().unwrap_or(1);
    let mut counts = vec![0u64; top as usize + 1];
    for x in group.elements() {
        counts[s_star(group, &x) as usize] += 1;
    }
    Ok(counts)
}

/// `|A(s)| <= (s^2 / 2)^d` for `s >= 2` (and `A(1) = {0}`).
pub fn level_set_count_check(group: &GroupSpec, s: u64) -> Result<CheckReport> {
    let census = level_set_census(group)?;
    let count = census.get(s as usize).copied().unwrap_or(0);
    let bound = if s <= 1 { 1.0 } else { (0.5 * (s * s) as f64).powi(group.dim() as i32) };
    Ok(CheckReport::new(
        "level_set_count",
        format!("G = {group}, s = {s}: |A(s)| = {count} vs {bound}"),
        count as f64 - bound,
        0.0,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vz_uniform_examples() {
        let r = vz_uniform_check(&[6], &[2, 4]).unwrap();
        assert!(r.passed && r.max_violation == 0.0, "{r:?}");
        for v in [[1, 2], [3, 4], [-2, 1]] {
            assert!(vz_uniform_check(&[5], &v).unwrap().passed);
        }
        for m in 2..=12 {
            assert!(vz_uniform_check(&[m], &[1]).unwrap().passed);
        }
        assert!(vz_uniform_check(&[6, 4], &[2, 3]).unwrap().passed);
        assert!(vz_uniform_check(&[4], &[2, 2, 0]).unwrap().passed);
        assert!(matches!(vz_uniform_check(&[101], &[1, 1, 1, 1]), Err(Error::ScaleCap(_))));
    }

    #[test]
    fn vz_support_size_matches_enumeration() {
        // Independent count: tabulate V.Z for m = 6, V = (2, 4) by hand.
        let mut seen = std::collections::BTreeMap::new();
        for z1 in 0..6 {
            for z2 in 0..6 {
                *seen.entry((2 * z1 + 4 * z2) % 6).or_insert(0) += 1;
            }
        }
        assert_eq!(seen.keys().copied().collect::<Vec<_>>(), vec![0, 2, 4]);
        assert!(seen.values().all(|&c| c == 12));
    }

    #[test]
    fn difference_law_is_srw_at_double_time() {
        for model in Model::ALL {
            let q = difference_pmf(model, 1.7, 15).unwrap();
            for v in -15i64..=15 {
                let direct = step_pmf(Model::Undirected, 3.4, v).unwrap();
                assert!((q[(v + 15) as usize] - direct).abs() < 1e-14, "{model} {v}");
            }
        }
    }

    #[test]
    fn divisibility_examples() {
        for y in 1..=10_000u64 {
            assert!((y / 7) as f64 / y as f64 <= 1.0 / 7.0);
        }
        let r = divisibility_check(Model::Undirected, 3.0, 10, 2).unwrap();
        assert!(r.passed && r.max_violation < 0.0, "{r:?}");
        for model in Model::ALL {
            for s in [0.2, 3.0, 40.0] {
                for rr in [1, 5, 30] {
                    assert!(divisibility_check(model, s, rr, 7).unwrap().passed);
                }
            }
        }
        assert!(divisibility_check(Model::Directed, 1.0, 0, 2).is_err());
    }

    #[test]
    fn unimodality_examples() {
        for (s, m) in [(0.0, 10), (2.5, 60), (400.0, 200), (0.5, 40), (40.0, 100)] {
            assert!(unimodality_check(s, m).unwrap().passed, "s={s}");
        }
    }

    #[test]
    fn gcd_examples() {
        let e = gcd_expectation_estimate(1, 3, 10, 25.0, 20_000, 1).unwrap();
        assert!((e.bound - 1.75).abs() < 1e-15);
        assert!(e.mean <= e.bound + 3.0 * e.stderr);
        let zero = gcd_expectation_estimate(0, 2, 10, 25.0, 1000, 1).unwrap();
        assert_eq!(zero.mean, 1.0);
        assert_eq!(zero.stderr, 0.0);
        // harmonic case |I| = d + 1
        let h = gcd_expectation_estimate(1, 2, 10, 25.0, 20_000, 2).unwrap();
        assert!(h.mean <= 2.0 * 10f64.ln() + 3.0 * h.stderr, "{h:?}");
        assert!(gcd_expectation_probe(2, 1, 10, 25.0, 20_000, 3).unwrap().passed);
        assert!(e.acceptance > 0.5 && e.acceptance <= 1.0);
    }

    #[test]
    fn gcd_sampler_matches_exact_conditional_law() {
        // With |I| = 1 and d = 1, E[g] = E[|V| | 0 < |V| <= 2r].
        let (r, s) = (4u64, 2.0);
        let q: Vec<f64> = (1..=2 * r as i64).map(|v| step_pmf(Model::Undirected, 2.0 * s, v).unwrap()).collect();
        let exact = q.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum::<f64>() / q.iter().sum::<f64>();
        let e = gcd_expectation_estimate(1, 1, r, s, 50_000, 4).unwrap();
        assert!((e.mean - exact).abs() < 4.0 * e.stderr, "{} vs {exact}", e.mean);
    }

    #[test]
    fn level_set_examples() {
        let p = GroupSpec::cyclic(13).unwrap();
        let c = level_set_census(&p).unwrap();
        assert_eq!((c[1], c[13]), (1, 12));
        assert_eq!(c.iter().sum::<u64>(), 13);

        // Z_12: |A(s)| = phi(s) for s | 12, and the totals sum to 12.
        let phi = |j: u64| (1..=j).filter(|&a| gcd(a, j) == 1).count() as u64;
        let c = level_set_census(&GroupSpec::cyclic(12).unwrap()).unwrap();
        for s in 1..=12u64 {
            let want = if 12 % s == 0 { phi(s) } else { 0 };
            assert_eq!(c[s as usize], want, "s={s}");
        }

        let g = GroupSpec::new(&[6, 4]).unwrap();
        for s in 1..=6 {
            assert!(level_set_count_check(&g, s).unwrap().passed);
        }
        assert!(level_set_census(&GroupSpec::cyclic(100_003).unwrap()).is_err());
    }
}
