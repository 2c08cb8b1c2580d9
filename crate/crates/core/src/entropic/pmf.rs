//! Laws of a single coordinate of the auxiliary walk.
//!
//! After per-coordinate time `s` a directed coordinate is `Po(s)` and an
//! undirected one is a rate-1 simple random walk, `P(X_s = x) = e^{-s} I_|x|(s)`.

use crate::error::{Error, Result};
use crate::numeric::{self, CompensatedSum};
use crate::Model;

/// Probabilities below this are left out of entropy sums.
pub const PMF_FLOOR: f64 = 1e-300;

/// Above this `s` undirected windows come from backward Bessel recurrence
/// instead of one power series per point.
const SERIES_MAX_S: f64 = 30.0;

/// Half-width of the default support window around the mean.
pub fn default_half_width(s: f64) -> f64 {
    (12.0 * s.sqrt() + 1e-15f64.ln().abs()).max(60.0)
}

/// `ln P(W_1 = x)` after per-coordinate time `s`.
pub fn ln_step_pmf(model: Model, s: f64, x: i64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::InvalidInput(format!("negative time s = {s}")));
    }
    Ok(match model {
        Model::Directed if x < 0 => f64::NEG_INFINITY,
        Model::Directed => numeric::ln_poisson_pmf(x as u64, s),
        Model::Undirected => ln_srw_pmf(s, x.unsigned_abs()),
    })
}

/// `P(W_1 = x)` after per-coordinate time `s`.
pub fn step_pmf(model: Model, s: f64, x: i64) -> Result<f64> {
    ln_step_pmf(model, s, x).map(f64::exp)
}

/// `ln(e^{-s} I_nu(s))` from the power series of the modified Bessel function.
fn ln_srw_pmf(s: f64, nu: u64) -> f64 {
    if s == 0.0 {
        return if nu == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let nuf = nu as f64;
    let q = 0.25 * s * s;
    if s <= SERIES_MAX_S {
        // I_nu(s) = (s/2)^nu / nu! * (1 + T), T = sum_{m>=1} q^m nu! / (m! (m+nu)!)
        let mut term = 1.0;
        let mut tail = 0.0;
        let mut m = 1.0;
        loop {
            term *= q / (m * (m + nuf));
            tail += term;
            if term < 1e-17 * (1.0 + tail) && m > q.sqrt() {
                break;
            }
            m += 1.0;
        }
        return -s + nuf * (0.5 * s).ln() - numeric::ln_gamma(nuf + 1.0) + tail.ln_1p();
    }
    // Anchor at the largest series term and sum ratios outward.
    let peak = ((-nuf + (nuf * nuf + s * s).sqrt()) / 2.0).floor().max(0.0);
    let ln_peak =
        (2.0 * peak + nuf) * (0.5 * s).ln() - numeric::ln_gamma(peak + 1.0) - numeric::ln_gamma(peak + nuf + 1.0);
    let mut total = 1.0;
    let mut term = 1.0;
    let mut m = peak + 1.0;
    loop {
        term *= q / (m * (m + nuf));
        total += term;
        if term < 1e-18 {
            break;
        }
        m += 1.0;
    }
    term = 1.0;
    m = peak;
    while m >= 1.0 {
        term *= m * (m + nuf) / q;
        total += term;
        if term < 1e-18 {
            break;
        }
        m -= 1.0;
    }
    -s + ln_peak + total.ln()
}

/// The law of one coordinate on a finite support window `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct StepDistribution {
    model: Model,
    s: f64,
    lo: i64,
    pmf: Vec<f64>,
    ln_pmf: Vec<f64>,
}

impl StepDistribution {
    pub fn new(model: Model, s: f64) -> Result<Self> {
        Self::with_half_width(model, s, default_half_width(s))
    }

    pub fn with_half_width(model: Model, s: f64, half_width: f64) -> Result<Self> {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::InvalidInput(format!("invalid time s = {s}")));
        }
        let center = match model {
            Model::Directed => s,
            Model::Undirected => 0.0,
        };
        let lo = match model {
            Model::Directed => ((center - half_width).floor() as i64).max(0),
            Model::Undirected => -(half_width.ceil() as i64),
        };
        let hi = (center + half_width).ceil() as i64;

        let ln_pmf: Vec<f64> = match model {
            Model::Undirected if s > SERIES_MAX_S => {
                let half = bessel_window(s, hi as usize);
                (lo..=hi).map(|x| half[x.unsigned_abs() as usize]).collect()
            }
            _ => (lo..=hi).map(|x| ln_step_pmf(model, s, x)).collect::<Result<_>>()?,
        };
        let pmf = ln_pmf.iter().map(|l| l.exp()).collect();
        Ok(Self { model, s, lo, pmf, ln_pmf })
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn window(&self) -> (i64, i64) {
        (self.lo, self.lo + self.pmf.len() as i64 - 1)
    }

    pub fn mean(&self) -> f64 {
        match self.model {
            Model::Directed => self.s,
            Model::Undirected => 0.0,
        }
    }

    /// `(x, P(W_1 = x))` over the window.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.pmf.iter().enumerate().map(move |(i, &p)| (self.lo + i as i64, p))
    }

    pub fn probs(&self) -> &[f64] {
        &self.pmf
    }

    pub fn ln_probs(&self) -> &[f64] {
        &self.ln_pmf
    }

    /// Probability at `x`; zero outside the window.
    pub fn pmf(&self, x: i64) -> f64 {
        self.index(x).map_or(0.0, |i| self.pmf[i])
    }

    /// Log-probability at `x`, evaluated directly when `x` is outside the window.
    pub fn ln_pmf(&self, x: i64) -> f64 {
        match self.index(x) {
            Some(i) => self.ln_pmf[i],
            None => ln_step_pmf(self.model, self.s, x).unwrap_or(f64::NEG_INFINITY),
        }
    }

    fn index(&self, x: i64) -> Option<usize> {
        let i = x.checked_sub(self.lo)?;
        (i >= 0 && (i as usize) < self.pmf.len()).then_some(i as usize)
    }

    pub fn mass(&self) -> f64 {
        numeric::compensated_sum(self.pmf.iter().copied())
    }

    fn significant(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.pmf
            .iter()
            .zip(&self.ln_pmf)
            .enumerate()
            .filter(|(_, (&p, _))| p >= PMF_FLOOR)
            .map(|(i, (&p, &l))| (i, p, l))
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        numeric::compensated_sum(self.significant().map(|(_, p, l)| -p * l))
    }

    /// `d/ds` of the entropy, from the forward equation of the coordinate law.
    pub fn entropy_derivative(&self) -> f64 {
        let p = |i: isize| -> f64 {
            if i < 0 || i as usize >= self.pmf.len() {
                0.0
            } else {
                self.pmf[i as usize]
            }
        };
        let mut acc = CompensatedSum::new();
        for (i, pi, li) in self.significant() {
            let i = i as isize;
            let dp = match self.model {
                Model::Directed => p(i - 1) - pi,
                Model::Undirected => 0.5 * (p(i - 1) + p(i + 1)) - pi,
            };
            acc.add(-dp * (li + 1.0));
        }
        acc.value()
    }

    /// Mean and variance of `Q_1 = -ln P(W_1 = x)` under the coordinate law.
    pub fn q1_moments(&self) -> (f64, f64) {
        let mean = self.entropy();
        let var = numeric::compensated_sum(self.significant().map(|(_, p, l)| p * (-l - mean).powi(2)));
        (mean, var)
    }
}

/// `ln P(X_s = nu)` for `nu = 0..=hi` by Miller's backward recurrence
/// `I_{nu-1} = I_{nu+1} + (2 nu / s) I_nu`, normalised by `I_0 + 2 sum I_nu = e^s`.
fn bessel_window(s: f64, hi: usize) -> Vec<f64> {
    const RESCALE_ABOVE: f64 = 1e250;
    let top = hi + 3 * s.sqrt().ceil() as usize + 50;
    let mut values = vec![0.0; hi + 1];
    // running log-scale applied to `values[nu..=hi]`
    let mut ln_scale = vec![0.0; hi + 1];
    let mut upper = 0.0;
    let mut current = 1e-280;
    let mut ln_shift = 0.0;
    for nu in (1..=top).rev() {
        let below = upper + (2.0 * nu as f64 / s) * current;
        upper = current;
        current = below;
        if current > RESCALE_ABOVE {
            upper /= RESCALE_ABOVE;
            current /= RESCALE_ABOVE;
            ln_shift += RESCALE_ABOVE.ln();
        }
        let idx = nu - 1;
        if idx <= hi {
            values[idx] = current;
            ln_scale[idx] = ln_shift;
        }
    }
    // terms past `hi` are far below the rounding of the sum
    let base = ln_scale[0];
    let norm = numeric::compensated_sum(
        values.iter().zip(&ln_scale).enumerate().map(|(nu, (&v, &shift))| {
            let w = if nu == 0 { 1.0 } else { 2.0 };
            w * v * (shift - base).exp()
        }),
    );
    let ln_norm = norm.ln() + base;
    values
        .iter()
        .zip(&ln_scale)
        .map(|(&v, &shift)| {
            // ratio first: logs of the raw scaled values are large and lose digits
            let p = v * (shift - base).exp() / norm;
            if p > f64::MIN_POSITIVE {
                p.ln()
            } else if v > 0.0 {
                v.ln() + shift - ln_norm
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}
