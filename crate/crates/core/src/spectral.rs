//! Exact spectral analysis of Abelian Cayley walks through the character basis.
//!
//! Every character `chi_x(y) = exp(2 pi i sum_j x_j y_j / m_j)` is an
//! eigenfunction of the walk, with eigenvalue
//! `lambda_x = (1/k) sum_i cos(2 pi x.Z_i)` (undirected) or
//! `(1/k) sum_i exp(2 pi i x.Z_i)` (directed). The continuous-time heat
//! kernel row from the identity is then a single inverse group DFT:
//! `P_t(0, y) = (1/n) sum_x exp(-t (1 - lambda_x)) conj(chi_x(y))`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{Element, GeneratorMultiset, GroupSpec};
use crate::numeric::CompensatedSum;
use crate::Model;

/// `|lambda_x - 1|` at or below this marks a second unit eigenvalue.
pub const DISCONNECT_TOL: f64 = 1e-12;
/// Largest imaginary residue tolerated in a heat kernel row.
pub const IMAG_TOL: f64 = 1e-9;
/// Largest negative roundoff tolerated before clamping.
pub const CLAMP_TOL: f64 = 1e-9;
/// Exhaustive Cheeger scans stop here.
pub const CHEEGER_MAX_N: u64 = 24;

const TABLE_MAX_MODULUS: u64 = 1 << 22;
const CHUNK: usize = 4096;

fn unit_root(r: u64, m: u64) -> Complex64 {
    let (sin, cos) = (TAU * (r as f64 / m as f64)).sin_cos();
    Complex64::new(cos, sin)
}

pub fn character(group: &GroupSpec, x: &Element, y: &Element) -> Result<Complex64> {
    group.validate(x)?;
    group.validate(y)?;
    let mut phase = 0.0;
    for ((&a, &b), &m) in x.coords().iter().zip(y.coords()).zip(group.moduli()) {
        let r = (a as u128 * b as u128 % m as u128) as u64;
        phase += r as f64 / m as f64;
    }
    let (sin, cos) = (TAU * phase.fract()).sin_cos();
    Ok(Complex64::new(cos, sin))
}

/// Eigenvalues of one walk, indexed like the group elements.
#[derive(Debug, Clone)]
pub struct SpectralData {
    model: Model,
    group: GroupSpec,
    k: usize,
    eigenvalues: Vec<Complex64>,
}

impl SpectralData {
    pub fn model(&self) -> Model {
        self.model
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, x: &Element) -> Complex64 {
        self.eigenvalues[self.group.index_of(x) as usize]
    }
}

/// All `n` eigenvalues in `O(n k)`.
pub fn eigenvalues(group: &GroupSpec, z: &GeneratorMultiset, model: Model) -> Result<SpectralData> {
    for g in z.generators() {
        group.validate(g)?;
    }
    let n = group.order() as usize;
    let moduli = group.moduli();
    let d = group.dim();
    let k = z.k();
    let tables: Option<Vec<Vec<Complex64>>> = moduli
        .iter()
        .all(|&m| m <= TABLE_MAX_MODULUS)
        .then(|| moduli.iter().map(|&m| (0..m).map(|r| unit_root(r, m)).collect()).collect());

    let mut values = vec![Complex64::new(0.0, 0.0); n];
    values.par_chunks_mut(CHUNK).enumerate().for_each(|(chunk, out)| {
        let start = (chunk * CHUNK) as u64;
        let mut coords = group.element_of(start).0;
        // residues[i * d + j] = x_j * Z_ij mod m_j, advanced with x
        let mut residues: Vec<u64> = z
            .generators()
            .iter()
            .flat_map(|g| {
                coords
                    .iter()
                    .zip(g.coords())
                    .zip(moduli)
                    .map(|((&x, &c), &m)| (x as u128 * c as u128 % m as u128) as u64)
                    .collect::<Vec<_>>()
            })
            .collect();
        for slot in out.iter_mut() {
            let mut acc = Complex64::new(0.0, 0.0);
            for res in residues.chunks_exact(d) {
                let chi = match &tables {
                    Some(t) => res.iter().enumerate().fold(Complex64::new(1.0, 0.0), |p, (j, &r)| p * t[j][r as usize]),
                    None => {
                        let phase: f64 = res.iter().zip(moduli).map(|(&r, &m)| r as f64 / m as f64).sum();
                        let (sin, cos) = (TAU * phase.fract()).sin_cos();
                        Complex64::new(cos, sin)
                    }
                };
                acc += chi;
            }
            *slot = match model {
                Model::Undirected => Complex64::new(acc.re / k as f64, 0.0),
                Model::Directed => acc / k as f64,
            };
            // advance the mixed-radix counter and the residues with it
            for j in (0..d).rev() {
                coords[j] += 1;
                if coords[j] < moduli[j] {
                    for (i, g) in z.generators().iter().enumerate() {
                        let r = &mut residues[i * d + j];
                        *r = ((*r as u128 + g.coords()[j] as u128) % moduli[j] as u128) as u64;
                    }
                    break;
                }
                coords[j] = 0;
                for i in 0..k {
                    residues[i * d + j] = 0;
                }
            }
        }
    });
    Ok(SpectralData { model, group: group.clone(), k, eigenvalues: values })
}

/// `P_t(0, .)` as a probability vector indexed like the group elements.
#[derive(Debug, Clone, Serialize)]
pub struct HeatKernelRow {
    pub t: f64,
    pub probs: Vec<f64>,
    /// Largest negative entry clamped to zero.
    pub clamped: f64,
    /// Largest imaginary residue discarded.
    pub imag_residue: f64,
}

/// In-place multidimensional DFT with kernel `exp(-2 pi i x.y / m)` per axis.
fn forward_dft(group: &GroupSpec, data: &mut [Complex64]) {
    let mut planner = FftPlanner::<f64>::new();
    let moduli = group.moduli();
    let weights = group.radix_weights();
    let n = data.len();
    for (&m, &stride) in moduli.iter().zip(weights) {
        let m = m as usize;
        let stride = stride as usize;
        let fft = planner.plan_fft_forward(m);
        if stride == 1 {
            fft.process(data);
            continue;
        }
        let outer = n / (m * stride);
        let mut lines = vec![Complex64::new(0.0, 0.0); n];
        // gather: line (o, i) holds data[o*m*stride + a*stride + i] for a in 0..m
        for o in 0..outer {
            for i in 0..stride {
                let line = (o * stride + i) * m;
                let base = o * m * stride + i;
                for a in 0..m {
                    lines[line + a] = data[base + a * stride];
                }
            }
        }
        fft.process(&mut lines);
        for o in 0..outer {
            for i in 0..stride {
                let line = (o * stride + i) * m;
                let base = o * m * stride + i;
                for a in 0..m {
                    data[base + a * stride] = lines[line + a];
                }
            }
        }
    }
}

pub fn heat_kernel_row(spec: &SpectralData, t: f64) -> Result<HeatKernelRow> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!("heat kernel time must be finite and >= 0, got {t}")));
    }
    let n = spec.eigenvalues.len();
    if t == 0.0 {
        let mut probs = vec![0.0; n];
        probs[0] = 1.0;
        return Ok(HeatKernelRow { t, probs, clamped: 0.0, imag_residue: 0.0 });
    }
    let mut data: Vec<Complex64> = spec
        .eigenvalues
        .par_iter()
        .map(|&lam| {
            let decay = (-t * (1.0 - lam.re)).exp();
            match spec.model {
                Model::Undirected => Complex64::new(decay, 0.0),
                Model::Directed => Complex64::from_polar(decay, t * lam.im),
            }
        })
        .collect();
    forward_dft(&spec.group, &mut data);

    let scale = 1.0 / n as f64;
    let mut imag_residue: f64 = 0.0;
    let mut clamped: f64 = 0.0;
    let mut probs = Vec::with_capacity(n);
    for c in &data {
        imag_residue = imag_residue.max((c.im * scale).abs());
        let p = c.re * scale;
        if p < 0.0 {
            clamped = clamped.max(-p);
        }
        probs.push(p.max(0.0));
    }
    if imag_residue > IMAG_TOL {
        return Err(Error::Numerical(format!("imaginary residue {imag_residue:.3e} at t = {t}")));
    }
    if clamped > CLAMP_TOL {
        return Err(Error::Numerical(format!("negative probability {:.3e} at t = {t}", -clamped)));
    }
    let total: CompensatedSum = probs.iter().copied().collect();
    let total = total.value();
    for p in &mut probs {
        *p /= total;
    }
    Ok(HeatKernelRow { t, probs, clamped, imag_residue })
}

/// `d_Z(t) = (1/2) sum_y |P_t(0, y) - 1/n|`.
///
/// Evaluated as the positive-part sum `sum_y (P_t(0, y) - 1/n)^+`, equal for a
/// normalised row and exact at `t = 0`.
pub fn tv_exact(row: &HeatKernelRow) -> f64 {
    let u = 1.0 / row.probs.len() as f64;
    row.probs.iter().filter(|&&p| p > u).map(|&p| p - u).collect::<CompensatedSum>().value()
}

/// `(1/2) sqrt(sum_{x != 0} exp(-2 t (1 - Re lambda_x)))`, an upper bound on `d_Z(t)`.
pub fn l2_bound(spec: &SpectralData, t: f64) -> f64 {
    let s: CompensatedSum = spec.eigenvalues[1..].iter().map(|l| (-2.0 * t * (1.0 - l.re)).exp()).collect();
    0.5 * s.value().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapSummary {
    pub gamma: f64,
    pub t_rel: f64,
    pub gamma_star: f64,
    pub connected: bool,
}

pub fn gap_summary(spec: &SpectralData) -> GapSummary {
    let rest = &spec.eigenvalues[1..];
    let connected = rest.iter().all(|l| (l - Complex64::new(1.0, 0.0)).norm() > DISCONNECT_TOL);
    let gamma = if connected { rest.iter().map(|l| 1.0 - l.re).fold(f64::INFINITY, f64::min) } else { 0.0 };
    let gamma_star = rest.iter().map(|l| 1.0 - l.norm()).fold(f64::INFINITY, f64::min);
    // the trivial group never reaches here: n >= 2
    GapSummary {
        gamma,
        t_rel: if connected { 1.0 / gamma } else { f64::INFINITY },
        gamma_star: gamma_star.max(0.0),
        connected,
    }
}

/// Cheeger bounds `(gamma / 2, sqrt(2 gamma))` on the conductance.
pub fn cheeger_bounds(gap: &GapSummary) -> Result<(f64, f64)> {
    if !gap.connected {
        return Err(Error::Disconnected);
    }
    Ok((gap.gamma / 2.0, (2.0 * gap.gamma).sqrt()))
}

/// Exact `Phi_* = min_{1 <= |A| <= n/2} |boundary A| / (2k |A|)` by Gray-code scan.
///
/// Each generator contributes the edge `g -- g + z` at every vertex, so an
/// involution `z = -z` yields a doubled edge and `z = 0` a self-loop.
pub fn cheeger_exact(group: &GroupSpec, z: &GeneratorMultiset) -> Result<f64> {
    let n = group.order();
    if n > CHEEGER_MAX_N {
        return Err(Error::ScaleCap(format!("exhaustive Cheeger scan needs n <= {CHEEGER_MAX_N}, got {n}")));
    }
    let n = n as usize;
    let k = z.k();
    // fwd[v][i] = v + z_i, back[v][i] = v - z_i as indices
    let mut fwd = vec![vec![0usize; k]; n];
    let mut back = vec![vec![0usize; k]; n];
    for v in 0..n {
        let x = group.element_of(v as u64);
        for (i, g) in z.generators().iter().enumerate() {
            fwd[v][i] = group.index_of(&group.add(&x, g)?) as usize;
            back[v][i] = group.index_of(&group.add(&x, &group.neg(g))?) as usize;
        }
    }
    let mut member = 0u32;
    let mut size = 0usize;
    let mut boundary: i64 = 0;
    let mut best = f64::INFINITY;
    let inside = |mask: u32, v: usize| mask >> v & 1 == 1;
    for step in 1u64..(1u64 << n) {
        let v = step.trailing_zeros() as usize;
        for i in 0..k {
            for &u in [fwd[v][i], back[v][i]].iter() {
                if u != v {
                    // the edge flips between cut and uncut
                    boundary += if inside(member, u) == inside(member, v) { 1 } else { -1 };
                }
            }
        }
        member ^= 1 << v;
        if inside(member, v) {
            size += 1;
        } else {
            size -= 1;
        }
        if size >= 1 && 2 * size <= n {
            let phi = boundary as f64 / (2 * k * size) as f64;
            best = best.min(phi);
        }
    }
    Ok(best)
}
