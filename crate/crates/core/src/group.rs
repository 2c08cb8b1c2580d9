//! Finite Abelian groups `Z_{m_1} + ... + Z_{m_d}` and their generator multisets.

use rand::Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Largest supported group order; keeps every index product exact in 64 bits.
pub const MAX_ORDER: u64 = 1 << 48;

/// A direct sum of cyclic groups, with a mixed-radix bijection onto `0..n`.
///
/// Indices are row-major: the last coordinate varies fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSpec {
    moduli: Vec<u64>,
    order: u64,
    radix_weights: Vec<u64>,
}

/// A group element, stored as canonical representatives `0 <= c_j < m_j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Element(pub Vec<u64>);

impl Element {
    pub fn coords(&self) -> &[u64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }
}

/// The generators `Z_1, ..., Z_k` of one Cayley graph instance. Repeats allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorMultiset {
    generators: Vec<Element>,
}

impl GeneratorMultiset {
    pub fn new(group: &GroupSpec, generators: Vec<Element>) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::InvalidInput("a generator multiset needs k >= 1".into()));
        }
        for z in &generators {
            group.validate(z)?;
        }
        Ok(Self { generators })
    }

    /// Builds a multiset on a cyclic group from plain residues.
    pub fn cyclic(group: &GroupSpec, residues: &[u64]) -> Result<Self> {
        if group.dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: group.dim() });
        }
        Self::new(group, residues.iter().map(|&r| Element(vec![r])).collect())
    }

    pub fn k(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[Element] {
        &self.generators
    }

    /// Short SHA-256 digest of the generator coordinates, used to label instances.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for z in &self.generators {
            for &c in z.coords() {
                hasher.update(c.to_le_bytes());
            }
            hasher.update([0xFF]);
        }
        hex::encode(&hasher.finalize()[..8])
    }
}

impl GroupSpec {
    pub fn new(moduli: &[u64]) -> Result<Self> {
        if moduli.is_empty() {
            return Err(Error::InvalidInput("a group needs at least one modulus".into()));
        }
        let mut order: u64 = 1;
        for &m in moduli {
            if m < 2 {
                return Err(Error::ModulusTooSmall(m));
            }
            order = order.checked_mul(m).filter(|&n| n <= MAX_ORDER).ok_or(Error::GroupTooLarge)?;
        }
        let mut radix_weights = vec![1u64; moduli.len()];
        for j in (0..moduli.len().saturating_sub(1)).rev() {
            radix_weights[j] = radix_weights[j + 1] * moduli[j + 1];
        }
        Ok(Self { moduli: moduli.to_vec(), order, radix_weights })
    }

    pub fn cyclic(m: u64) -> Result<Self> {
        Self::new(&[m])
    }

    pub fn moduli(&self) -> &[u64] {
        &self.moduli
    }

    /// `n = |G|`.
    pub fn order(&self) -> u64 {
        self.order
    }

    /// `d`, the number of cyclic factors.
    pub fn dim(&self) -> usize {
        self.moduli.len()
    }

    pub fn radix_weights(&self) -> &[u64] {
        &self.radix_weights
    }

    pub fn zero(&self) -> Element {
        Element(vec![0; self.dim()])
    }

    pub fn validate(&self, x: &Element) -> Result<()> {
        if x.0.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.0.len() });
        }
        for (&c, &m) in x.0.iter().zip(&self.moduli) {
            if c >= m {
                return Err(Error::InvalidInput(format!("coordinate {c} out of range for Z_{m}")));
            }
        }
        Ok(())
    }

    /// Reduces arbitrary integer coordinates (floored modulo) into an element.
    pub fn element(&self, coords: &[i64]) -> Result<Element> {
        if coords.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: coords.len() });
        }
        Ok(Element(
            coords
                .iter()
                .zip(&self.moduli)
                .map(|(&c, &m)| (c as i128).rem_euclid(m as i128) as u64)
                .collect(),
        ))
    }

    pub fn index_of(&self, x: &Element) -> u64 {
        x.0.iter().zip(&self.radix_weights).map(|(&c, &w)| c * w).sum()
    }

    pub fn element_of(&self, index: u64) -> Element {
        debug_assert!(index < self.order);
        Element(
            self.radix_weights
                .iter()
                .zip(&self.moduli)
                .map(|(&w, &m)| (index / w) % m)
                .collect(),
        )
    }

    pub fn elements(&self) -> impl Iterator<Item = Element> + '_ {
        (0..self.order).map(move |i| self.element_of(i))
    }

    pub fn add(&self, a: &Element, b: &Element) -> Result<Element> {
        self.validate(a)?;
        self.validate(b)?;
        Ok(Element(
            a.0.iter()
                .zip(&b.0)
                .zip(&self.moduli)
                .map(|((&x, &y), &m)| ((x as u128 + y as u128) % m as u128) as u64)
                .collect(),
        ))
    }

    pub fn neg(&self, a: &Element) -> Element {
        Element(a.0.iter().zip(&self.moduli).map(|(&x, &m)| (m - x) % m).collect())
    }

    /// `sum_i w_i Z_i`, reduced coordinate-wise. Weights may be negative.
    pub fn dot(&self, w: &[i64], z: &GeneratorMultiset) -> Result<Element> {
        if w.len() != z.k() {
            return Err(Error::DimensionMismatch { expected: z.k(), got: w.len() });
        }
        let mut acc = vec![0i128; self.dim()];
        for (&wi, zi) in w.iter().zip(z.generators()) {
            if wi == 0 {
                continue;
            }
            for ((a, &c), &m) in acc.iter_mut().zip(zi.coords()).zip(&self.moduli) {
                *a = (*a + wi as i128 * c as i128).rem_euclid(m as i128);
            }
        }
        Ok(Element(acc.into_iter().map(|a| a as u64).collect()))
    }

    /// `k` iid uniform generators.
    pub fn sample_generators<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<GeneratorMultiset> {
        if k < 1 {
            return Err(Error::InvalidInput("k must be at least 1".into()));
        }
        let generators = (0..k).map(|_| self.element_of(rng.random_range(0..self.order))).collect();
        Ok(GeneratorMultiset { generators })
    }

    /// Evaluates the three clauses of the standing hypotheses `H(n, k, eta)`.
    pub fn check_hypotheses(&self, k: usize, eta: f64) -> Result<HypothesisReport> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::InvalidInput(format!("eta = {eta} outside (0, 1)")));
        }
        if k < 2 {
            return Err(Error::InvalidInput("hypotheses need k >= 2".into()));
        }
        let n = self.order as f64;
        let kf = k as f64;
        let d = self.dim() as f64;
        let modulus_floor = n.powf(1.0 / kf) * kf.ln().powi(2);
        let moduli_large = self.moduli.iter().all(|&m| m as f64 > modulus_floor);

        let loglog = n.ln().ln();
        // Below n = e the iterated log is not positive; treat the threshold as infinite.
        let threshold = if loglog > 0.0 { eta * n.ln() / loglog } else { f64::INFINITY };
        let small_k = kf <= threshold;
        let small_k_clause = !small_k || d <= (1.0 - 2.0 * eta) * kf;
        let large_k_clause = small_k || d <= eta * threshold / 20.0;

        Ok(HypothesisReport {
            passes: moduli_large && small_k_clause && large_k_clause,
            moduli_large,
            modulus_floor,
            small_k_clause,
            large_k_clause,
            k_threshold: threshold,
            eta,
        })
    }
}

impl std::str::FromStr for GroupSpec {
    type Err = Error;

    /// Parses the comma-separated literal form, e.g. `"4,9,25"`.
    fn from_str(s: &str) -> Result<Self> {
        let moduli = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::InvalidInput(format!("bad modulus `{}` in group `{s}`", p.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        GroupSpec::new(&moduli)
    }
}

impl std::fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.moduli.iter().map(|m| m.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub passes: bool,
    /// `m_j > n^{1/k} (ln k)^2` for every `j`.
    pub moduli_large: bool,
    pub modulus_floor: f64,
    /// If `k <= eta ln n / ln ln n` then `d <= (1 - 2 eta) k`.
    pub small_k_clause: bool,
    /// If `k > eta ln n / ln ln n` then `d <= eta ln n / (20 ln ln n)`.
    pub large_k_clause: bool,
    pub k_threshold: f64,
    pub eta: f64,
}
