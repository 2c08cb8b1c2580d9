//! Test-only oracles that never touch the character basis.
#![allow(dead_code)]

use cayley_cutoff::{GeneratorMultiset, GroupSpec, Model};

/// Dense one-step transition matrix of the Cayley walk, built from group addition.
pub fn transition_matrix(group: &GroupSpec, z: &GeneratorMultiset, model: Model) -> Vec<Vec<f64>> {
    let n = group.order() as usize;
    let k = z.k() as f64;
    let mut p = vec![vec![0.0; n]; n];
    for (v, row) in p.iter_mut().enumerate() {
        let x = group.element_of(v as u64);
        for g in z.generators() {
            let fwd = group.index_of(&group.add(&x, g).unwrap()) as usize;
            match model {
                Model::Directed => row[fwd] += 1.0 / k,
                Model::Undirected => {
                    let back = group.index_of(&group.add(&x, &group.neg(g)).unwrap()) as usize;
                    row[fwd] += 0.5 / k;
                    row[back] += 0.5 / k;
                }
            }
        }
    }
    p
}

/// Row `0` of `exp(-t (I - P))` by uniformisation: `sum_j e^{-t} t^j / j! (delta_0 P^j)`.
pub fn dense_heat_kernel(group: &GroupSpec, z: &GeneratorMultiset, model: Model, t: f64) -> Vec<f64> {
    let p = transition_matrix(group, z, model);
    let n = p.len();
    let mut v = vec![0.0; n];
    v[0] = 1.0;
    let mut out = vec![0.0; n];
    let mut weight = (-t).exp();
    let mut j = 0u32;
    // terms past the mode shrink geometrically
    while weight > 1e-20 || (j as f64) < t {
        for (o, x) in out.iter_mut().zip(&v) {
            *o += weight * x;
        }
        let mut next = vec![0.0; n];
        for (a, &va) in v.iter().enumerate() {
            if va != 0.0 {
                for (b, &pab) in p[a].iter().enumerate() {
                    next[b] += va * pab;
                }
            }
        }
        v = next;
        j += 1;
        weight *= t / j as f64;
        if j > 10_000 {
            panic!("uniformisation did not converge at t = {t}");
        }
    }
    out
}

/// Half the L1 distance to uniform.
pub fn tv_to_uniform(p: &[f64]) -> f64 {
    let u = 1.0 / p.len() as f64;
    0.5 * p.iter().map(|x| (x - u).abs()).sum::<f64>()
}
