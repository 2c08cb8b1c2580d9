//! Random walks on random Cayley graphs of finite Abelian groups.
//!
//! The crate computes exact heat kernels and total-variation curves through
//! the character basis of `G = Z_{m_1} + ... + Z_{m_d}`, solves for entropic
//! and cutoff times of the auxiliary walk on `Z^k`, samples that walk for
//! Monte Carlo probes, and carries a suite of brute-force checks of the
//! supporting number-theoretic and analytic facts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod entropic;
pub mod error;
pub mod experiments;
pub mod group;
pub mod lemma;
pub mod numeric;
pub mod rng;
pub mod spectral;
pub mod walk;

pub use error::{Error, Result};
pub use group::{Element, GeneratorMultiset, GroupSpec};

use serde::{Deserialize, Serialize};

/// Which Cayley walk is being run.
///
/// `Undirected` steps by `±Z_i` with equal probability, `Directed` only by
/// `+Z_i`. On the auxiliary walk this is the choice between a rate-`1/k`
/// simple random walk and a rate-`1/k` Poisson process per coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Undirected,
    Directed,
}

impl Model {
    pub const ALL: [Model; 2] = [Model::Undirected, Model::Directed];

    pub fn as_str(self) -> &'static str {
        match self {
            Model::Undirected => "undirected",
            Model::Directed => "directed",
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "undirected" | "u" | "srw" => Ok(Model::Undirected),
            "directed" | "d" | "poisson" => Ok(Model::Directed),
            other => Err(Error::InvalidInput(format!("unknown walk model `{other}`"))),
        }
    }
}
