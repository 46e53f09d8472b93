//! Reproducible random couplings `J(i, j)`.
//!
//! Every coupling is a pure function of `(seed, sample_index, min(i,j), max(i,j))`:
//! the pair is hashed with a keyed SplitMix64 finalizer chain into a 64-bit
//! word. Bernoulli couplings take the sign from the top bit. Gaussian
//! couplings map the top 52 bits to the midpoint uniform
//! `u = (m + 1/2) 2^-52` and push it through Wichura's AS 241 inverse normal
//! CDF, scaled by `1/sqrt(2)` so that the density is `exp(-x^2)/sqrt(pi)`.
//! No generator state is carried between calls, so results do not depend on
//! query order or on the number of worker threads.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::normal_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    /// `J = +1` or `-1` with probability 1/2 each.
    Bernoulli,
    /// Mean 0, variance 1/2.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub distribution: Distribution,
    pub seed: u64,
}

/// What is known about `|J|` for every pair of a coupling source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Magnitude {
    /// `|J| = 1` for every pair; cosine factors then do not depend on `J`.
    Unit,
    /// `|J| <= bound` for every pair.
    Bounded(f64),
}

/// Read access to a symmetric coupling configuration.
pub trait Couplings: Sync {
    /// Coupling between sites `lo < hi`.
    fn pair(&self, lo: i64, hi: i64) -> f64;

    fn magnitude(&self) -> Magnitude;

    /// Symmetric lookup; rejects `i == j`.
    fn coupling(&self, i: i64, j: i64) -> Result<f64> {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => Ok(self.pair(i, j)),
            std::cmp::Ordering::Greater => Ok(self.pair(j, i)),
            std::cmp::Ordering::Equal => Err(Error::SelfCoupling { site: i }),
        }
    }
}

/// The nonrandom model: `J = 1` on every pair.
#[derive(Debug, Clone, Copy, Default)]
pub struct Uniform;

impl Couplings for Uniform {
    fn pair(&self, _lo: i64, _hi: i64) -> f64 {
        1.0
    }

    fn magnitude(&self) -> Magnitude {
        Magnitude::Unit
    }
}

/// One disorder realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CouplingField {
    spec: DisorderSpec,
    sample_index: u64,
    key: u64,
}

impl DisorderSpec {
    pub fn new(distribution: Distribution, seed: u64) -> Self {
        Self { distribution, seed }
    }

    /// The field for sample 0.
    pub fn field(&self) -> CouplingField {
        self.fork_sample(0)
    }

    /// Independent realization keyed by `(seed, sample_index)`.
    pub fn fork_sample(&self, sample_index: u64) -> CouplingField {
        let key = mix(mix(self.seed ^ SEED_SALT) ^ sample_index.wrapping_mul(INDEX_MUL));
        CouplingField {
            spec: *self,
            sample_index,
            key,
        }
    }

    pub fn moment(&self, n: u32) -> f64 {
        moment(self.distribution, n)
    }
}

impl CouplingField {
    pub fn spec(&self) -> DisorderSpec {
        self.spec
    }

    pub fn sample_index(&self) -> u64 {
        self.sample_index
    }

    fn word(&self, lo: i64, hi: i64) -> u64 {
        let h = mix(self.key ^ mix((lo as u64) ^ LO_SALT));
        mix(h ^ mix((hi as u64) ^ HI_SALT))
    }
}

impl Couplings for CouplingField {
    fn pair(&self, lo: i64, hi: i64) -> f64 {
        let w = self.word(lo, hi);
        match self.spec.distribution {
            Distribution::Bernoulli => {
                if w >> 63 == 1 {
                    1.0
                } else {
                    -1.0
                }
            }
            Distribution::Gaussian => gaussian_from_word(w),
        }
    }

    fn magnitude(&self) -> Magnitude {
        match self.spec.distribution {
            Distribution::Bernoulli => Magnitude::Unit,
            Distribution::Gaussian => Magnitude::Bounded(gaussian_bound()),
        }
    }
}

/// Exact `n`-th moment of a single coupling.
pub fn moment(distribution: Distribution, n: u32) -> f64 {
    assert!(n >= 1, "moments start at n = 1");
    if n % 2 == 1 {
        return 0.0;
    }
    match distribution {
        Distribution::Bernoulli => 1.0,
        // (2m - 1)!! / 2^m
        Distribution::Gaussian => (1..=n / 2).map(|j| (2 * j - 1) as f64 * 0.5).product(),
    }
}

/// Largest `|J|` the Gaussian transform can emit: the quantile at the
/// extreme midpoint uniform `2^-53`, scaled to variance 1/2.
pub fn gaussian_bound() -> f64 {
    normal_quantile(0.5f64.powi(53)).abs() * FRAC_1_SQRT_2 * (1.0 + 1e-12)
}

fn gaussian_from_word(w: u64) -> f64 {
    let u = ((w >> 12) as f64 + 0.5) * 0.5f64.powi(52);
    normal_quantile(u) * FRAC_1_SQRT_2
}

const SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;
const INDEX_MUL: u64 = 0xD1B5_4A32_D192_ED03;
const LO_SALT: u64 = 0x8CB9_2BA7_2F3D_8DD7;
const HI_SALT: u64 = 0xABC9_8388_FB8F_AC03;

/// SplitMix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
