//! Lattice potentials `eps(k)`: evaluation, summability class and tail sums.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::hurwitz_zeta;

/// Relative slack added to closed-form tails so that a rounded brute-force
/// partial sum can never land above the reported upper bound.
const CLOSED_FORM_SLACK: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PotentialConfig", into = "PotentialConfig")]
pub struct PotentialSpec {
    family: Family,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `eps(k) = k^-alpha`.
    PowerLaw { alpha: f64, diagnostic: bool },
    /// `eps(k) = 2^(-k-1)`.
    Dyadic,
    /// `eps(k) = values[k - 1]`, zero beyond the table.
    Custom { values: Vec<f64> },
}

/// Summability class of `eps` over `k >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Summability {
    L1,
    L2Only,
    Neither,
}

/// A tail sum `sum_{k>=M} eps(k)^2` with a certified overestimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailSum {
    pub value: f64,
    pub upper_bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
enum PotentialConfig {
    PowerLaw {
        alpha: f64,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        diagnostic: bool,
    },
    Dyadic,
    Custom {
        values: Vec<f64>,
    },
}

impl TryFrom<PotentialConfig> for PotentialSpec {
    type Error = Error;

    fn try_from(config: PotentialConfig) -> Result<Self> {
        match config {
            PotentialConfig::PowerLaw {
                alpha,
                diagnostic: false,
            } => Self::power_law(alpha),
            PotentialConfig::PowerLaw {
                alpha,
                diagnostic: true,
            } => Self::power_law_diagnostic(alpha),
            PotentialConfig::Dyadic => Ok(Self::dyadic()),
            PotentialConfig::Custom { values } => Self::custom(values),
        }
    }
}

impl From<PotentialSpec> for PotentialConfig {
    fn from(spec: PotentialSpec) -> Self {
        match spec.family {
            Family::PowerLaw { alpha, diagnostic } => {
                PotentialConfig::PowerLaw { alpha, diagnostic }
            }
            Family::Dyadic => PotentialConfig::Dyadic,
            Family::Custom { values } => PotentialConfig::Custom { values },
        }
    }
}

impl PotentialSpec {
    /// `k^-alpha` with `alpha > 1/2`, so that `eps` is square summable.
    pub fn power_law(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.5) {
            return Err(Error::InvalidPotential(format!(
                "power-law exponent must satisfy alpha > 1/2, got {alpha}"
            )));
        }
        Ok(Self {
            family: Family::PowerLaw {
                alpha,
                diagnostic: false,
            },
        })
    }

    /// Power law admitting any `alpha > 0`. Only meant for exercising the
    /// `Neither` class; tail sums diverge for `alpha <= 1/2`.
    pub fn power_law_diagnostic(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidPotential(format!(
                "power-law exponent must be positive, got {alpha}"
            )));
        }
        Ok(Self {
            family: Family::PowerLaw {
                alpha,
                diagnostic: true,
            },
        })
    }

    pub fn dyadic() -> Self {
        Self {
            family: Family::Dyadic,
        }
    }

    /// Finite-range potential; `values[0]` is `eps(1)`. Values must be finite,
    /// non-negative and non-increasing.
    pub fn custom(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidPotential(format!(
                "custom values must be finite and non-negative, found {v}"
            )));
        }
        if let Some(w) = values.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::InvalidPotential(format!(
                "custom values must be non-increasing: eps({}) = {} < eps({}) = {}",
                w + 1,
                values[w],
                w + 2,
                values[w + 1]
            )));
        }
        Ok(Self {
            family: Family::Custom { values },
        })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn epsilon(&self, k: u64) -> f64 {
        if k == 0 {
            return 0.0;
        }
        match &self.family {
            Family::PowerLaw { alpha, .. } => {
                if *alpha == 1.0 {
                    1.0 / k as f64
                } else {
                    (k as f64).powf(-alpha)
                }
            }
            Family::Dyadic => dyadic_power(k + 1, 1.0),
            Family::Custom { values } => values.get(k as usize - 1).copied().unwrap_or(0.0),
        }
    }

    pub fn classify(&self) -> Summability {
        match &self.family {
            Family::PowerLaw { alpha, .. } if *alpha > 1.0 => Summability::L1,
            Family::PowerLaw { alpha, .. } if *alpha > 0.5 => Summability::L2Only,
            Family::PowerLaw { .. } => Summability::Neither,
            Family::Dyadic | Family::Custom { .. } => Summability::L1,
        }
    }

    /// Largest `k` with `eps(k) > 0`, or `None` for infinite range.
    pub fn support(&self) -> Option<u64> {
        match &self.family {
            Family::Custom { values } => Some(
                values
                    .iter()
                    .rposition(|&v| v > 0.0)
                    .map_or(0, |i| i as u64 + 1),
            ),
            _ => None,
        }
    }

    /// `sum_{k>=m} eps(k)^2` and a certified upper bound for it.
    pub fn tail_sum_sq(&self, m: u64) -> Result<TailSum> {
        if m < 1 {
            return Err(Error::param("M", "tail sums start at M >= 1"));
        }
        let tail = match &self.family {
            Family::Dyadic => {
                let value = self.tail_power_sum(m, 2.0);
                TailSum {
                    value,
                    upper_bound: value * (1.0 + CLOSED_FORM_SLACK),
                }
            }
            Family::PowerLaw { alpha, .. } => {
                let s = 2.0 * alpha;
                if s <= 1.0 {
                    TailSum {
                        value: f64::INFINITY,
                        upper_bound: f64::INFINITY,
                    }
                } else {
                    // First term explicitly, the rest under the integral of
                    // x^-s from m to infinity.
                    let mf = m as f64;
                    let head = mf.powf(-s);
                    TailSum {
                        value: hurwitz_zeta(s, mf),
                        upper_bound: (head + mf * head / (s - 1.0)) * (1.0 + CLOSED_FORM_SLACK),
                    }
                }
            }
            Family::Custom { values } => {
                let value = self.tail_power_sum(m, 2.0);
                let n = values.len() as f64;
                TailSum {
                    value,
                    upper_bound: value * (1.0 + (n + 2.0) * f64::EPSILON),
                }
            }
        };
        Ok(tail)
    }

    /// `sum_{k>=start} eps(k)^p` for `start >= 1`; infinite when divergent.
    pub fn tail_power_sum(&self, start: u64, p: f64) -> f64 {
        debug_assert!(start >= 1 && p > 0.0);
        match &self.family {
            Family::Dyadic => dyadic_power(start + 1, p) / (1.0 - 0.5f64.powf(p)),
            Family::PowerLaw { alpha, .. } => {
                let s = p * alpha;
                if s <= 1.0 {
                    f64::INFINITY
                } else {
                    hurwitz_zeta(s, start as f64)
                }
            }
            Family::Custom { values } => values
                .iter()
                .skip(start as usize - 1)
                .map(|v| v.powf(p))
                .sum(),
        }
    }

    /// Smallest `k >= 1` with `eps(k) <= threshold`, saturating at `u64::MAX`.
    pub fn first_index_at_most(&self, threshold: f64) -> u64 {
        if self.epsilon(1) <= threshold {
            return 1;
        }
        if threshold <= 0.0 {
            return match self.support() {
                Some(last) => last + 1,
                None => u64::MAX,
            };
        }
        let guess = match &self.family {
            Family::PowerLaw { alpha, .. } => threshold.powf(-1.0 / alpha).ceil(),
            Family::Dyadic => (-threshold.log2() - 1.0).ceil(),
            Family::Custom { values } => {
                return values
                    .iter()
                    .position(|&v| v <= threshold)
                    .map_or(values.len() as u64 + 1, |i| i as u64 + 1);
            }
        };
        if !(guess < 1.0e18) {
            return u64::MAX;
        }
        // Repair rounding in the closed-form guess against epsilon() itself.
        let mut k = (guess as u64).max(1);
        while k > 1 && self.epsilon(k - 1) <= threshold {
            k -= 1;
        }
        while self.epsilon(k) > threshold {
            k += 1;
        }
        k
    }
}

/// `2^(-e p)` without going through a possibly inexact `powf` for `p = 1, 2`.
fn dyadic_power(e: u64, p: f64) -> f64 {
    let e = e.min(i32::MAX as u64) as i32;
    if p == 1.0 {
        0.5f64.powi(e)
    } else if p == 2.0 {
        0.25f64.powi(e)
    } else {
        0.5f64.powf(e as f64 * p)
    }
}
