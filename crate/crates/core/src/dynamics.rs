//! Transverse-spin expectation values: finite volumes, the infinite-volume
//! site products and sampled magnetization curves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{CouplingField, Couplings, DisorderSpec, Distribution, Magnitude, Uniform};
use crate::error::{Error, Result};
use crate::potential::PotentialSpec;
use crate::product::{self, ScaledProduct};

pub use crate::product::ProductEstimate;

/// Product initial state `exp(-gamma sigma^x)` on every site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateConfig", into = "StateConfig")]
pub struct InitialState {
    gamma: f64,
    delta: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct StateConfig {
    gamma: f64,
}

impl TryFrom<StateConfig> for InitialState {
    type Error = Error;
    fn try_from(c: StateConfig) -> Result<Self> {
        InitialState::from_gamma(c.gamma)
    }
}

impl From<InitialState> for StateConfig {
    fn from(s: InitialState) -> Self {
        StateConfig { gamma: s.gamma }
    }
}

impl InitialState {
    pub fn from_gamma(gamma: f64) -> Result<Self> {
        let delta = -gamma.tanh();
        if !gamma.is_finite() || delta.abs() >= 1.0 {
            return Err(Error::param(
                "gamma",
                format!("need finite gamma with |tanh(gamma)| < 1, got {gamma}"),
            ));
        }
        Ok(Self { gamma, delta })
    }

    pub fn from_delta(delta: f64) -> Result<Self> {
        if !(delta.abs() < 1.0) {
            return Err(Error::param(
                "delta",
                format!("need |delta| < 1, got {delta}"),
            ));
        }
        Ok(Self {
            gamma: -delta.atanh(),
            delta,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Single-site expectation of `sigma^x`, `-tanh(gamma)`.
    pub fn delta(&self) -> f64 {
        self.delta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    /// Absolute error allowed on a site product.
    pub tolerance: f64,
    /// Cap on the number of distances multiplied out explicitly.
    pub max_terms: u64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_terms: 1 << 27,
        }
    }
}

impl TruncationPolicy {
    pub fn new(tolerance: f64, max_terms: u64) -> Result<Self> {
        let policy = Self {
            tolerance,
            max_terms,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::param("tolerance", "must be finite and > 0"));
        }
        if self.max_terms < 1 {
            return Err(Error::param("max_terms", "must be >= 1"));
        }
        Ok(())
    }
}

/// Strictly increasing, non-negative sample times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeGrid(Vec<f64>);

impl TryFrom<Vec<f64>> for TimeGrid {
    type Error = Error;
    fn try_from(times: Vec<f64>) -> Result<Self> {
        TimeGrid::new(times)
    }
}

impl From<TimeGrid> for Vec<f64> {
    fn from(g: TimeGrid) -> Self {
        g.0
    }
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::param("grid", "needs at least one time"));
        }
        if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::param("grid", "times must be finite and >= 0"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("grid", "times must be strictly increasing"));
        }
        Ok(Self(times))
    }

    /// `count` evenly spaced points from `start` to `stop` inclusive.
    pub fn linear(start: f64, stop: f64, count: usize) -> Result<Self> {
        if count == 1 {
            return Self::new(vec![start]);
        }
        let step = (stop - start) / (count - 1) as f64;
        Self::new((0..count).map(|i| start + step * i as f64).collect())
    }

    /// `count` geometrically spaced points; needs `0 < start < stop`.
    pub fn log(start: f64, stop: f64, count: usize) -> Result<Self> {
        if !(start > 0.0) {
            return Err(Error::param("grid", "log spacing needs start > 0"));
        }
        if count == 1 {
            return Self::new(vec![start]);
        }
        let ratio = (stop / start).ln() / (count - 1) as f64;
        Self::new(
            (0..count)
                .map(|i| start * (ratio * i as f64).exp())
                .collect(),
        )
    }

    pub fn times(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Which coupling configuration a curve was computed for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveSource {
    Nonrandom,
    Field {
        disorder: DisorderSpec,
        sample_index: u64,
        site: i64,
    },
    /// Disorder-averaged curve from closed forms.
    Average {
        distribution: Distribution,
    },
    /// Values supplied directly, e.g. synthetic test curves.
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMetadata {
    pub source: CurveSource,
    pub potential: Option<PotentialSpec>,
    pub state: Option<InitialState>,
    pub b_field: f64,
    pub policy: Option<TruncationPolicy>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MagnetizationCurve {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    /// `ln |value|`; stays finite where `values` underflow.
    pub ln_abs: Vec<f64>,
    pub certified_error: Vec<f64>,
    pub terms_used: Vec<u64>,
    pub metadata: CurveMetadata,
}

impl MagnetizationCurve {
    /// Curve from explicit values, with zero error and no truncation.
    pub fn tabulated(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::param("values", "length differs from the grid"));
        }
        let ln_abs = values.iter().map(|v| v.abs().ln()).collect();
        Ok(Self::tabulated_log(grid, values, ln_abs))
    }

    pub(crate) fn tabulated_log(grid: TimeGrid, values: Vec<f64>, ln_abs: Vec<f64>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values,
            ln_abs,
            certified_error: vec![0.0; n],
            terms_used: vec![0; n],
            metadata: CurveMetadata {
                source: CurveSource::Tabulated,
                potential: None,
                state: None,
                b_field: 0.0,
                policy: None,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Finite chain `[-n, n]`, nonrandom couplings, site 0:
/// `delta prod_{j=1}^n cos^2(2 eps(j) t) cos(2 B t)`, accumulated in
/// increasing `j`.
pub fn nonrandom_finite(
    spec: &PotentialSpec,
    state: &InitialState,
    b_field: f64,
    n: u64,
    t: f64,
) -> f64 {
    let mut p = ScaledProduct::one();
    for j in 1..=n {
        let c = product::factor(t, spec.epsilon(j), 1.0);
        p.mul(c);
        p.mul(c);
    }
    state.delta() * p.value() * (2.0 * b_field * t).cos()
}

/// Infinite-volume site product `prod_k cos(2t J(i,i+k) eps(k)) cos(2t J(i-k,i) eps(k))`.
pub fn wp_site<C: Couplings + ?Sized>(
    couplings: &C,
    spec: &PotentialSpec,
    site: i64,
    t: f64,
    policy: &TruncationPolicy,
) -> Result<ProductEstimate> {
    product::site_product(couplings, spec, site, t, policy.tolerance, policy.max_terms)
}

/// Nonrandom infinite product `prod_k cos^2(2 t eps(k))`.
pub fn nonrandom_product(
    spec: &PotentialSpec,
    t: f64,
    policy: &TruncationPolicy,
) -> Result<ProductEstimate> {
    wp_site(&Uniform, spec, 0, t, policy)
}

/// Finite chain `[-n, n]` expectation at site `i0`, divided by `delta`.
/// Neighbours outside the chain contribute no factor.
pub fn random_finite<C: Couplings + ?Sized>(
    couplings: &C,
    spec: &PotentialSpec,
    i0: i64,
    n: u64,
    t: f64,
) -> Result<f64> {
    let half = n as i64;
    if i0.abs() > half {
        return Err(Error::SiteOutsideVolume { i0, n });
    }
    let mut p = ScaledProduct::one();
    let reach = (half - i0).max(i0 + half);
    for k in 1..=reach {
        let eps = spec.epsilon(k as u64);
        if i0 + k <= half {
            p.mul(product::factor(t, eps, couplings.pair(i0, i0 + k)));
        }
        if i0 - k >= -half {
            p.mul(product::factor(t, eps, couplings.pair(i0 - k, i0)));
        }
    }
    Ok(p.value())
}

/// Bound on `|random_finite(n) - wp_site|` at the centre site, excluding the
/// truncation error of `wp_site` itself: `min(2, 4 t^2 b^2 sum_{k>n} eps(k)^2)`.
pub fn volume_tail_bound(magnitude: Magnitude, spec: &PotentialSpec, n: u64, t: f64) -> f64 {
    let b = match magnitude {
        Magnitude::Unit => 1.0,
        Magnitude::Bounded(b) => b,
    };
    product::dropped_tail_bound(spec, t, b, n)
}

/// Sample `delta * wp * cos(2 B t)` over a grid, in parallel over time points.
pub fn curve(
    field: Option<(&CouplingField, i64)>,
    spec: &PotentialSpec,
    state: &InitialState,
    b_field: f64,
    grid: &TimeGrid,
    policy: &TruncationPolicy,
) -> Result<MagnetizationCurve> {
    policy.validate()?;
    let points: Vec<Result<ProductEstimate>> = grid
        .times()
        .par_iter()
        .map(|&t| match field {
            Some((f, site)) => wp_site(f, spec, site, t, policy),
            None => nonrandom_product(spec, t, policy),
        })
        .collect();

    let delta = state.delta();
    let n = grid.len();
    let mut values = Vec::with_capacity(n);
    let mut ln_abs = Vec::with_capacity(n);
    let mut certified_error = Vec::with_capacity(n);
    let mut terms_used = Vec::with_capacity(n);
    for (point, &t) in points.into_iter().zip(grid.times()) {
        let est = point?;
        let field_factor = (2.0 * b_field * t).cos();
        let scale = (delta * field_factor).abs();
        values.push(delta * est.value * field_factor);
        ln_abs.push(delta.abs().ln() + est.ln_abs + field_factor.abs().ln());
        certified_error.push(scale * est.certified_error);
        terms_used.push(est.terms_used);
    }
    let source = match field {
        Some((f, site)) => CurveSource::Field {
            disorder: f.spec(),
            sample_index: f.sample_index(),
            site,
        },
        None => CurveSource::Nonrandom,
    };
    Ok(MagnetizationCurve {
        grid: grid.clone(),
        values,
        ln_abs,
        certified_error,
        terms_used,
        metadata: CurveMetadata {
            source,
            potential: Some(spec.clone()),
            state: Some(*state),
            b_field,
            policy: Some(*policy),
        },
    })
}
