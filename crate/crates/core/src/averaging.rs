//! Disorder averages of the site products: closed-form `f_B`, `f_G`,
//! Monte Carlo ensembles of `X_m`, variance scans and pair covariances.
//!
//! Monte Carlo loops evaluate samples in parallel but always reduce them in
//! sample-index order, so every statistic is bit-identical for any number of
//! worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{CouplingField, DisorderSpec, Distribution};
use crate::dynamics::{
    nonrandom_product, wp_site, CurveMetadata, CurveSource, MagnetizationCurve, ProductEstimate,
    TimeGrid, TruncationPolicy,
};
use crate::error::{Error, Result};
use crate::potential::PotentialSpec;
use crate::product;
use crate::stats::{self, Running};

/// Sites `-m..=m`, `2m + 1` of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AveragingWindow {
    m: u64,
}

impl AveragingWindow {
    pub fn new(m: u64) -> Result<Self> {
        if m < 1 {
            return Err(Error::param("m", "averaging window needs m >= 1"));
        }
        Ok(Self { m })
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn site_count(&self) -> u64 {
        2 * self.m + 1
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> {
        let m = self.m as i64;
        -m..=m
    }
}

/// How a single site product is evaluated inside an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteEstimator {
    /// `wp_site` with its pointwise certificate.
    Certified,
    /// Head of realised couplings times the exact disorder mean of the tail.
    ///
    /// The tail of a site product is independent of its head, so the
    /// estimator has exactly the mean of the true product, and its
    /// root-mean-square deviation from it is at most
    /// `sqrt(expm1(4 t^4 sum_{k>M} eps(k)^4))` for Gaussian couplings. Two
    /// sites closer than the head length keep their exact joint law. With
    /// unit-magnitude couplings the tail is deterministic and this is the
    /// certified product.
    #[default]
    TailCompensated,
}

/// What is averaged per disorder sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observable {
    Site { site: i64 },
    Window { m: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisorderEnsembleReport {
    pub sample_count: u64,
    pub values: Vec<f64>,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub standard_error: f64,
}

impl DisorderEnsembleReport {
    fn from_values(values: Vec<f64>) -> Self {
        let stats: Running = values.iter().copied().collect();
        Self {
            sample_count: stats.count(),
            mean: stats.mean(),
            variance: stats.variance(),
            standard_error: stats.standard_error(),
            values,
        }
    }
}

/// Closed-form disorder average of the site product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticAverage {
    pub value: f64,
    /// `ln value`; finite where `value` underflows.
    pub ln_value: f64,
    pub certified_error: f64,
}

/// `f_B(t) = prod_k cos^2(2 t eps(k))` or `f_G(t) = exp(-2 t^2 sum_k eps(k)^2)`.
pub fn analytic_average(
    spec: &PotentialSpec,
    distribution: Distribution,
    t: f64,
    policy: &TruncationPolicy,
) -> Result<AnalyticAverage> {
    match distribution {
        Distribution::Bernoulli => {
            let est = nonrandom_product(spec, t, policy)?;
            Ok(AnalyticAverage {
                value: est.value,
                ln_value: est.ln_abs,
                certified_error: est.certified_error,
            })
        }
        Distribution::Gaussian => {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::param(
                    "t",
                    format!("time must be finite and >= 0, got {t}"),
                ));
            }
            let sum_sq = spec.tail_sum_sq(1)?.value;
            let ln_value = -2.0 * t * t * sum_sq;
            let value = ln_value.exp();
            let rel = 1e-13 * ln_value.abs() + 4.0 * f64::EPSILON;
            Ok(AnalyticAverage {
                value,
                ln_value,
                certified_error: value * rel.exp_m1(),
            })
        }
    }
}

/// `analytic_average` over a grid, in parallel over time points.
pub fn average_curve(
    spec: &PotentialSpec,
    distribution: Distribution,
    grid: &TimeGrid,
    policy: &TruncationPolicy,
) -> Result<MagnetizationCurve> {
    policy.validate()?;
    let points = grid
        .times()
        .par_iter()
        .map(|&t| analytic_average(spec, distribution, t, policy))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(MagnetizationCurve {
        grid: grid.clone(),
        values: points.iter().map(|p| p.value).collect(),
        ln_abs: points.iter().map(|p| p.ln_value).collect(),
        certified_error: points.iter().map(|p| p.certified_error).collect(),
        terms_used: vec![0; points.len()],
        metadata: CurveMetadata {
            source: CurveSource::Average { distribution },
            potential: Some(spec.clone()),
            state: None,
            b_field: 0.0,
            policy: Some(*policy),
        },
    })
}

/// Disorder means of one Gaussian factor `cos(2 J eps t)` and of its square:
/// `(exp(-eps^2 t^2), (1 + exp(-4 eps^2 t^2)) / 2)`.
pub fn single_factor_moments_gaussian(eps: f64, t: f64) -> (f64, f64) {
    let x = eps * eps * t * t;
    ((-x).exp(), 0.5 * (1.0 + (-4.0 * x).exp()))
}

/// One site product under the chosen estimator.
pub fn site_value(
    field: &CouplingField,
    spec: &PotentialSpec,
    site: i64,
    t: f64,
    policy: &TruncationPolicy,
    estimator: SiteEstimator,
) -> Result<ProductEstimate> {
    match (estimator, field.spec().distribution) {
        (SiteEstimator::Certified, _) | (_, Distribution::Bernoulli) => {
            wp_site(field, spec, site, t, policy)
        }
        (SiteEstimator::TailCompensated, Distribution::Gaussian) => {
            compensated_gaussian_site(field, spec, site, t, policy)
        }
    }
}

/// Root-mean-square bound for the tail-compensated Gaussian estimator with
/// head length `m`.
pub fn compensated_rms_bound(spec: &PotentialSpec, t: f64, m: u64) -> f64 {
    let t2 = t * t;
    (4.0 * t2 * t2 * spec.tail_power_sum(m + 1, 4.0))
        .exp_m1()
        .sqrt()
}

fn compensated_gaussian_site(
    field: &CouplingField,
    spec: &PotentialSpec,
    site: i64,
    t: f64,
    policy: &TruncationPolicy,
) -> Result<ProductEstimate> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::param(
            "t",
            format!("time must be finite and >= 0, got {t}"),
        ));
    }
    if t == 0.0 {
        return wp_site(field, spec, site, t, policy);
    }
    let m = product::smallest_head(policy.max_terms, |m| {
        compensated_rms_bound(spec, t, m) <= policy.tolerance
    })
    .ok_or(Error::TruncationFailure {
        t,
        achieved_bound: compensated_rms_bound(spec, t, policy.max_terms),
        max_terms: policy.max_terms,
        tolerance: policy.tolerance,
    })?;
    let mut p = product::head(field, spec, site, t, m);
    p.mul_exp(-2.0 * t * t * spec.tail_power_sum(m + 1, 2.0));
    Ok(ProductEstimate {
        value: p.value(),
        ln_abs: p.ln_abs(),
        certified_error: compensated_rms_bound(spec, t, m),
        terms_used: m,
    })
}

/// `X_m = sum_{i=-m}^{m} wp_i / (2m + 1)`, accumulated in increasing `i`.
pub fn empirical_x_m(
    field: &CouplingField,
    spec: &PotentialSpec,
    window: AveragingWindow,
    t: f64,
    policy: &TruncationPolicy,
    estimator: SiteEstimator,
) -> Result<f64> {
    let values = window
        .sites()
        .map(|site| Ok(site_value(field, spec, site, t, policy, estimator)?.value))
        .collect::<Result<Vec<f64>>>()?;
    Ok(window_mean(&values))
}

/// Mean taken relative to the first value, summed in order, so that equal
/// values average to themselves exactly.
fn window_mean(values: &[f64]) -> f64 {
    let first = values[0];
    let shift: f64 = values.iter().fold(0.0, |acc, v| acc + (v - first));
    first + shift / values.len() as f64
}

fn observe(
    field: &CouplingField,
    spec: &PotentialSpec,
    observable: Observable,
    t: f64,
    policy: &TruncationPolicy,
    estimator: SiteEstimator,
) -> Result<f64> {
    match observable {
        Observable::Site { site } => Ok(site_value(field, spec, site, t, policy, estimator)?.value),
        Observable::Window { m } => {
            empirical_x_m(field, spec, AveragingWindow::new(m)?, t, policy, estimator)
        }
    }
}

/// Evaluate `f(sample_index)` for every sample in parallel and return the
/// results in index order, surfacing the lowest-index error.
fn per_sample<T: Send>(samples: u64, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    let results: Vec<Result<T>> = (0..samples).into_par_iter().map(&f).collect();
    results.into_iter().collect()
}

/// Monte Carlo ensemble of an observable over `fork_sample(0..samples)`.
pub fn ensemble(
    spec: &PotentialSpec,
    disorder: &DisorderSpec,
    observable: Observable,
    t: f64,
    samples: u64,
    policy: &TruncationPolicy,
    estimator: SiteEstimator,
) -> Result<DisorderEnsembleReport> {
    if samples < 1 {
        return Err(Error::param("samples", "need at least one sample"));
    }
    let values = per_sample(samples, |s| {
        observe(
            &disorder.fork_sample(s),
            spec,
            observable,
            t,
            policy,
            estimator,
        )
    })?;
    Ok(DisorderEnsembleReport::from_values(values))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceRow {
    pub m: u64,
    pub t: f64,
    /// Unbiased sample variance of `X_m - analytic average`.
    pub variance: f64,
    /// Standard error of `variance`.
    pub stderr: f64,
    /// Sample mean of `(X_m - analytic average)^2`.
    pub mean_square: f64,
    pub samples: u64,
}

/// Fluctuations of `X~_m = X_m - Av(wp)` across disorder samples, per `m`.
#[allow(clippy::too_many_arguments)]
pub fn variance_scan(
    spec: &PotentialSpec,
    disorder: &DisorderSpec,
    m_list: &[u64],
    t: f64,
    samples: u64,
    policy: &TruncationPolicy,
    estimator: SiteEstimator,
) -> Result<Vec<VarianceRow>> {
    if samples < 2 {
        return Err(Error::param(
            "samples",
            "variance needs at least two samples",
        ));
    }
    let average = analytic_average(spec, disorder.distribution, t, policy)?.value;
    let windows = m_list
        .iter()
        .map(|&m| AveragingWindow::new(m))
        .collect::<Result<Vec<_>>>()?;
    let reach = windows.iter().map(|w| w.m()).max().unwrap_or(0) as i64;
    // Site values are shared by every window of a sample; each X_m is then
    // summed exactly as `empirical_x_m` would.
    let deviations: Vec<Vec<f64>> = per_sample(samples, |s| {
        let field = disorder.fork_sample(s);
        let sites = (-reach..=reach)
            .map(|i| Ok(site_value(&field, spec, i, t, policy, estimator)?.value))
            .collect::<Result<Vec<f64>>>()?;
        Ok(windows
            .iter()
            .map(|w| {
                let m = w.m() as i64;
                window_mean(&sites[(reach - m) as usize..=(reach + m) as usize]) - average
            })
            .collect())
    })?;
    Ok(windows
        .iter()
        .enumerate()
        .map(|(j, w)| {
            let d: Vec<f64> = deviations.iter().map(|row| row[j]).collect();
            let stats: Running = d.iter().copied().collect();
            let mean_square = d.iter().map(|d| d * d).sum::<f64>() / samples as f64;
            let stderr = if stats.variance() == 0.0 {
                0.0
            } else {
                stats::variance_standard_error(&d)
            };
            VarianceRow {
                m: w.m(),
                t,
                variance: stats.variance(),
                stderr,
                mean_square,
                samples,
            }
        })
        .collect())
}

/// Exact `Cov(wp_0, wp_k)` under the disorder average. The two products share
/// the single coupling `J(0, k)`, so for Gaussian couplings
/// `Cov = (Av cos^2 - (Av cos)^2) * prod(other factor means)`
/// `    = expm1(-2x)^2 / 2 * exp(-4 t^2 S + 2x)`, `x = eps(k)^2 t^2`,
/// `S = sum eps^2`. Bernoulli products are deterministic: zero.
pub fn pair_covariance_analytic(
    spec: &PotentialSpec,
    distribution: Distribution,
    t: f64,
    k: u64,
) -> Result<f64> {
    if k < 1 {
        return Err(Error::param("k", "pair distance must be >= 1"));
    }
    match distribution {
        Distribution::Bernoulli => Ok(0.0),
        Distribution::Gaussian => {
            let x = spec.epsilon(k).powi(2) * t * t;
            let shared = 0.5 * (-2.0 * x).exp_m1().powi(2);
            let sum_sq = spec.tail_sum_sq(1)?.value;
            Ok(shared * (-4.0 * t * t * sum_sq + 2.0 * x).exp())
        }
    }
}

/// Monte Carlo `Cov(wp_0, wp_k)` over `samples` disorder realizations, with
/// its standard error.
#[allow(clippy::too_many_arguments)]
pub fn pair_covariance_monte_carlo(
    spec: &PotentialSpec,
    disorder: &DisorderSpec,
    t: f64,
    k: u64,
    samples: u64,
    policy: &TruncationPolicy,
    estimator: SiteEstimator,
) -> Result<(f64, f64)> {
    if k < 1 {
        return Err(Error::param("k", "pair distance must be >= 1"));
    }
    if samples < 2 {
        return Err(Error::param(
            "samples",
            "covariance needs at least two samples",
        ));
    }
    let pairs = per_sample(samples, |s| {
        let field = disorder.fork_sample(s);
        let a = site_value(&field, spec, 0, t, policy, estimator)?.value;
        let b = site_value(&field, spec, k as i64, t, policy, estimator)?.value;
        Ok((a, b))
    })?;
    Ok(stats::covariance(&pairs))
}
