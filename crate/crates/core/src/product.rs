//! Cosine-product kernel behind every decay factor.
//!
//! A site product is split into a head `k = 1..=M`, multiplied out factor by
//! factor, and a tail `k > M`:
//!
//! * unit-magnitude couplings (`|J| = 1`): the tail does not depend on the
//!   couplings, so `ln T = -2 sum_n c_n (2t)^{2n} sum_{k>M} eps(k)^{2n}` with
//!   `-ln cos x = sum_n c_n x^{2n}`. `M` is the last index with
//!   `2 t eps(k) > 1/2`, which keeps the series ratio below `1/pi^2`; the
//!   remainder after `N` terms is bounded by
//!   `2 zeta(2)/(N+1) * sum_k y_k^2 * y_max^{2N} / (1 - y_max^2)`,
//!   `y = 2x/pi`.
//! * bounded couplings (`|J| <= b`): the tail is dropped and
//!   `|1 - T| <= sum (1 - cos x_k) <= sum x_k^2 / 2 <= 4 t^2 b^2 sum_{k>M} eps(k)^2`
//!   certifies the cut.

use std::f64::consts::{LN_2, PI};

use crate::disorder::{Couplings, Magnitude};
use crate::error::{Error, Result};
use crate::potential::PotentialSpec;
use crate::special::neg_log_cos_coefficient;

const RESCALE_BELOW: f64 = 1.0 / (1u128 << 100) as f64 / (1u128 << 100) as f64;
const RESCALE_BITS: i64 = 200;
const MAX_SERIES_TERMS: u32 = 60;
/// Relative error allowed for the tail power sums (Hurwitz zeta evaluation).
const TAIL_SUM_REL_ERROR: f64 = 1e-13;
const ZETA_2: f64 = PI * PI / 6.0;

/// Product of factors in `[-1, 1]` kept as `mantissa * 2^exp2` so long
/// products never underflow to a spurious zero.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ScaledProduct {
    mantissa: f64,
    exp2: i64,
}

impl ScaledProduct {
    pub(crate) fn one() -> Self {
        Self {
            mantissa: 1.0,
            exp2: 0,
        }
    }

    #[inline]
    pub(crate) fn mul(&mut self, factor: f64) {
        self.mantissa *= factor;
        if self.mantissa.abs() < RESCALE_BELOW && self.mantissa != 0.0 {
            self.mantissa *= 2f64.powi(RESCALE_BITS as i32);
            self.exp2 -= RESCALE_BITS;
        }
    }

    /// Multiply by `exp(ln_factor)` for `ln_factor <= 0`.
    pub(crate) fn mul_exp(&mut self, ln_factor: f64) {
        let whole = (ln_factor / LN_2).floor();
        self.exp2 += whole as i64;
        self.mul((ln_factor - whole * LN_2).exp());
    }

    pub(crate) fn value(&self) -> f64 {
        if self.mantissa == 0.0 || self.exp2 < -2200 {
            return 0.0 * self.mantissa.signum();
        }
        let half = (self.exp2 / 2) as i32;
        let rest = (self.exp2 - half as i64) as i32;
        self.mantissa * 2f64.powi(half) * 2f64.powi(rest)
    }

    pub(crate) fn ln_abs(&self) -> f64 {
        self.mantissa.abs().ln() + self.exp2 as f64 * LN_2
    }
}

/// A decay factor with its certified error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductEstimate {
    /// The product; may underflow to zero when `ln_abs` is very negative.
    pub value: f64,
    /// `ln |value|`, finite whenever the product is nonzero.
    pub ln_abs: f64,
    /// Bound on `|value - exact|`.
    pub certified_error: f64,
    /// Number of distances `k` multiplied out explicitly.
    pub terms_used: u64,
}

impl ProductEstimate {
    fn unit() -> Self {
        Self {
            value: 1.0,
            ln_abs: 0.0,
            certified_error: 0.0,
            terms_used: 1,
        }
    }
}

/// `cos(2 t J eps)`; the argument is formed as `(2t eps) J` so `J = -1` and
/// `J = 1` give the same bits.
#[inline]
pub(crate) fn factor(t: f64, eps: f64, j: f64) -> f64 {
    (2.0 * t * eps * j).abs().cos()
}

/// Head of the site product: both neighbours at each distance `1..=m`,
/// right factor first.
pub(crate) fn head<C: Couplings + ?Sized>(
    couplings: &C,
    spec: &PotentialSpec,
    site: i64,
    t: f64,
    m: u64,
) -> ScaledProduct {
    let mut p = ScaledProduct::one();
    for k in 1..=m {
        let eps = spec.epsilon(k);
        let ki = k as i64;
        p.mul(factor(t, eps, couplings.pair(site, site + ki)));
        p.mul(factor(t, eps, couplings.pair(site - ki, site)));
    }
    p
}

/// `4 t^2 b^2 sum_{k>m} eps(k)^2`, capped at 2 (`|1 - T| <= 2` always).
pub(crate) fn dropped_tail_bound(spec: &PotentialSpec, t: f64, b: f64, m: u64) -> f64 {
    let tail = spec
        .tail_sum_sq(m + 1)
        .map(|s| s.upper_bound)
        .unwrap_or(f64::INFINITY);
    (4.0 * t * t * b * b * tail).min(2.0)
}

fn rounding_allowance(m: u64) -> f64 {
    (6.0 * m as f64 + 8.0) * f64::EPSILON
}

/// Site product `prod_k cos(2t J(i,i+k) eps(k)) cos(2t J(i-k,i) eps(k))`.
pub(crate) fn site_product<C: Couplings + ?Sized>(
    couplings: &C,
    spec: &PotentialSpec,
    site: i64,
    t: f64,
    tolerance: f64,
    max_terms: u64,
) -> Result<ProductEstimate> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::param(
            "t",
            format!("time must be finite and >= 0, got {t}"),
        ));
    }
    if t == 0.0 {
        return Ok(ProductEstimate::unit());
    }
    match couplings.magnitude() {
        Magnitude::Unit => unit_product(couplings, spec, site, t, tolerance, max_terms),
        Magnitude::Bounded(b) => bounded_product(couplings, spec, site, t, b, tolerance, max_terms),
    }
}

/// Head length after which every factor has `2 t eps(k) <= 1/2`.
pub(crate) fn series_head_len(spec: &PotentialSpec, t: f64) -> u64 {
    let first_small = spec.first_index_at_most(0.25 / t);
    let mut m = first_small.saturating_sub(1).max(1);
    if let Some(last) = spec.support() {
        m = m.min(last.max(1));
    }
    m
}

/// `ln` of the tail `prod_{k>m} cos^2(2 t eps(k))` and a bound on the
/// series remainder.
pub(crate) fn unit_tail_log(spec: &PotentialSpec, t: f64, m: u64) -> (f64, f64, u32) {
    if let Some(last) = spec.support() {
        if m >= last {
            return (0.0, 0.0, 0);
        }
    }
    let start = m + 1;
    let p2 = spec.tail_power_sum(start, 2.0);
    if p2 == 0.0 {
        return (0.0, 0.0, 0);
    }
    let ln_2t = (2.0 * t).ln();
    let y_max = 2.0 / PI * 2.0 * t * spec.epsilon(start);
    let y_max_sq = y_max * y_max;
    let sum_y_sq = (2.0 / PI * 2.0 * t).powi(2) * p2;

    let mut acc = 0.0;
    let mut used = 0;
    let mut remainder = f64::INFINITY;
    for n in 1..=MAX_SERIES_TERMS {
        let ln_power_sum = if n == 1 {
            p2.ln()
        } else {
            spec.tail_power_sum(start, 2.0 * n as f64).ln()
        };
        let term = neg_log_cos_coefficient(n) * (2.0 * n as f64 * ln_2t + ln_power_sum).exp();
        acc += term;
        used = n;
        remainder =
            2.0 * ZETA_2 / (n as f64 + 1.0) * sum_y_sq * y_max_sq.powi(n as i32) / (1.0 - y_max_sq);
        if remainder <= 1e-17 * acc.max(1.0) {
            break;
        }
    }
    (-2.0 * acc, remainder, used)
}

fn unit_product<C: Couplings + ?Sized>(
    couplings: &C,
    spec: &PotentialSpec,
    site: i64,
    t: f64,
    tolerance: f64,
    max_terms: u64,
) -> Result<ProductEstimate> {
    let m = series_head_len(spec, t);
    if m > max_terms {
        return Err(Error::TruncationFailure {
            t,
            achieved_bound: dropped_tail_bound(spec, t, 1.0, max_terms),
            max_terms,
            tolerance,
        });
    }
    let mut p = head(couplings, spec, site, t, m);
    let (ln_tail, remainder, series_terms) = unit_tail_log(spec, t, m);
    p.mul_exp(ln_tail);

    let ln_abs = p.ln_abs();
    let rel = remainder
        + TAIL_SUM_REL_ERROR * ln_tail.abs()
        + rounding_allowance(m)
        + 4.0 * series_terms as f64 * f64::EPSILON;
    let certified_error = ln_abs.exp() * rel.exp_m1();
    if certified_error > tolerance {
        return Err(Error::TruncationFailure {
            t,
            achieved_bound: certified_error,
            max_terms,
            tolerance,
        });
    }
    Ok(ProductEstimate {
        value: p.value(),
        ln_abs,
        certified_error,
        terms_used: m,
    })
}

/// Smallest `m` in `1..=max_terms` with `ok(m)`, for a predicate that is
/// monotone in `m`.
pub(crate) fn smallest_head(max_terms: u64, ok: impl Fn(u64) -> bool) -> Option<u64> {
    if ok(1) {
        return Some(1);
    }
    let mut hi = 2u64.min(max_terms);
    while !ok(hi) {
        if hi >= max_terms {
            return None;
        }
        hi = hi.saturating_mul(2).min(max_terms);
    }
    let mut lo = hi / 2;
    // invariant: !ok(lo), ok(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Smallest head with `dropped_tail_bound(m) <= target`.
pub(crate) fn bounded_head_len(
    spec: &PotentialSpec,
    t: f64,
    b: f64,
    target: f64,
    max_terms: u64,
) -> Option<u64> {
    smallest_head(max_terms, |m| dropped_tail_bound(spec, t, b, m) <= target)
}

#[allow(clippy::too_many_arguments)]
fn bounded_product<C: Couplings + ?Sized>(
    couplings: &C,
    spec: &PotentialSpec,
    site: i64,
    t: f64,
    b: f64,
    tolerance: f64,
    max_terms: u64,
) -> Result<ProductEstimate> {
    let failure = || Error::TruncationFailure {
        t,
        achieved_bound: dropped_tail_bound(spec, t, b, max_terms) + rounding_allowance(max_terms),
        max_terms,
        tolerance,
    };
    let m = bounded_head_len(spec, t, b, tolerance / 2.0, max_terms).ok_or_else(failure)?;
    let certified_error = dropped_tail_bound(spec, t, b, m) + rounding_allowance(m);
    if certified_error > tolerance {
        return Err(failure());
    }
    let p = head(couplings, spec, site, t, m);
    Ok(ProductEstimate {
        value: p.value(),
        ln_abs: p.ln_abs(),
        certified_error,
        terms_used: m,
    })
}
