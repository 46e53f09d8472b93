//! Decay-law diagnostics: window-maximum envelopes, the exponential-bound
//! classifier, stretched-exponential fits and the `f_B / f_G` ratio.
//!
//! Everything works on `ln |f|`, so curves far below the smallest double
//! remain usable.

use serde::{Deserialize, Serialize};

use crate::averaging::analytic_average;
use crate::disorder::Distribution;
use crate::dynamics::{MagnetizationCurve, TruncationPolicy};
use crate::error::{Error, Result};
use crate::potential::PotentialSpec;
use crate::stats::{fit_line, LineFit};

/// `(sin t / t)^2`, equal to 1 at `t = 0`.
pub fn vieta_reference(t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        (t.sin() / t).powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    pub t_center: f64,
    /// Grid time at which the window maximum is attained.
    pub t_at_max: f64,
    pub ln_max: f64,
    /// `exp(ln_max)`; may underflow to zero.
    pub max_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub window_width: f64,
    pub points: Vec<EnvelopePoint>,
    /// Windows whose maximum fell below the floor.
    pub dropped: usize,
}

impl Envelope {
    fn in_range(&self, t_min: f64, t_max: f64) -> Vec<EnvelopePoint> {
        self.points
            .iter()
            .filter(|p| p.t_at_max >= t_min && p.t_at_max <= t_max)
            .copied()
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeOptions {
    /// Windows with `max |f| <= floor` are dropped. The default keeps every
    /// window with a nonzero maximum, however small.
    pub floor: f64,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        Self { floor: 0.0 }
    }
}

/// Per-window maxima of `|f|` over consecutive windows of `window_width`
/// starting at the first grid time. Windows without grid points are skipped.
pub fn envelope(curve: &MagnetizationCurve, window_width: f64) -> Result<Envelope> {
    envelope_with(curve, window_width, EnvelopeOptions::default())
}

pub fn envelope_with(
    curve: &MagnetizationCurve,
    window_width: f64,
    options: EnvelopeOptions,
) -> Result<Envelope> {
    if curve.is_empty() {
        return Err(Error::EmptyCurve);
    }
    if !(window_width.is_finite() && window_width > 0.0) {
        return Err(Error::param(
            "window_width",
            format!("must be positive, got {window_width}"),
        ));
    }
    if options.floor.is_nan() || options.floor < 0.0 {
        return Err(Error::param("floor", "must be >= 0"));
    }
    let times = curve.grid.times();
    let start = times[0];
    let span = times[times.len() - 1] - start;
    if span < 3.0 * window_width {
        return Err(Error::param(
            "window_width",
            format!("grid span {span} covers fewer than 3 windows of {window_width}"),
        ));
    }
    let ln_floor = options.floor.ln();
    let mut points = Vec::new();
    let mut dropped = 0;
    let mut i = 0;
    while i < times.len() {
        let w = ((times[i] - start) / window_width).floor();
        let mut best = i;
        let mut j = i + 1;
        while j < times.len() && ((times[j] - start) / window_width).floor() == w {
            if curve.ln_abs[j] > curve.ln_abs[best] {
                best = j;
            }
            j += 1;
        }
        let ln_max = curve.ln_abs[best];
        if ln_max > ln_floor {
            points.push(EnvelopePoint {
                t_center: start + (w + 0.5) * window_width,
                t_at_max: times[best],
                ln_max,
                max_abs: ln_max.exp(),
            });
        } else {
            dropped += 1;
        }
        i = j;
    }
    Ok(Envelope {
        window_width,
        points,
        dropped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayClass {
    /// Slower than any exponential: `ln max / t` flattens.
    SubExponential,
    /// Stable exponential rate.
    ExponentialCompatible,
    /// Rate grows without bound.
    SuperExponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierThresholds {
    /// Late/early slope ratios inside `[1/r, r]` count as a stable rate.
    pub slope_ratio: f64,
    pub min_points: usize,
}

impl Default for ClassifierThresholds {
    fn default() -> Self {
        Self {
            slope_ratio: 1.15,
            min_points: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub class: DecayClass,
    /// Slope of `ln max` against `t` over the earlier half of the points.
    pub early_slope: f64,
    pub late_slope: f64,
    /// Whole-range fit.
    pub slope: f64,
    pub rms_residual: f64,
    pub points: usize,
}

/// Compare the decay rate of the envelope over the first and second halves
/// of the points with `t >= t_min`.
pub fn exponential_bound_test(env: &Envelope, t_min: f64) -> Result<Classification> {
    exponential_bound_test_with(env, t_min, ClassifierThresholds::default())
}

pub fn exponential_bound_test_with(
    env: &Envelope,
    t_min: f64,
    thresholds: ClassifierThresholds,
) -> Result<Classification> {
    let pts = env.in_range(t_min, f64::INFINITY);
    let needed = thresholds.min_points.max(4);
    if pts.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            got: pts.len(),
        });
    }
    let line = |p: &[EnvelopePoint]| -> Result<LineFit> {
        let xs: Vec<f64> = p.iter().map(|p| p.t_at_max).collect();
        let ys: Vec<f64> = p.iter().map(|p| p.ln_max).collect();
        fit_line(&xs, &ys).ok_or(Error::InsufficientData {
            needed,
            got: p.len(),
        })
    };
    let half = pts.len() / 2;
    let early = line(&pts[..half])?.slope;
    let late = line(&pts[half..])?.slope;
    let whole = line(&pts)?;
    let r = thresholds.slope_ratio;
    let class = if early >= 0.0 {
        if late < 0.0 {
            DecayClass::SuperExponential
        } else {
            DecayClass::SubExponential
        }
    } else {
        let ratio = late / early;
        if ratio > r {
            DecayClass::SuperExponential
        } else if ratio < 1.0 / r {
            DecayClass::SubExponential
        } else {
            DecayClass::ExponentialCompatible
        }
    };
    Ok(Classification {
        class,
        early_slope: early,
        late_slope: late,
        slope: whole.slope,
        rms_residual: whole.rms_residual,
        points: pts.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StretchedFit {
    /// `p` in `max ~ C0 exp(-d t^p)`.
    pub exponent: f64,
    /// `d`.
    pub rate: f64,
    pub r_squared: f64,
    /// `ln C0`, the first window's maximum.
    pub ln_c0: f64,
}

/// Regress `ln(-ln(max / C0))` on `ln t` over envelope points with
/// `t_at_max` in `[t_range.0, t_range.1]`.
pub fn stretched_exponent_fit(env: &Envelope, t_range: (f64, f64)) -> Result<StretchedFit> {
    let first = env.points.first().ok_or(Error::EmptyCurve)?;
    let ln_c0 = first.ln_max;
    let pts = env.in_range(t_range.0, t_range.1);
    if pts.len() < 10 {
        return Err(Error::InsufficientData {
            needed: 10,
            got: pts.len(),
        });
    }
    if pts.iter().any(|p| p.t_at_max <= 0.0 || p.ln_max >= ln_c0) {
        return Err(Error::NonDecayingInput);
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.t_at_max.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| (ln_c0 - p.ln_max).ln()).collect();
    let fit = fit_line(&xs, &ys).ok_or(Error::InsufficientData {
        needed: 10,
        got: pts.len(),
    })?;
    Ok(StretchedFit {
        exponent: fit.slope,
        rate: fit.intercept.exp(),
        r_squared: fit.r_squared,
        ln_c0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum DecayLaw {
    /// `C exp(-rate t)`.
    Exponential { rate: f64 },
    /// `C exp(-d t^exponent + c ln t)`.
    StretchedExp { exponent: f64, scale: f64 },
    /// `C exp(-scale t^2)`.
    QuadraticExp { scale: f64 },
    /// `C t^-power`.
    Algebraic { power: f64 },
}

/// Fitted bound constants: `C exp(-d t^p + c ln t)`. Laws without a term
/// report zero for it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConstants {
    pub ln_c: f64,
    pub d: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    /// `(t_at_max, max |f|)` of the points used.
    pub window_maxima: Vec<(f64, f64)>,
    pub law: DecayLaw,
    /// RMS residual in `ln max`.
    pub residual: f64,
    pub constants: FitConstants,
}

/// Least squares for `y ~ sum_j beta_j basis_j`, by normal equations and
/// Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn least_squares<const P: usize>(rows: &[[f64; P]], ys: &[f64]) -> Option<([f64; P], f64)> {
    let mut a = [[0.0; P]; P];
    let mut b = [0.0; P];
    for (row, y) in rows.iter().zip(ys) {
        for i in 0..P {
            b[i] += row[i] * y;
            for j in 0..P {
                a[i][j] += row[i] * row[j];
            }
        }
    }
    for col in 0..P {
        let piv = (col..P).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col] == 0.0 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..P {
            let f = a[r][col] / a[col][col];
            for c in col..P {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; P];
    for r in (0..P).rev() {
        let s: f64 = (r + 1..P).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    let sse: f64 = rows
        .iter()
        .zip(ys)
        .map(|(row, y)| {
            let pred: f64 = row.iter().zip(&x).map(|(r, c)| r * c).sum();
            (y - pred).powi(2)
        })
        .sum();
    Some((x, (sse / ys.len() as f64).sqrt()))
}

/// Fit each candidate law to `ln max` on the range and keep the one with the
/// smallest RMS residual.
pub fn fit_envelope(env: &Envelope, t_range: (f64, f64)) -> Result<EnvelopeFit> {
    let pts = env.in_range(t_range.0, t_range.1);
    let insufficient = Error::InsufficientData {
        needed: 10,
        got: pts.len(),
    };
    if pts.len() < 10 {
        return Err(insufficient);
    }
    let ts: Vec<f64> = pts.iter().map(|p| p.t_at_max).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.ln_max).collect();
    let two = |f: &dyn Fn(f64) -> f64| {
        let rows: Vec<[f64; 2]> = ts.iter().map(|&t| [1.0, -f(t)]).collect();
        least_squares(&rows, &ys)
    };

    let mut candidates: Vec<(DecayLaw, FitConstants, f64)> = Vec::new();
    if let Some((x, res)) = two(&|t| t) {
        let k = FitConstants {
            ln_c: x[0],
            d: x[1],
            c: 0.0,
        };
        candidates.push((DecayLaw::Exponential { rate: x[1] }, k, res));
    }
    if let Some((x, res)) = two(&|t| t * t) {
        let k = FitConstants {
            ln_c: x[0],
            d: x[1],
            c: 0.0,
        };
        candidates.push((DecayLaw::QuadraticExp { scale: x[1] }, k, res));
    }
    if ts.iter().all(|&t| t > 0.0) {
        if let Some((x, res)) = two(&|t| t.ln()) {
            let k = FitConstants {
                ln_c: x[0],
                d: 0.0,
                c: -x[1],
            };
            candidates.push((DecayLaw::Algebraic { power: x[1] }, k, res));
        }
        if let Ok(s) = stretched_exponent_fit(env, t_range) {
            let p = s.exponent;
            let rows: Vec<[f64; 3]> = ts.iter().map(|&t| [1.0, -t.powf(p), t.ln()]).collect();
            if let Some((x, res)) = least_squares(&rows, &ys) {
                let k = FitConstants {
                    ln_c: x[0],
                    d: x[1],
                    c: x[2],
                };
                candidates.push((
                    DecayLaw::StretchedExp {
                        exponent: p,
                        scale: x[1],
                    },
                    k,
                    res,
                ));
            }
        }
    }
    let (law, constants, residual) = candidates
        .into_iter()
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .ok_or(insufficient)?;
    Ok(EnvelopeFit {
        window_maxima: pts.iter().map(|p| (p.t_at_max, p.max_abs)).collect(),
        law,
        residual,
        constants,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub t: f64,
    pub ln_f_b: f64,
    pub ln_f_g: f64,
    /// `ln(f_B / f_G)`.
    pub log_ratio: f64,
    /// `exp(log_ratio)`, `+inf` when it overflows.
    pub ratio: f64,
    /// `f_G` underflowed to zero in double precision.
    pub f_g_underflow: bool,
}

/// `f_B(t) / f_G(t)` at each time, computed from logarithms.
pub fn ratio_divergence(
    spec: &PotentialSpec,
    times: &[f64],
    policy: &TruncationPolicy,
) -> Result<Vec<RatioPoint>> {
    times
        .iter()
        .map(|&t| {
            let b = analytic_average(spec, Distribution::Bernoulli, t, policy)?;
            let g = analytic_average(spec, Distribution::Gaussian, t, policy)?;
            let log_ratio = b.ln_value - g.ln_value;
            Ok(RatioPoint {
                t,
                ln_f_b: b.ln_value,
                ln_f_g: g.ln_value,
                log_ratio,
                ratio: log_ratio.exp(),
                f_g_underflow: g.value == 0.0,
            })
        })
        .collect()
}
