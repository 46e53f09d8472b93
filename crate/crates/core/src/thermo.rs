//! Exact partition functions of the classical Ising energy
//! `E(s) = sum_{j<k} J(j,k) eps(k-j) s_j s_k` on the volume `[-n, n]`.
//!
//! All `2^(2n+1)` configurations are visited in Gray-code order, so each
//! step flips one spin and updates the local fields in `O(n)`. The sequence
//! is cut into fixed chunks that are summed independently and merged in
//! chunk order.

use std::f64::consts::LN_2;

use rayon::prelude::*;
use serde::Serialize;

use crate::disorder::{Couplings, DisorderSpec};
use crate::error::{Error, Result};
use crate::potential::PotentialSpec;
use crate::stats::Running;

/// Largest default half-width: `2^21` configurations.
pub const DEFAULT_N_MAX: u64 = 10;

const CHUNK: u64 = 4096;

/// `ln Z` split as `shift + ln(mantissa) + exponent ln 2` with
/// `mantissa` in `[1, 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct LogSum {
    shift: f64,
    ln_mantissa: f64,
    exponent: i64,
}

impl LogSum {
    fn value(&self) -> f64 {
        self.shift + self.ln_mantissa + self.exponent as f64 * LN_2
    }

    /// `value / sites`, exact for `exponent = sites` and zero remainder.
    fn per_site(&self, sites: u64) -> f64 {
        let l = sites as f64;
        (self.shift + self.ln_mantissa) / l + (self.exponent as f64 / l) * LN_2
    }
}

fn split_binary(sum: f64) -> (f64, i64) {
    let bits = sum.to_bits();
    let exponent = ((bits >> 52) & 0x7ff) as i64 - 1023;
    let mantissa = f64::from_bits((bits & ((1u64 << 52) - 1)) | (1023u64 << 52));
    (mantissa.ln(), exponent)
}

struct Volume {
    sites: usize,
    /// `w[a][b] = J(a,b) eps(|a-b|)`, symmetric with a zero diagonal.
    w: Vec<Vec<f64>>,
}

impl Volume {
    #[allow(clippy::needless_range_loop)]
    fn new<C: Couplings + ?Sized>(couplings: &C, spec: &PotentialSpec, n: u64) -> Self {
        let sites = 2 * n as usize + 1;
        let mut w = vec![vec![0.0; sites]; sites];
        for a in 0..sites {
            for b in a + 1..sites {
                let lo = a as i64 - n as i64;
                let hi = b as i64 - n as i64;
                let v = couplings.pair(lo, hi) * spec.epsilon((b - a) as u64);
                w[a][b] = v;
                w[b][a] = v;
            }
        }
        Self { sites, w }
    }

    /// Spin `a` is `-1` when bit `a` of `config` is set.
    fn spins(&self, config: u64) -> Vec<f64> {
        (0..self.sites)
            .map(|a| if config >> a & 1 == 1 { -1.0 } else { 1.0 })
            .collect()
    }

    /// Energies of Gray-code positions `start..end`.
    fn energies(&self, start: u64, end: u64) -> Vec<f64> {
        let mut s = self.spins(start ^ (start >> 1));
        let mut h: Vec<f64> = (0..self.sites)
            .map(|a| (0..self.sites).map(|b| self.w[a][b] * s[b]).sum())
            .collect();
        let mut e = 0.5 * s.iter().zip(&h).map(|(s, h)| s * h).sum::<f64>();
        let mut out = Vec::with_capacity((end - start) as usize);
        out.push(e);
        for pos in start + 1..end {
            let a = pos.trailing_zeros() as usize;
            e -= 2.0 * s[a] * h[a];
            let ds = -2.0 * s[a];
            s[a] = -s[a];
            for (hb, wb) in h.iter_mut().zip(&self.w[a]) {
                *hb += wb * ds;
            }
            out.push(e);
        }
        out
    }
}

fn log_partition_parts<C: Couplings + ?Sized>(
    couplings: &C,
    spec: &PotentialSpec,
    n: u64,
    beta: f64,
    n_max: u64,
    energy_shift: f64,
) -> Result<LogSum> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::param(
            "beta",
            format!("must be finite and > 0, got {beta}"),
        ));
    }
    if n > n_max {
        return Err(Error::VolumeTooLarge { n, n_max });
    }
    let volume = Volume::new(couplings, spec, n);
    let total = 1u64 << volume.sites;
    let chunks = total.div_ceil(CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(total);
            let x: Vec<f64> = volume
                .energies(start, end)
                .into_iter()
                .map(|e| -beta * (e + energy_shift))
                .collect();
            let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (m, x.iter().map(|v| (v - m).exp()).sum::<f64>())
        })
        .collect();
    let shift = partial
        .iter()
        .map(|p| p.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = partial.iter().map(|(m, s)| s * (m - shift).exp()).sum();
    let (ln_mantissa, exponent) = split_binary(sum);
    Ok(LogSum {
        shift,
        ln_mantissa,
        exponent,
    })
}

/// `ln Z_n = ln sum_s exp(-beta E(s))` over the `2^(2n+1)` spin
/// configurations of `[-n, n]`. Rejects `n > DEFAULT_N_MAX`.
pub fn log_partition_exact<C: Couplings + ?Sized>(
    couplings: &C,
    spec: &PotentialSpec,
    n: u64,
    beta: f64,
) -> Result<f64> {
    log_partition_with_limit(couplings, spec, n, beta, DEFAULT_N_MAX)
}

pub fn log_partition_with_limit<C: Couplings + ?Sized>(
    couplings: &C,
    spec: &PotentialSpec,
    n: u64,
    beta: f64,
    n_max: u64,
) -> Result<f64> {
    Ok(log_partition_parts(couplings, spec, n, beta, n_max, 0.0)?.value())
}

/// `f_n = -ln Z_n / (beta (2n + 1))`.
pub fn free_energy_per_site<C: Couplings + ?Sized>(
    couplings: &C,
    spec: &PotentialSpec,
    n: u64,
    beta: f64,
) -> Result<f64> {
    let parts = log_partition_parts(couplings, spec, n, beta, DEFAULT_N_MAX, 0.0)?;
    Ok(-parts.per_site(2 * n + 1) / beta)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThermoSample {
    pub n: u64,
    pub beta: f64,
    pub sample_index: u64,
    pub log_z: f64,
    pub free_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThermoSummary {
    pub n: u64,
    pub beta: f64,
    pub mean: f64,
    /// Sample standard deviation of `f_n` across disorder samples.
    pub std_dev: f64,
    pub standard_error: f64,
    pub samples: Vec<ThermoSample>,
}

/// Free energies of `fork_sample(0..samples)` for each `n`.
pub fn self_averaging_report(
    spec: &PotentialSpec,
    disorder: &DisorderSpec,
    n_list: &[u64],
    beta: f64,
    samples: u64,
) -> Result<Vec<ThermoSummary>> {
    if samples < 10 {
        return Err(Error::param("samples", "need at least 10 samples"));
    }
    n_list
        .iter()
        .map(|&n| {
            let rows = (0..samples)
                .into_par_iter()
                .map(|s| {
                    let field = disorder.fork_sample(s);
                    let parts = log_partition_parts(&field, spec, n, beta, DEFAULT_N_MAX, 0.0)?;
                    Ok(ThermoSample {
                        n,
                        beta,
                        sample_index: s,
                        log_z: parts.value(),
                        free_energy: -parts.per_site(2 * n + 1) / beta,
                    })
                })
                .collect::<Vec<Result<ThermoSample>>>()
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            let stats: Running = rows.iter().map(|r| r.free_energy).collect();
            Ok(ThermoSummary {
                n,
                beta,
                mean: stats.mean(),
                std_dev: stats.std_dev(),
                standard_error: stats.standard_error(),
                samples: rows,
            })
        })
        .collect()
}
