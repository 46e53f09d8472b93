//! One runner per experiment kind. Each writes its CSV (and JSON) artifacts
//! and returns human-readable summary lines.

use serde::Serialize;
use spinfade_core::averaging::{
    analytic_average, average_curve, ensemble, pair_covariance_analytic,
    pair_covariance_monte_carlo, variance_scan, Observable,
};
use spinfade_core::decay::{
    envelope_with, exponential_bound_test_with, fit_envelope, ratio_divergence,
    stretched_exponent_fit, ClassifierThresholds, DecayLaw, EnvelopeOptions, FitConstants,
    StretchedFit,
};
use spinfade_core::dynamics::curve;
use spinfade_core::thermo::self_averaging_report;
use spinfade_core::{Distribution, MagnetizationCurve};

use crate::config::{DecaySource, ExperimentConfig, ExperimentKind};
use crate::error::{CliError, Result};
use crate::output::Artifacts;
use crate::verify;

pub struct Outcome {
    pub summary: Vec<String>,
    pub passed: bool,
}

impl Outcome {
    fn ok(summary: Vec<String>) -> Self {
        Self {
            summary,
            passed: true,
        }
    }
}

fn core(kind: ExperimentKind) -> impl Fn(spinfade_core::Error) -> CliError {
    move |source| CliError::Core {
        experiment: kind.name(),
        source,
    }
}

pub fn execute(
    kind: ExperimentKind,
    config: &ExperimentConfig,
    out: &mut Artifacts,
) -> Result<Outcome> {
    config.check_for(kind)?;
    match kind {
        ExperimentKind::Curve => run_curve(config, out),
        ExperimentKind::DisorderAverage => run_disorder_average(config, out),
        ExperimentKind::VarianceScan => run_variance_scan(config, out),
        ExperimentKind::Covariance => run_covariance(config, out),
        ExperimentKind::DecayClassify => run_decay(config, out),
        ExperimentKind::Ratio => run_ratio(config, out),
        ExperimentKind::FreeEnergy => run_free_energy(config, out),
        ExperimentKind::Verify => run_verify(out),
    }
}

fn magnetization(config: &ExperimentConfig, kind: ExperimentKind) -> Result<MagnetizationCurve> {
    let spec = config.potential()?;
    let grid = config.grid()?;
    let site = config.curve.unwrap_or_default();
    let field = match config.disorder {
        Some(_) => Some(config.disorder_spec()?.fork_sample(site.sample_index)),
        None => None,
    };
    curve(
        field.as_ref().map(|f| (f, site.site)),
        spec,
        &config.state(),
        config.state.b_field,
        &grid,
        &config.truncation,
    )
    .map_err(core(kind))
}

#[derive(Serialize)]
struct CurveRow {
    t: f64,
    value: f64,
    certified_error: f64,
    terms_used: u64,
}

fn run_curve(config: &ExperimentConfig, out: &mut Artifacts) -> Result<Outcome> {
    let c = magnetization(config, ExperimentKind::Curve)?;
    let max_err = c.certified_error.iter().copied().fold(0.0, f64::max);
    out.csv(
        "curve.csv",
        (0..c.len()).map(|i| CurveRow {
            t: c.grid.times()[i],
            value: c.values[i],
            certified_error: c.certified_error[i],
            terms_used: c.terms_used[i],
        }),
    )?;
    Ok(Outcome::ok(vec![format!(
        "{} points, largest certified error {max_err:e}",
        c.len()
    )]))
}

#[derive(Serialize)]
struct AverageRow {
    t: f64,
    mc_mean: f64,
    mc_stderr: f64,
    analytic: f64,
    samples: u64,
}

fn run_disorder_average(config: &ExperimentConfig, out: &mut Artifacts) -> Result<Outcome> {
    let kind = ExperimentKind::DisorderAverage;
    let spec = config.potential()?;
    let disorder = config.disorder_spec()?;
    let section = config.average.expect("checked");
    let observable = match section.window_m {
        Some(m) => Observable::Window { m },
        None => Observable::Site { site: 0 },
    };
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for &t in config.grid()?.times() {
        let report = ensemble(
            spec,
            &disorder,
            observable,
            t,
            section.samples,
            &config.truncation,
            section.estimator,
        )
        .map_err(core(kind))?;
        let exact = analytic_average(spec, disorder.distribution, t, &config.truncation)
            .map_err(core(kind))?
            .value;
        if report.standard_error > 0.0 {
            worst = worst.max((report.mean - exact).abs() / report.standard_error);
        }
        rows.push(AverageRow {
            t,
            mc_mean: report.mean,
            mc_stderr: report.standard_error,
            analytic: exact,
            samples: report.sample_count,
        });
    }
    out.csv("disorder_average.csv", rows)?;
    Ok(Outcome::ok(vec![format!(
        "largest |mean - analytic| = {worst:.2} standard errors"
    )]))
}

#[derive(Serialize)]
struct VarianceCsvRow {
    m: u64,
    t: f64,
    var_estimate: f64,
    stderr: f64,
    samples: u64,
}

fn run_variance_scan(config: &ExperimentConfig, out: &mut Artifacts) -> Result<Outcome> {
    let section = config.variance.as_ref().expect("checked");
    let rows = variance_scan(
        config.potential()?,
        &config.disorder_spec()?,
        &section.m,
        section.t,
        section.samples,
        &config.truncation,
        section.estimator,
    )
    .map_err(core(ExperimentKind::VarianceScan))?;
    let summary = rows
        .iter()
        .map(|r| format!("m={}: var {:e} +- {:e}", r.m, r.variance, r.stderr))
        .collect();
    out.csv(
        "variance_scan.csv",
        rows.iter().map(|r| VarianceCsvRow {
            m: r.m,
            t: r.t,
            var_estimate: r.variance,
            stderr: r.stderr,
            samples: r.samples,
        }),
    )?;
    Ok(Outcome::ok(summary))
}

#[derive(Serialize)]
struct CovarianceRow {
    k: u64,
    t: f64,
    analytic: f64,
    mc_cov: Option<f64>,
    mc_stderr: Option<f64>,
    samples: u64,
}

fn run_covariance(config: &ExperimentConfig, out: &mut Artifacts) -> Result<Outcome> {
    let kind = ExperimentKind::Covariance;
    let section = config.covariance.as_ref().expect("checked");
    let spec = config.potential()?;
    let disorder = config.disorder_spec()?;
    let mut rows = Vec::new();
    for &k in &section.k {
        let analytic = pair_covariance_analytic(spec, disorder.distribution, section.t, k)
            .map_err(core(kind))?;
        let mc = if section.samples > 0 {
            Some(
                pair_covariance_monte_carlo(
                    spec,
                    &disorder,
                    section.t,
                    k,
                    section.samples,
                    &config.truncation,
                    section.estimator,
                )
                .map_err(core(kind))?,
            )
        } else {
            None
        };
        rows.push(CovarianceRow {
            k,
            t: section.t,
            analytic,
            mc_cov: mc.map(|m| m.0),
            mc_stderr: mc.map(|m| m.1),
            samples: section.samples,
        });
    }
    let summary = vec![format!("{} distances", rows.len())];
    out.csv("covariance.csv", rows)?;
    Ok(Outcome::ok(summary))
}

#[derive(Serialize)]
struct EnvelopeRow {
    t_center: f64,
    t_at_max: f64,
    envelope_max: f64,
    log_envelope: f64,
}

#[derive(Serialize)]
struct LawSummary {
    law: DecayLaw,
    residual: f64,
    constants: FitConstants,
}

#[derive(Serialize)]
struct Verdict {
    source: DecaySource,
    distribution: Option<Distribution>,
    classification: spinfade_core::decay::Classification,
    thresholds: ClassifierThresholds,
    envelope_points: usize,
    dropped_windows: usize,
    stretched_fit: Option<StretchedFit>,
    best_law: Option<LawSummary>,
}

fn run_decay(config: &ExperimentConfig, out: &mut Artifacts) -> Result<Outcome> {
    let kind = ExperimentKind::DecayClassify;
    let section = config.decay.expect("checked");
    let (c, distribution) = match section.source {
        DecaySource::Curve => (
            magnetization(config, kind)?,
            config.disorder.map(|d| d.distribution),
        ),
        DecaySource::Average => {
            let d = config.distribution()?;
            let c = average_curve(config.potential()?, d, &config.grid()?, &config.truncation)
                .map_err(core(kind))?;
            (c, Some(d))
        }
    };
    let env = envelope_with(
        &c,
        section.window_width,
        EnvelopeOptions {
            floor: section.floor,
        },
    )
    .map_err(core(kind))?;
    let mut thresholds = ClassifierThresholds::default();
    if let Some(r) = section.slope_ratio {
        thresholds.slope_ratio = r;
    }
    let classification =
        exponential_bound_test_with(&env, section.t_min, thresholds).map_err(core(kind))?;
    let (stretched_fit, best_law) = match section.fit_range {
        Some(range) => (
            Some(stretched_exponent_fit(&env, range).map_err(core(kind))?),
            fit_envelope(&env, range).ok().map(|f| LawSummary {
                law: f.law,
                residual: f.residual,
                constants: f.constants,
            }),
        ),
        None => (None, None),
    };
    out.csv(
        "decay_classify.csv",
        env.points.iter().map(|p| EnvelopeRow {
            t_center: p.t_center,
            t_at_max: p.t_at_max,
            envelope_max: p.max_abs,
            log_envelope: p.ln_max,
        }),
    )?;
    let mut summary = vec![format!("class {:?}", classification.class)];
    if let Some(s) = &stretched_fit {
        summary.push(format!(
            "stretched exponent {:.4} (r^2 {:.6})",
            s.exponent, s.r_squared
        ));
    }
    out.json(
        "decay_classify.verdict.json",
        &Verdict {
            source: section.source,
            distribution,
            classification,
            thresholds,
            envelope_points: env.points.len(),
            dropped_windows: env.dropped,
            stretched_fit,
            best_law,
        },
    )?;
    Ok(Outcome::ok(summary))
}

#[derive(Serialize)]
struct RatioRow {
    t: f64,
    ln_f_b: f64,
    ln_f_g: f64,
    log_ratio: f64,
    ratio: f64,
    f_g_underflow: bool,
}

fn run_ratio(config: &ExperimentConfig, out: &mut Artifacts) -> Result<Outcome> {
    let kind = ExperimentKind::Ratio;
    let section = config.ratio.expect("checked");
    let spec = config.potential()?;
    let fb = average_curve(
        spec,
        Distribution::Bernoulli,
        &config.grid()?,
        &config.truncation,
    )
    .map_err(core(kind))?;
    let env =
        envelope_with(&fb, section.window_width, EnvelopeOptions::default()).map_err(core(kind))?;
    let times: Vec<f64> = env
        .points
        .iter()
        .map(|p| p.t_at_max)
        .filter(|&t| t >= section.t_min)
        .collect();
    let points = ratio_divergence(spec, &times, &config.truncation).map_err(core(kind))?;
    let increasing = points.windows(2).all(|w| w[1].log_ratio > w[0].log_ratio);
    out.csv(
        "ratio.csv",
        points.iter().map(|p| RatioRow {
            t: p.t,
            ln_f_b: p.ln_f_b,
            ln_f_g: p.ln_f_g,
            log_ratio: p.log_ratio,
            ratio: p.ratio,
            f_g_underflow: p.f_g_underflow,
        }),
    )?;
    Ok(Outcome::ok(vec![format!(
        "{} envelope points, ratio strictly increasing: {increasing}",
        points.len()
    )]))
}

#[derive(Serialize)]
struct FreeEnergyRow {
    n: u64,
    beta: f64,
    sample_index: u64,
    f_n: f64,
}

#[derive(Serialize)]
struct FreeEnergySummaryRow {
    n: u64,
    beta: f64,
    mean_f: f64,
    std_f: f64,
    stderr: f64,
    samples: usize,
}

fn run_free_energy(config: &ExperimentConfig, out: &mut Artifacts) -> Result<Outcome> {
    let section = config.thermo.as_ref().expect("checked");
    let report = self_averaging_report(
        config.potential()?,
        &config.disorder_spec()?,
        &section.n,
        section.beta,
        section.samples,
    )
    .map_err(core(ExperimentKind::FreeEnergy))?;
    out.csv(
        "free_energy.csv",
        report.iter().flat_map(|r| {
            r.samples.iter().map(|s| FreeEnergyRow {
                n: s.n,
                beta: s.beta,
                sample_index: s.sample_index,
                f_n: s.free_energy,
            })
        }),
    )?;
    out.csv(
        "free_energy_summary.csv",
        report.iter().map(|r| FreeEnergySummaryRow {
            n: r.n,
            beta: r.beta,
            mean_f: r.mean,
            std_f: r.std_dev,
            stderr: r.standard_error,
            samples: r.samples.len(),
        }),
    )?;
    Ok(Outcome::ok(
        report
            .iter()
            .map(|r| {
                format!(
                    "n={}: f = {:.6} +- {:.2e} (std {:.3e})",
                    r.n, r.mean, r.standard_error, r.std_dev
                )
            })
            .collect(),
    ))
}

#[derive(Serialize)]
struct CheckRow {
    check: &'static str,
    passed: bool,
    detail: String,
}

fn run_verify(out: &mut Artifacts) -> Result<Outcome> {
    let checks = verify::run_all();
    let passed = checks.iter().all(|c| c.passed);
    let summary = checks
        .iter()
        .map(|c| {
            format!(
                "[{}] {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )
        })
        .collect();
    out.csv(
        "verify.csv",
        checks.into_iter().map(|c| CheckRow {
            check: c.name,
            passed: c.passed,
            detail: c.detail,
        }),
    )?;
    Ok(Outcome { summary, passed })
}
