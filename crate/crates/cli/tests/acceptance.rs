//! End-to-end acceptance criteria. Each test writes one `PASS`/`FAIL` line
//! straight to stderr so the verdicts show up even when output is captured.

use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use spinfade_cli::{run, ExperimentConfig, ExperimentKind, RunOptions};
use spinfade_core::averaging::{
    average_curve, ensemble, pair_covariance_analytic, pair_covariance_monte_carlo,
    single_factor_moments_gaussian, variance_scan, Observable, SiteEstimator,
};
use spinfade_core::decay::{
    envelope, exponential_bound_test, ratio_divergence, stretched_exponent_fit, vieta_reference,
    DecayClass,
};
use spinfade_core::dynamics::{
    curve, nonrandom_product, random_finite, volume_tail_bound, wp_site,
};
use spinfade_core::stats::fit_line;
use spinfade_core::thermo::{free_energy_per_site, self_averaging_report};
use spinfade_core::{
    Couplings, DisorderSpec, Distribution, InitialState, PotentialSpec, TimeGrid, TruncationPolicy,
};

fn verdict(id: u32, name: &str, passed: bool, detail: &str) {
    let line = format!(
        "acceptance {id:>2} [{}] {name}: {detail}\n",
        if passed { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(passed, "criterion {id} ({name}) failed: {detail}");
}

fn harmonic() -> PotentialSpec {
    PotentialSpec::power_law(1.0).unwrap()
}

#[test]
fn c01_vieta_identity() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for i in 0..10_000 {
        let t = 50.0 * i as f64 / 9_999.0;
        let mut p = 1.0;
        for k in 1..=60 {
            p *= (t / 2f64.powi(k)).cos().powi(2);
        }
        worst = worst.max((p - vieta_reference(t)).abs());
    }
    let elapsed = start.elapsed();
    verdict(
        1,
        "vieta identity",
        worst < 1e-12 && elapsed < Duration::from_secs(1),
        &format!("max |prod - (sin t/t)^2| = {worst:.2e} over 10^4 points in {elapsed:.2?}"),
    );
}

/// Adaptive Simpson quadrature.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

fn gaussian_expectation(g: impl Fn(f64) -> f64) -> f64 {
    let f = |x: f64| (-x * x).exp() * g(x) / std::f64::consts::PI.sqrt();
    (0..36)
        .map(|i| {
            let a = -9.0 + 0.5 * i as f64;
            adaptive_simpson(&f, a, a + 0.5, 1e-15)
        })
        .sum()
}

#[test]
fn c02_gaussian_characteristic_function() {
    let mut worst_mean: f64 = 0.0;
    let mut worst_sq: f64 = 0.0;
    let mut printed_form_ok = true;
    for i in 0..10 {
        for j in 0..10 {
            let eps = 2.0 * i as f64 / 9.0;
            let t = 2.0 * j as f64 / 9.0;
            let (c, c2) = single_factor_moments_gaussian(eps, t);
            let q = gaussian_expectation(|x| (2.0 * x * eps * t).cos());
            let q2 = gaussian_expectation(|x| (2.0 * x * eps * t).cos().powi(2));
            worst_mean = worst_mean.max((c - q).abs());
            worst_sq = worst_sq.max((c2 - q2).abs());
            let printed = 0.5 * (1.0 + 4.0 * (-t * t * eps * eps).exp());
            if (printed - q2).abs() < 1e-10 {
                printed_form_ok = false;
            }
        }
    }
    verdict(
        2,
        "gaussian characteristic function",
        worst_mean < 1e-10 && worst_sq < 1e-10 && printed_form_ok,
        &format!(
            "max deviation mean {worst_mean:.2e}, square {worst_sq:.2e}; \
             (1+4exp)/2 form rejected by quadrature: {printed_form_ok}"
        ),
    );
}

#[test]
fn c03_disorder_average_consistency() {
    let start = Instant::now();
    let report = ensemble(
        &PotentialSpec::dyadic(),
        &DisorderSpec::new(Distribution::Gaussian, 20_231),
        Observable::Site { site: 0 },
        1.0,
        20_000,
        &TruncationPolicy::default(),
        SiteEstimator::Certified,
    )
    .unwrap();
    let exact = (-1.0f64 / 6.0).exp();
    let z = (report.mean - exact) / report.standard_error;
    let elapsed = start.elapsed();
    verdict(
        3,
        "gaussian dyadic disorder average",
        z.abs() < 4.0 && elapsed < Duration::from_secs(60),
        &format!(
            "mean {:.7} +- {:.1e} vs exp(-1/6) = {exact:.7} ({z:+.2} SE) in {elapsed:.2?}",
            report.mean, report.standard_error
        ),
    );
}

#[test]
fn c04_bernoulli_degeneracy() {
    let policy = TruncationPolicy::default();
    let mut checked = 0;
    let mut mismatched = 0;
    for spec in [
        harmonic(),
        PotentialSpec::power_law(0.7).unwrap(),
        PotentialSpec::dyadic(),
    ] {
        for &t in &[0.3, 2.0, 9.5] {
            let exact = nonrandom_product(&spec, t, &policy).unwrap().value;
            for s in 0..100 {
                let field = DisorderSpec::new(Distribution::Bernoulli, 4_004).fork_sample(s);
                for site in -10..=10 {
                    let v = wp_site(&field, &spec, site, t, &policy).unwrap().value;
                    checked += 1;
                    if v.to_bits() != exact.to_bits() {
                        mismatched += 1;
                    }
                }
            }
        }
    }
    let rows = variance_scan(
        &harmonic(),
        &DisorderSpec::new(Distribution::Bernoulli, 4_004),
        &[1, 10, 50],
        1.7,
        100,
        &policy,
        SiteEstimator::Certified,
    )
    .unwrap();
    let zero = rows
        .iter()
        .all(|r| r.variance == 0.0 && r.mean_square == 0.0);
    verdict(
        4,
        "bernoulli degeneracy",
        mismatched == 0 && zero,
        &format!("{mismatched} of {checked} site products differ bitwise; variance scan exactly zero: {zero}"),
    );
}

#[test]
fn c05_covariance_decay() {
    let spec = harmonic();
    let cov = |k| pair_covariance_analytic(&spec, Distribution::Gaussian, 1.0, k).unwrap();
    let decreasing = (2..100).all(|k| cov(k + 1) < cov(k));
    let small = cov(100) < 1e-8;
    let scaled: Vec<f64> = (10..=100)
        .map(|k| cov(k) / spec.epsilon(k).powi(4))
        .collect();
    let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scaled.iter().copied().fold(0.0, f64::max);
    let band = hi / lo <= 10.0;

    let policy = TruncationPolicy::new(1e-3, 1 << 24).unwrap();
    let disorder = DisorderSpec::new(Distribution::Gaussian, 5_005);
    let mut worst_z: f64 = 0.0;
    for k in [2, 5, 10] {
        let (mc, se) = pair_covariance_monte_carlo(
            &spec,
            &disorder,
            1.0,
            k,
            100_000,
            &policy,
            SiteEstimator::TailCompensated,
        )
        .unwrap();
        worst_z = worst_z.max((mc - cov(k)).abs() / se);
    }
    verdict(
        5,
        "covariance decay",
        decreasing && small && band && worst_z < 5.0,
        &format!(
            "decreasing on [2,100]: {decreasing}; Cov(100) = {:.2e}; Cov/eps^4 band {:.2}; \
             Monte Carlo worst {worst_z:.2} SE",
            cov(100),
            hi / lo
        ),
    );
}

#[test]
fn c06_variance_vanishing() {
    let start = Instant::now();
    let rows = variance_scan(
        &harmonic(),
        &DisorderSpec::new(Distribution::Gaussian, 6_006),
        &[20, 200],
        1.0,
        5_000,
        &TruncationPolicy::new(1e-4, 1 << 24).unwrap(),
        SiteEstimator::TailCompensated,
    )
    .unwrap();
    let (a, b) = (&rows[0], &rows[1]);
    let pooled = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    let separation = (a.variance - b.variance) / pooled;
    let elapsed = start.elapsed();
    verdict(
        6,
        "variance vanishing",
        b.variance < a.variance && separation >= 3.0 && elapsed < Duration::from_secs(600),
        &format!(
            "Var(m=20) = {:.3e} +- {:.1e}, Var(m=200) = {:.3e} +- {:.1e}, separation {separation:.1} SE in {elapsed:.1?}",
            a.variance, a.stderr, b.variance, b.stderr
        ),
    );
}

#[test]
fn c07_decay_classification() {
    let policy = TruncationPolicy::default();
    let state = InitialState::from_gamma(-1.0).unwrap();

    let grid = TimeGrid::linear(0.0, 200.0, 100_001).unwrap();
    let vieta = curve(None, &PotentialSpec::dyadic(), &state, 0.0, &grid, &policy).unwrap();
    let env = envelope(&vieta, std::f64::consts::PI).unwrap();
    let pts: Vec<_> = env.points.iter().filter(|p| p.t_at_max >= 5.0).collect();
    let xs: Vec<f64> = pts.iter().map(|p| p.t_at_max.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.ln_max).collect();
    let slope = fit_line(&xs, &ys).unwrap().slope;
    let vieta_class = exponential_bound_test(&env, 5.0).unwrap().class;
    let vieta_ok = vieta_class == DecayClass::SubExponential && (slope + 2.0).abs() <= 0.1;

    let mut gauss_ok = true;
    let mut worst_log: f64 = 0.0;
    let gauss_grid = TimeGrid::linear(0.0, 20.0, 4001).unwrap();
    let pi2 = std::f64::consts::PI.powi(2);
    for (spec, sum_sq) in [
        (PotentialSpec::dyadic(), 1.0 / 12.0),
        (harmonic(), pi2 / 6.0),
        (PotentialSpec::power_law(2.0).unwrap(), pi2 * pi2 / 90.0),
    ] {
        let fg = average_curve(&spec, Distribution::Gaussian, &gauss_grid, &policy).unwrap();
        for (&t, &ln) in fg.grid.times().iter().zip(&fg.ln_abs) {
            worst_log = worst_log.max((ln + 2.0 * t * t * sum_sq).abs());
        }
        let class = exponential_bound_test(&envelope(&fg, 0.5).unwrap(), 1.0)
            .unwrap()
            .class;
        gauss_ok &= class == DecayClass::SuperExponential;
    }
    gauss_ok &= worst_log < 1e-10;

    let mut exponents = Vec::new();
    let fine = TimeGrid::linear(0.0, 110.0, 22_001).unwrap();
    for alpha in [0.6, 0.8, 1.0] {
        let spec = PotentialSpec::power_law(alpha).unwrap();
        let fb = average_curve(&spec, Distribution::Bernoulli, &fine, &policy).unwrap();
        let fit = stretched_exponent_fit(&envelope(&fb, 1.0).unwrap(), (10.0, 100.0)).unwrap();
        exponents.push((alpha, fit.exponent));
    }
    let stretched_ok = exponents.iter().all(|(a, p)| (p - 1.0 / a).abs() <= 0.15);

    verdict(
        7,
        "decay classification",
        vieta_ok && gauss_ok && stretched_ok,
        &format!(
            "dyadic {vieta_class:?} with log-log slope {slope:.3}; f_G super-exponential: {gauss_ok} \
             (max |ln f + 2t^2 S| = {worst_log:.1e}); stretched exponents {}",
            exponents
                .iter()
                .map(|(a, p)| format!("alpha {a}: {p:.3} (want {:.3})", 1.0 / a))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
}

#[test]
fn c08_ratio_divergence() {
    let policy = TruncationPolicy::default();
    let spec = PotentialSpec::dyadic();
    let grid = TimeGrid::linear(0.0, 40.0, 40_001).unwrap();
    let fb = average_curve(&spec, Distribution::Bernoulli, &grid, &policy).unwrap();
    let env = envelope(&fb, std::f64::consts::PI).unwrap();
    let times: Vec<f64> = env
        .points
        .iter()
        .map(|p| p.t_at_max)
        .filter(|&t| t >= 5.0)
        .collect();
    let pts = ratio_divergence(&spec, &times, &policy).unwrap();
    let increasing = pts.windows(2).all(|w| w[1].log_ratio > w[0].log_ratio);
    let by_20 = pts
        .iter()
        .rfind(|p| p.t <= 20.0)
        .map(|p| p.ratio)
        .unwrap_or(0.0);
    let closed = pts
        .iter()
        .map(|p| (p.log_ratio - (vieta_reference(p.t).ln() + p.t * p.t / 6.0)).abs())
        .fold(0.0, f64::max);
    verdict(
        8,
        "ratio divergence",
        increasing && by_20 > 1e3 && closed < 1e-9,
        &format!(
            "{} envelope points, strictly increasing: {increasing}; ratio at last point <= 20: {by_20:.3e}; \
             max log deviation from closed form {closed:.1e}",
            pts.len()
        ),
    );
}

#[test]
fn c09_volume_convergence() {
    let spec = harmonic();
    let policy = TruncationPolicy::new(1e-4, 1 << 24).unwrap();
    let disorder = DisorderSpec::new(Distribution::Gaussian, 9_009);
    let mut violations = 0;
    let mut closest: f64 = f64::INFINITY;
    for s in 0..20 {
        let field = disorder.fork_sample(s);
        let infinite = wp_site(&field, &spec, 0, 1.0, &policy).unwrap();
        for n in 10..=200 {
            let finite = random_finite(&field, &spec, 0, n, 1.0).unwrap();
            let bound =
                volume_tail_bound(field.magnitude(), &spec, n, 1.0) + infinite.certified_error;
            let gap = (finite - infinite.value).abs();
            closest = closest.min(bound - gap);
            if gap > bound {
                violations += 1;
            }
        }
    }

    let field = disorder.fork_sample(77);
    let t = 1.3;
    let f = |lo: i64, hi: i64, k: u64| {
        (2.0 * t * spec.epsilon(k) * field.coupling(lo, hi).unwrap())
            .abs()
            .cos()
    };
    let hand = [
        (-1, f(-1, 0, 1) * f(-1, 1, 2)),
        (0, f(0, 1, 1) * f(-1, 0, 1)),
        (1, f(0, 1, 1) * f(-1, 1, 2)),
    ];
    let exact = hand
        .iter()
        .all(|&(i0, want)| random_finite(&field, &spec, i0, 1, t).unwrap() == want);
    verdict(
        9,
        "volume convergence",
        violations == 0 && exact,
        &format!(
            "{violations} bound violations over 20 fields x n in [10,200] (smallest slack {closest:.2e}); \
             3-site boundary products exact: {exact}"
        ),
    );
}

#[test]
fn c10_thermo_self_averaging() {
    let start = Instant::now();
    let rows = self_averaging_report(
        &harmonic(),
        &DisorderSpec::new(Distribution::Gaussian, 1_010),
        &[3, 7],
        1.0,
        50,
    )
    .unwrap();
    let (s3, s7) = (rows[0].std_dev, rows[1].std_dev);
    let field = DisorderSpec::new(Distribution::Gaussian, 1_010).field();
    let empty = PotentialSpec::custom(vec![]).unwrap();
    let free = (0..=7).all(|n| {
        [0.25, 1.0, 3.0].iter().all(|&beta| {
            free_energy_per_site(&field, &empty, n, beta).unwrap() == -std::f64::consts::LN_2 / beta
        })
    });
    let elapsed = start.elapsed();
    verdict(
        10,
        "thermo self-averaging",
        s7 < s3 && free && elapsed < Duration::from_secs(300),
        &format!("std f_3 = {s3:.4e}, std f_7 = {s7:.4e}; free spins exact: {free}; {elapsed:.2?}"),
    );
}

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text).unwrap()
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn c11_determinism_across_workers() {
    let base = r#"
        version = 1
        seed = 1111
        [potential]
        family = "power_law"
        alpha = 1.0
        [disorder]
        distribution = "gaussian"
        [truncation]
        tolerance = 1e-4
        max_terms = 16777216
        [time]
        start = 0.0
        stop = 2.0
        count = 5
        [curve]
        site = 3
        sample_index = 2
        [average]
        samples = 200
        window_m = 5
        [variance]
        m = [5, 20]
        t = 1.0
        samples = 100
        [covariance]
        k = [2, 5]
        t = 1.0
        samples = 2000
        [thermo]
        n = [2, 4]
        beta = 1.0
        samples = 12
    "#;
    let kinds = [
        ExperimentKind::Curve,
        ExperimentKind::DisorderAverage,
        ExperimentKind::VarianceScan,
        ExperimentKind::Covariance,
        ExperimentKind::FreeEnergy,
    ];
    let tmp = tempfile::tempdir().unwrap();
    let mut identical = true;
    let mut compared = 0;
    for kind in kinds {
        let mut outputs = Vec::new();
        for workers in [1, 4] {
            let dir = tmp.path().join(format!("{kind}-{workers}"));
            let options = RunOptions {
                seed: None,
                out_dir: Some(dir.clone()),
                workers: Some(workers),
            };
            run(kind, &config(base), &options).unwrap();
            outputs.push(csv_bytes(&dir));
        }
        compared += outputs[0].len();
        identical &= !outputs[0].is_empty() && outputs[0] == outputs[1];
    }
    verdict(
        11,
        "determinism",
        identical,
        &format!("{compared} CSV files byte-identical with 1 and 4 workers: {identical}"),
    );
}
