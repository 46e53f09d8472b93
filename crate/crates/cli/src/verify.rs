//! Built-in identity checks for the `verify` experiment.

use spinfade_core::averaging::{analytic_average, single_factor_moments_gaussian};
use spinfade_core::decay::vieta_reference;
use spinfade_core::dynamics::{curve, nonrandom_product, wp_site};
use spinfade_core::thermo::free_energy_per_site;
use spinfade_core::{
    DisorderSpec, Distribution, InitialState, PotentialSpec, TimeGrid, TruncationPolicy,
};

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, worst: f64, limit: f64) -> Check {
    Check {
        name,
        passed: worst < limit,
        detail: format!("max deviation {worst:e} (limit {limit:e})"),
    }
}

pub fn run_all() -> Vec<Check> {
    vec![
        vieta(),
        gaussian_moments(),
        gaussian_average(),
        bernoulli_degeneracy(),
        dyadic_curve(),
        free_spins(),
    ]
}

fn vieta() -> Check {
    let worst = (0..10_000)
        .map(|i| {
            let t = 50.0 * i as f64 / 9_999.0;
            let p: f64 = (1..=60).map(|k| (t / 2f64.powi(k)).cos().powi(2)).product();
            (p - vieta_reference(t)).abs()
        })
        .fold(0.0, f64::max);
    check("vieta_identity", worst, 1e-12)
}

/// Trapezoidal rule on `[-12, 12]`; exponentially accurate for these
/// smooth, rapidly decaying integrands.
fn gaussian_mean(g: impl Fn(f64) -> f64) -> f64 {
    let h = 1e-2;
    let n = 2400;
    let mut sum = 0.0;
    for i in 0..=n {
        let x = -12.0 + h * i as f64;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        sum += w * (-x * x).exp() * g(x);
    }
    sum * h / std::f64::consts::PI.sqrt()
}

fn gaussian_moments() -> Check {
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        for j in 0..10 {
            let (e, t) = (2.0 * i as f64 / 9.0, 2.0 * j as f64 / 9.0);
            let (c, c2) = single_factor_moments_gaussian(e, t);
            worst = worst
                .max((c - gaussian_mean(|x| (2.0 * x * e * t).cos())).abs())
                .max((c2 - gaussian_mean(|x| (2.0 * x * e * t).cos().powi(2))).abs());
        }
    }
    check("gaussian_factor_moments", worst, 1e-10)
}

fn gaussian_average() -> Check {
    let v = analytic_average(
        &PotentialSpec::dyadic(),
        Distribution::Gaussian,
        1.0,
        &TruncationPolicy::default(),
    )
    .map(|a| (a.value - (-1.0f64 / 6.0).exp()).abs())
    .unwrap_or(f64::INFINITY);
    check("gaussian_dyadic_average", v, 1e-14)
}

fn bernoulli_degeneracy() -> Check {
    let spec = PotentialSpec::power_law(0.8).expect("valid");
    let policy = TruncationPolicy::default();
    let mut mismatches = 0;
    let mut total = 0;
    for &t in &[0.5, 3.0, 11.0] {
        let Ok(exact) = nonrandom_product(&spec, t, &policy) else {
            mismatches += 1;
            continue;
        };
        for s in 0..10 {
            let field = DisorderSpec::new(Distribution::Bernoulli, 99).fork_sample(s);
            for site in -5..=5 {
                total += 1;
                match wp_site(&field, &spec, site, t, &policy) {
                    Ok(v) if v.value.to_bits() == exact.value.to_bits() => {}
                    _ => mismatches += 1,
                }
            }
        }
    }
    Check {
        name: "bernoulli_degeneracy",
        passed: mismatches == 0,
        detail: format!("{mismatches} of {total} site products differ bitwise"),
    }
}

fn dyadic_curve() -> Check {
    let state = InitialState::from_gamma(-1.0).expect("valid");
    let worst = TimeGrid::linear(0.0, 20.0, 2000)
        .and_then(|grid| {
            curve(
                None,
                &PotentialSpec::dyadic(),
                &state,
                0.0,
                &grid,
                &TruncationPolicy::default(),
            )
        })
        .map(|c| {
            c.grid
                .times()
                .iter()
                .zip(&c.values)
                .map(|(&t, v)| (v - state.delta() * vieta_reference(t)).abs())
                .fold(0.0, f64::max)
        })
        .unwrap_or(f64::INFINITY);
    check("dyadic_curve_vieta", worst, 1e-12)
}

fn free_spins() -> Check {
    let field = DisorderSpec::new(Distribution::Gaussian, 1).field();
    let empty = PotentialSpec::custom(vec![]).expect("valid");
    let mut worst: f64 = 0.0;
    for n in 0..=6 {
        for beta in [0.5, 1.0, 4.0] {
            let f = free_energy_per_site(&field, &empty, n, beta).unwrap_or(f64::NAN);
            let d = (f + std::f64::consts::LN_2 / beta).abs();
            worst = if d.is_nan() {
                f64::INFINITY
            } else {
                worst.max(d)
            };
        }
    }
    Check {
        name: "free_spin_free_energy",
        passed: worst == 0.0,
        detail: format!("max deviation {worst:e} (must be exactly 0)"),
    }
}
