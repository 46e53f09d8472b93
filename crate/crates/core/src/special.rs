//! Scalar special functions shared by the product kernels and the samplers.

use std::f64::consts::PI;

/// Even-index Bernoulli numbers B2..B16 for the Euler-Maclaurin tail.
const BERNOULLI_EVEN: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// Hurwitz zeta `sum_{k>=0} (a + k)^-s` for `s > 1`, `a > 0`.
///
/// Sums directly until the shifted argument is comfortably larger than `s`,
/// then closes with an eight-term Euler-Maclaurin correction. Relative
/// accuracy is close to machine precision over the range the kernels use.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    debug_assert!(s > 1.0 && a > 0.0);
    let threshold = (s + 20.0).max(12.0);
    let direct = if a < threshold {
        (threshold - a).ceil() as u64
    } else {
        0
    };
    let x = a + direct as f64;

    // Euler-Maclaurin remainder at x.
    let x_pow = x.powf(-s);
    let mut tail = x * x_pow / (s - 1.0) + 0.5 * x_pow;
    let inv_x2 = 1.0 / (x * x);
    // rising holds s(s+1)...(s+2j-2) / (2j)! * x^{-s-2j+1}
    let mut rising = s * x_pow / x;
    let mut factorial = 2.0;
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let term = b * rising / factorial;
        tail += term;
        let j2 = 2.0 * (j as f64 + 1.0);
        rising *= (s + j2 - 1.0) * (s + j2) * inv_x2;
        factorial *= (j2 + 1.0) * (j2 + 2.0);
    }

    // Smallest terms first.
    let mut sum = tail;
    for k in (0..direct).rev() {
        sum += (a + k as f64).powf(-s);
    }
    sum
}

/// Coefficient `c_n` of the expansion `-ln cos x = sum_{n>=1} c_n x^{2n}`,
/// `c_n = (4^n - 1) zeta(2n) / (n pi^{2n})`. Valid for `|x| < pi/2`.
pub fn neg_log_cos_coefficient(n: u32) -> f64 {
    debug_assert!(n >= 1);
    let two_over_pi_sq = (2.0 / PI).powi(2);
    let scale = two_over_pi_sq.powi(n as i32) * (1.0 - 0.25f64.powi(n as i32));
    scale * hurwitz_zeta(2.0 * n as f64, 1.0) / n as f64
}

/// Inverse of the standard normal CDF (Wichura's AS 241, PPND16).
///
/// Uses only `ln`, `sqrt` and rational arithmetic, so the result is a fixed
/// function of the input on any IEEE-754 platform with a faithful `ln`.
#[allow(clippy::inconsistent_digit_grouping)]
pub fn normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = (((((((2509.080_928_730_122_7 * r + 33_430.575_583_588_13) * r
            + 67265.770_927_008_7)
            * r
            + 45921.953_931_549_87)
            * r
            + 13_731.693_765_509_46)
            * r
            + 1971.590_950_306_551_4)
            * r
            + 133.141_667_891_784_38)
            * r
            + 3.387_132_872_796_366_5)
            * q;
        let den = ((((((5226.495_278_852_546 * r + 28729.085_735_721_943) * r
            + 39307.895_800_092_71)
            * r
            + 21213.794_301_586_596)
            * r
            + 5394.196_021_424_751)
            * r
            + 687.187_007_492_057_9)
            * r
            + 42.313_330_701_600_91)
            * r
            + 1.0;
        return num / den;
    }
    let tail_p = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail_p.ln()).sqrt();
    let value = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_6)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 0.015_198_666_563_616_457)
            * r
            + 0.148_103_976_427_480_08)
            * r
            + 0.689_767_334_985_1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 0.001_242_660_947_388_078_4)
            * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_9)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 0.014_875_361_290_850_615)
            * r
            + 0.136_929_880_922_735_8)
            * r
            + 0.599_832_206_555_887_9)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -value
    } else {
        value
    }
}

/// `ln sum_i exp(x_i)`, shifted by the maximum. Returns `-inf` for an empty
/// slice or when every entry is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hurwitz_matches_known_zeta_values() {
        assert!((hurwitz_zeta(2.0, 1.0) - PI * PI / 6.0).abs() < 1e-15);
        assert!((hurwitz_zeta(4.0, 1.0) - PI.powi(4) / 90.0).abs() < 1e-15);
        // zeta(2, 2) = zeta(2) - 1
        assert!((hurwitz_zeta(2.0, 2.0) - (PI * PI / 6.0 - 1.0)).abs() < 1e-15);
        // zeta(1.2) from the literature: 5.591582441177750...
        assert!((hurwitz_zeta(1.2, 1.0) - 5.591_582_441_177_75).abs() < 1e-12);
    }

    #[test]
    fn hurwitz_agrees_with_brute_force_at_large_shift() {
        let a = 1000.0;
        let s = 3.0;
        let brute: f64 = (0..2_000_000u64)
            .rev()
            .map(|k| (a + k as f64).powf(-s))
            .sum::<f64>()
            + (a + 2_000_000.0).powf(1.0 - s) / (s - 1.0);
        let value = hurwitz_zeta(s, a);
        assert!(
            ((value - brute) / value).abs() < 1e-12,
            "{value} vs {brute}"
        );
    }

    #[test]
    fn log_cos_coefficients_are_the_taylor_series() {
        assert!((neg_log_cos_coefficient(1) - 0.5).abs() < 1e-15);
        assert!((neg_log_cos_coefficient(2) - 1.0 / 12.0).abs() < 1e-15);
        assert!((neg_log_cos_coefficient(3) - 1.0 / 45.0).abs() < 1e-15);
        assert!((neg_log_cos_coefficient(4) - 17.0 / 2520.0).abs() < 1e-15);
        let x: f64 = 0.4;
        let series: f64 = (1..40)
            .map(|n| neg_log_cos_coefficient(n) * x.powi(2 * n as i32))
            .sum();
        assert!((series + x.cos().ln()).abs() < 1e-16);
    }

    #[test]
    fn normal_quantile_reference_points() {
        assert_eq!(normal_quantile(0.5), 0.0);
        assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-14);
        assert!((normal_quantile(0.001) + 3.090_232_306_167_813_5).abs() < 1e-13);
        assert!((normal_quantile(1e-10) + 6.361_340_902_404_056).abs() < 1e-12);
        assert!((normal_quantile(1e-300) + 37.047_096_299_361_2).abs() < 1e-9);
        for &p in &[2f64.powi(-40), 0.0078125, 0.1875, 0.375] {
            assert_eq!(normal_quantile(p), -normal_quantile(1.0 - p));
        }
    }

    #[test]
    fn log_sum_exp_survives_large_magnitudes() {
        let xs = [-1000.0, -1000.0];
        assert!((log_sum_exp(&xs) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }
}
