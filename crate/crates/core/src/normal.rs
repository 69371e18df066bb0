//! Standard normal density, distribution and hazard functions, and the
//! moments of a normal variable truncated from below.
//!
//! The complementary error function follows W. J. Cody's rational
//! Chebyshev approximations (Math. Comp. 23, 1969), which also give the
//! scaled complement `exp(x^2) erfc(x)` directly. The upper-tail hazard is
//! computed from the scaled complement, so no ratio of two vanishing
//! quantities is ever formed. Beyond [`ASYMPTOTIC_FROM`] the hazard and the
//! truncated-variance factor switch to their asymptotic series.

use crate::error::{Error, Result};
use crate::num::Real;

/// Point above which `hazard` and `variance_factor` use asymptotic series.
/// Both branches agree to better than 1e-12 relative here.
pub const ASYMPTOTIC_FROM: f64 = 12.0;

const ERF_THRESHOLD: f64 = 0.46875;
const ERFC_BIG: f64 = 26.543;

const A: [f64; 5] = [
    3.161_123_743_870_565_6,
    113.864_154_151_050_16,
    377.485_237_685_302,
    3_209.377_589_138_469_5,
    0.185_777_706_184_603_15,
];
const B: [f64; 4] = [23.601_290_952_344_122, 244.024_637_934_444_17, 1_282.616_526_077_372_3, 2_844.236_833_439_171];
const C: [f64; 9] = [
    0.564_188_496_988_670_1,
    8.883_149_794_388_376,
    66.119_190_637_141_63,
    298.635_138_197_400_1,
    881.952_221_241_769,
    1_712.047_612_634_070_6,
    2_051.078_377_826_071_5,
    1_230.339_354_797_997_2,
    2.153_115_354_744_038_5e-8,
];
const D: [f64; 8] = [
    15.744_926_110_709_835,
    117.693_950_891_312_5,
    537.181_101_862_009_9,
    1_621.389_574_566_690_2,
    3_290.799_235_733_459_6,
    4_362.619_090_143_247,
    3_439.367_674_143_721_6,
    1_230.339_354_803_749_4,
];
const P: [f64; 6] = [
    0.305_326_634_961_232_34,
    0.360_344_899_949_804_44,
    0.125_781_726_111_229_25,
    0.016_083_785_148_742_28,
    6.587_491_615_298_378e-4,
    0.016_315_387_137_302_098,
];
const Q: [f64; 5] = [
    2.568_520_192_289_822,
    1.872_952_849_923_460_5,
    0.527_905_102_951_428_4,
    0.060_518_341_312_441_32,
    0.002_335_204_976_268_691_8,
];

// lambda(x) - x ~ sum MILLS_EXCESS[k] / x^(2k+1)
const MILLS_EXCESS: [f64; 13] = [
    1.0,
    -2.0,
    10.0,
    -74.0,
    706.0,
    -8_162.0,
    110_410.0,
    -1_708_394.0,
    29_752_066.0,
    -576_037_442.0,
    12_277_827_850.0,
    -285_764_591_114.0,
    7_213_364_729_026.0,
];
// 1 + lambda(x)(x - lambda(x)) ~ sum VARIANCE_FACTOR[k] / x^(2k+2)
const VARIANCE_FACTOR: [f64; 12] = [
    1.0,
    -6.0,
    50.0,
    -518.0,
    6_354.0,
    -89_782.0,
    1_435_330.0,
    -25_625_910.0,
    505_785_122.0,
    -10_944_711_398.0,
    257_834_384_850.0,
    -6_572_585_595_622.0,
];

/// First and second moments of `Y | Y > c` for `Y ~ N(mu, sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedMoments<T> {
    pub mean: T,
    pub second_moment: T,
    pub variance: T,
}

#[inline]
fn l<T: Real>(x: f64) -> T {
    T::lit(x)
}

/// Horner evaluation with coefficients in ascending order.
fn poly<T: Real>(coeffs: &[f64], x: T) -> T {
    coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * x + l(c))
}

fn erf_small<T: Real>(z: T) -> T {
    ((((l::<T>(A[4]) * z + l(A[0])) * z + l(A[1])) * z + l(A[2])) * z + l(A[3]))
        / ((((z + l(B[0])) * z + l(B[1])) * z + l(B[2])) * z + l(B[3]))
}

/// `exp(y^2) erfc(y)` for `y > ERF_THRESHOLD`.
fn erfcx_tail<T: Real>(y: T) -> T {
    if y <= l(4.0) {
        let mut num = l::<T>(C[8]) * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + l(C[i])) * y;
            den = (den + l(D[i])) * y;
        }
        (num + l(C[7])) / (den + l(D[7]))
    } else {
        let z = (y * y).recip();
        let mut num = l::<T>(P[5]) * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + l(P[i])) * z;
            den = (den + l(Q[i])) * z;
        }
        let pq = z * (num + l(P[4])) / (den + l(Q[4]));
        (T::FRAC_2_SQRT_PI() / l(2.0) - pq) / y
    }
}

/// `exp(-y^2)` with the square split to limit rounding in the exponent.
fn exp_neg_square<T: Real>(y: T) -> T {
    let sixteen = l::<T>(16.0);
    let head = (y * sixteen).trunc() / sixteen;
    (-head * head).exp() * (-(y - head) * (y + head)).exp()
}

/// Complementary error function.
pub fn erfc<T: Real>(x: T) -> T {
    let y = x.abs();
    if y <= l(ERF_THRESHOLD) {
        return T::one() - x * erf_small(y * y);
    }
    let tail = if y >= l(ERFC_BIG) { T::zero() } else { erfcx_tail(y) * exp_neg_square(y) };
    if x < T::zero() {
        l::<T>(2.0) - tail
    } else {
        tail
    }
}

/// Scaled complementary error function `exp(x^2) erfc(x)` for `x >= 0`.
fn erfcx_nonneg<T: Real>(x: T) -> T {
    if x <= l(ERF_THRESHOLD) {
        let z = x * x;
        z.exp() * (T::one() - x * erf_small(z))
    } else {
        erfcx_tail(x)
    }
}

fn check_finite<T: Real>(x: T, name: &'static str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(name))
    }
}

pub(crate) fn pdf<T: Real>(x: T) -> T {
    (-(x * x) / l(2.0)).exp() / (T::TAU()).sqrt()
}

pub(crate) fn cdf<T: Real>(x: T) -> T {
    erfc(-x * T::FRAC_1_SQRT_2()) / l(2.0)
}

pub(crate) fn sf<T: Real>(x: T) -> T {
    erfc(x * T::FRAC_1_SQRT_2()) / l(2.0)
}

fn mills_excess_series<T: Real>(x: T) -> T {
    let t2 = (x * x).recip();
    poly(&MILLS_EXCESS, t2) / x
}

fn variance_factor_series<T: Real>(x: T) -> T {
    let t2 = (x * x).recip();
    poly(&VARIANCE_FACTOR, t2) * t2
}

pub(crate) fn hazard_unchecked<T: Real>(x: T) -> T {
    if x >= l(ASYMPTOTIC_FROM) {
        x + mills_excess_series(x)
    } else if x * T::FRAC_1_SQRT_2() > l(ERF_THRESHOLD) {
        // phi(x) / (erfc(x/sqrt2)/2) with the Gaussian factors cancelled.
        (l::<T>(2.0) / T::PI()).sqrt() / erfcx_nonneg(x * T::FRAC_1_SQRT_2())
    } else {
        pdf(x) / sf(x)
    }
}

/// `1 + lambda(x) (x - lambda(x))`: the variance of a standard normal
/// truncated below at `x`.
pub(crate) fn variance_factor_unchecked<T: Real>(x: T) -> T {
    if x >= l(ASYMPTOTIC_FROM) {
        variance_factor_series(x)
    } else {
        let h = hazard_unchecked(x);
        T::one() + h * (x - h)
    }
}

/// Standard normal density.
pub fn std_pdf<T: Real>(x: T) -> Result<T> {
    check_finite(x, "x")?;
    Ok(pdf(x))
}

/// Standard normal distribution function, evaluated through `erfc` so that
/// both tails keep relative accuracy.
pub fn std_cdf<T: Real>(x: T) -> Result<T> {
    check_finite(x, "x")?;
    Ok(cdf(x))
}

/// Upper tail `1 - Phi(x)`.
pub fn std_sf<T: Real>(x: T) -> Result<T> {
    check_finite(x, "x")?;
    Ok(sf(x))
}

/// Hazard of the standard normal (inverse Mills ratio),
/// `phi(x) / (1 - Phi(x))`. Finite for every finite `x`.
pub fn hazard<T: Real>(x: T) -> Result<T> {
    check_finite(x, "x")?;
    Ok(hazard_unchecked(x))
}

/// Variance of a standard normal truncated below at `eta`, i.e.
/// `1 + lambda(eta) (eta - lambda(eta))`.
pub fn variance_factor<T: Real>(eta: T) -> Result<T> {
    check_finite(eta, "eta")?;
    Ok(variance_factor_unchecked(eta))
}

/// Moments of `Y | Y > c` for `Y ~ N(mu, sigma^2)`.
pub fn truncated_moments<T: Real>(mu: T, sigma: T, c: T) -> Result<TruncatedMoments<T>> {
    check_finite(mu, "mu")?;
    check_finite(sigma, "sigma")?;
    check_finite(c, "c")?;
    if sigma <= T::zero() {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let eta = (c - mu) / sigma;
    check_finite(eta, "eta")?;
    let h = hazard_unchecked(eta);
    Ok(TruncatedMoments {
        mean: mu + sigma * h,
        second_moment: mu * mu + sigma * (sigma + (c + mu) * h),
        variance: sigma * sigma * variance_factor_unchecked(eta),
    })
}

/// Regression slope of `Y2` on `Y1` and the residual standard deviation for
/// a bivariate normal with SDs `sigma11`, `sigma22` and covariance `sigma12`.
pub fn conditional_slope_and_residual<T: Real>(sigma11: T, sigma12: T, sigma22: T) -> Result<(T, T)> {
    check_finite(sigma11, "sigma11")?;
    check_finite(sigma12, "sigma12")?;
    check_finite(sigma22, "sigma22")?;
    if sigma11 <= T::zero() || sigma22 <= T::zero() {
        return Err(Error::Domain(format!(
            "standard deviations must be positive, got sigma11={sigma11}, sigma22={sigma22}"
        )));
    }
    if sigma12.abs() >= sigma11 * sigma22 {
        return Err(Error::Domain(format!(
            "covariance {sigma12} not positive definite with sigma11={sigma11}, sigma22={sigma22}"
        )));
    }
    let slope = sigma12 / (sigma11 * sigma11);
    let rho = sigma12 / (sigma11 * sigma22);
    let residual_sd = sigma22 * ((T::one() - rho) * (T::one() + rho)).sqrt();
    Ok((slope, residual_sd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Phi(x) at 50 significant digits (mpmath).
    const CDF_TABLE: [(f64, f64); 33] = [
        (-8.0, 6.220_960_574_271_784e-16),
        (-7.5, 3.190_891_672_910_896_3e-14),
        (-7.0, 1.279_812_543_885_835e-12),
        (-6.5, 4.016_000_583_859_118e-11),
        (-6.0, 9.865_876_450_376_98e-10),
        (-5.5, 1.898_956_246_588_771_8e-8),
        (-5.0, 2.866_515_718_791_939e-7),
        (-4.5, 3.397_673_124_730_060_3e-6),
        (-4.0, 0.000_031_671_241_833_119_924),
        (-3.5, 0.000_232_629_079_035_525_04),
        (-3.0, 0.001_349_898_031_630_094_6),
        (-2.5, 0.006_209_665_325_776_135),
        (-2.0, 0.022_750_131_948_179_21),
        (-1.5, 0.066_807_201_268_858_07),
        (-1.0, 0.158_655_253_931_457_05),
        (-0.5, 0.308_537_538_725_986_9),
        (0.0, 0.5),
        (0.5, 0.691_462_461_274_013_1),
        (1.0, 0.841_344_746_068_542_9),
        (1.5, 0.933_192_798_731_141_9),
        (2.0, 0.977_249_868_051_820_8),
        (2.5, 0.993_790_334_674_223_8),
        (3.0, 0.998_650_101_968_369_9),
        (3.5, 0.999_767_370_920_964_5),
        (4.0, 0.999_968_328_758_166_9),
        (4.5, 0.999_996_602_326_875_3),
        (5.0, 0.999_999_713_348_428_1),
        (5.5, 0.999_999_981_010_437_5),
        (6.0, 0.999_999_999_013_412_3),
        (6.5, 0.999_999_999_959_84),
        (7.0, 0.999_999_999_998_720_1),
        (7.5, 0.999_999_999_999_968_1),
        (8.0, 0.999_999_999_999_999_3),
    ];

    // phi(x)/(1-Phi(x)) at 50 significant digits (mpmath).
    const HAZARD_TABLE: [(f64, f64); 14] = [
        (-10.0, 7.694_598_626_706_419e-23),
        (-5.0, 1.486_719_940_904_905_6e-6),
        (-2.0, 0.055_247_862_678_989_956),
        (-0.5, 0.509_160_433_837_033_5),
        (0.0, 0.797_884_560_802_865_4),
        (0.5, 1.141_077_770_368_064_6),
        (1.0, 1.525_135_276_160_981),
        (2.0, 2.373_215_532_822_841),
        (4.0, 4.225_607_144_489_471),
        (6.0, 6.158_482_604_544_599),
        (8.0, 8.121_368_112_236_112),
        (12.0, 12.082_214_175_254_284),
        (20.0, 20.049_753_068_527_85),
        (40.0, 40.024_968_847_207_26),
    ];

    #[test]
    fn pdf_values() {
        assert_relative_eq!(std_pdf(0.0).unwrap(), 0.398_942_280_401_432_7, max_relative = 1e-15);
        assert_eq!(std_pdf(1.0).unwrap(), std_pdf(-1.0).unwrap());
        assert_relative_eq!(std_pdf(-0.5).unwrap(), 0.352_065_326_764_299_5, max_relative = 1e-14);
    }

    #[test]
    fn cdf_matches_reference_to_1e14_absolute() {
        for (x, want) in CDF_TABLE {
            let got = std_cdf(x).unwrap();
            assert!((got - want).abs() <= 1e-14, "Phi({x}) = {got}, want {want}");
        }
        assert_eq!(std_cdf(0.0).unwrap(), 0.5);
    }

    #[test]
    fn lower_tail_keeps_relative_accuracy() {
        for (x, want) in CDF_TABLE.iter().filter(|(x, _)| *x < 0.0) {
            assert_relative_eq!(std_cdf(*x).unwrap(), *want, max_relative = 1e-13);
            assert_relative_eq!(std_sf(-*x).unwrap(), *want, max_relative = 1e-13);
        }
    }

    #[test]
    fn cdf_reflection() {
        for i in -80..=80 {
            let x = i as f64 * 0.1;
            let s = std_cdf(x).unwrap() + std_cdf(-x).unwrap();
            assert!((s - 1.0).abs() < 1e-15, "x={x}: {s}");
        }
    }

    #[test]
    fn hazard_matches_reference() {
        for (x, want) in HAZARD_TABLE {
            assert_relative_eq!(hazard(x).unwrap(), want, max_relative = 1e-13);
        }
        assert_relative_eq!(hazard(0.0).unwrap(), 2.0 * std_pdf(0.0).unwrap(), max_relative = 1e-15);
        assert_relative_eq!(hazard(-1.5).unwrap(), 0.138_789_750_458_850_76, max_relative = 1e-13);
    }

    #[test]
    fn hazard_branches_agree_at_crossovers() {
        let x = ASYMPTOTIC_FROM;
        let direct = (2.0 / std::f64::consts::PI).sqrt() / erfcx_nonneg(x * std::f64::consts::FRAC_1_SQRT_2);
        let series = x + mills_excess_series(x);
        assert_relative_eq!(direct, series, max_relative = 1e-12);
        let h = direct;
        assert_relative_eq!(1.0 + h * (x - h), variance_factor_series(x), max_relative = 1e-11);

        // ratio form against scaled form where both are well conditioned
        for x in [0.5, 0.66, 1.0, 3.0, 6.0] {
            let ratio = pdf(x) / sf(x);
            assert_relative_eq!(ratio, hazard_unchecked(x), max_relative = 1e-13);
        }
    }

    #[test]
    fn hazard_finite_in_overflow_region() {
        for x in [30.0f64, 100.0, 1e4, 1e8, 1e150, 1e300] {
            let h = hazard(x).unwrap();
            assert!(h.is_finite() && h >= x, "lambda({x}) = {h}");
        }
        assert_relative_eq!(hazard(30.0).unwrap(), 30.033_259_667_433_677, max_relative = 1e-14);
    }

    #[test]
    fn variance_factor_large_eta() {
        assert_relative_eq!(variance_factor(20.0).unwrap(), 0.002_463_261_615_052_163_6, max_relative = 1e-12);
        assert_relative_eq!(variance_factor(1000.0).unwrap(), 9.999_940_000_499_995e-7, max_relative = 1e-12);
    }

    #[test]
    fn non_finite_inputs_rejected() {
        assert_eq!(std_pdf(f64::NAN), Err(Error::NonFinite("x")));
        assert!(std_cdf(f64::INFINITY).is_err());
        assert!(hazard(f64::NEG_INFINITY).is_err());
        assert!(truncated_moments(0.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn truncated_moments_standard_case() {
        let m = truncated_moments(0.0, 1.0, -0.5).unwrap();
        assert_relative_eq!(m.mean, 0.509_160_433_837_033_5, max_relative = 1e-13);
        assert_relative_eq!(m.second_moment, 0.745_419_783_081_483_3, max_relative = 1e-13);
        assert_relative_eq!(m.variance, 0.486_175_435_696_367_1, max_relative = 1e-13);
    }

    #[test]
    fn truncated_moments_no_truncation_limit() {
        let (mu, sigma) = (1.7, 0.8);
        let m = truncated_moments(mu, sigma, mu - 40.0 * sigma).unwrap();
        assert_relative_eq!(m.mean, mu, max_relative = 1e-15);
        assert_relative_eq!(m.variance, sigma * sigma, max_relative = 1e-15);
    }

    #[test]
    fn truncated_moments_location_scale() {
        let m = truncated_moments(5.0, 2.0, -0.5).unwrap();
        assert_relative_eq!(m.mean, 5.0 + 2.0 * hazard(-2.75).unwrap(), max_relative = 1e-15);
        assert_relative_eq!(m.mean, 5.018_241_480_295_52, max_relative = 1e-13);
        assert_relative_eq!(m.variance, 3.899_339_106_771_27, max_relative = 1e-13);
    }

    #[test]
    fn truncated_moments_rejects_bad_sigma() {
        assert!(matches!(truncated_moments(0.0, 0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(truncated_moments(0.0, -1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn slope_and_residual() {
        let (s, r) = conditional_slope_and_residual(1.0, 0.6, 1.0).unwrap();
        assert_relative_eq!(s, 0.6, max_relative = 1e-15);
        assert_relative_eq!(r, 0.8, max_relative = 1e-15);
        assert_eq!(conditional_slope_and_residual(1.0, 0.0, 1.0).unwrap(), (0.0, 1.0));
        assert_eq!(conditional_slope_and_residual(2.0, 0.0, 3.0).unwrap(), (0.0, 3.0));
        assert!(conditional_slope_and_residual(1.0, 1.0, 1.0).is_err());
        assert!(conditional_slope_and_residual(1.0, -2.0, 1.0).is_err());
        assert!(conditional_slope_and_residual(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn single_precision() {
        let h: f32 = hazard(-0.5f32).unwrap();
        assert_relative_eq!(h, 0.509_160_43, max_relative = 1e-6);
        let m = truncated_moments(0.0f32, 1.0, -0.5).unwrap();
        assert_relative_eq!(m.variance, 0.486_175_44, max_relative = 1e-5);
    }
}
