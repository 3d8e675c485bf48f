#![allow(clippy::excessive_precision)] // published coefficients are kept as printed

//! Standard normal distribution function, density and two-sided quantiles.

use serde::Serialize;

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

// Cody's rational Chebyshev approximations for the normal integral.
const A: [f64; 5] = [
    2.235_252_035_460_683_9,
    161.028_231_068_555_88,
    1_067.689_485_460_371,
    18_154.981_253_343_561,
    0.065_682_337_918_207_45,
];
const B: [f64; 4] = [
    47.202_581_904_688_24,
    976.098_551_737_776_7,
    10_260.932_208_618_978,
    45_507.789_335_026_73,
];
const C: [f64; 9] = [
    0.398_941_512_088_134_67,
    8.883_149_794_388_376,
    93.506_656_132_177_86,
    597.270_276_394_800_3,
    2_494.537_585_290_372_7,
    6_848.190_450_536_282,
    11_602.651_437_647_35,
    9_842.714_838_383_978,
    1.076_557_677_372_019_2e-8,
];
const D: [f64; 8] = [
    22.266_688_044_328_116,
    235.387_901_782_625,
    1_519.377_599_407_554_8,
    6_485.558_298_266_761,
    18_615.571_640_885_1,
    34_900.952_721_145_98,
    38_912.003_286_093_27,
    19_685.429_676_859_99,
];
const P: [f64; 6] = [
    0.215_898_534_057_957,
    0.127_401_161_160_247_36,
    0.022_235_277_870_649_807,
    0.001_421_619_193_227_893_5,
    2.911_287_495_116_879_2e-5,
    0.023_073_441_764_940_173,
];
const Q: [f64; 5] = [
    1.284_260_096_144_911_2,
    0.468_238_212_480_865_1,
    0.065_988_137_868_928_55,
    0.003_782_396_332_027_582_4,
    7.297_515_550_839_662e-5,
];

/// `exp(-y^2 / 2)` with `y^2` split so the exponent keeps full precision.
fn gaussian_factor(y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq * 0.5).exp() * (-del * 0.5).exp()
}

/// `(Φ(x), 1 - Φ(x))`, each with full relative accuracy in its own tail.
fn cdf_both(x: f64) -> (f64, f64) {
    let y = x.abs();
    if y <= 0.674_489_75 {
        let (mut num, mut den) = (0.0, 0.0);
        if y > f64::EPSILON * 0.5 {
            let xsq = x * x;
            num = A[4] * xsq;
            den = xsq;
            for i in 0..3 {
                num = (num + A[i]) * xsq;
                den = (den + B[i]) * xsq;
            }
        }
        let t = x * (num + A[3]) / (den + B[3]);
        return (0.5 + t, 0.5 - t);
    }
    let lower_of_minus_y = if y <= 32f64.sqrt() {
        let mut num = C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + C[i]) * y;
            den = (den + D[i]) * y;
        }
        gaussian_factor(y) * (num + C[7]) / (den + D[7])
    } else if y < 38.5 {
        let xsq = 1.0 / (x * x);
        let mut num = P[5] * xsq;
        let mut den = xsq;
        for i in 0..4 {
            num = (num + P[i]) * xsq;
            den = (den + Q[i]) * xsq;
        }
        let t = xsq * (num + P[4]) / (den + Q[4]);
        gaussian_factor(y) * (FRAC_1_SQRT_2PI - t) / y
    } else {
        0.0
    };
    if x > 0.0 {
        (1.0 - lower_of_minus_y, lower_of_minus_y)
    } else {
        (lower_of_minus_y, 1.0 - lower_of_minus_y)
    }
}

/// Standard normal distribution function.
pub fn cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    cdf_both(x).0
}

/// `1 - Φ(x)` without cancellation.
pub fn sf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    cdf_both(x).1
}

/// `P(a <= Z <= b)` for `Z ~ N(0, 1)`; zero when `a >= b`.
pub fn interval_prob(a: f64, b: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    // Difference of the smaller tails loses less precision.
    if a >= 0.0 {
        sf(a) - sf(b)
    } else if b <= 0.0 {
        cdf(b) - cdf(a)
    } else {
        1.0 - cdf(a) - sf(b)
    }
}

/// Wichura's AS 241 approximation to `Φ⁻¹(p)`, `0 < p < 1`.
fn quantile_as241(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q
            * (((((((r * 2_509.080_928_730_122_7 + 33_430.575_583_588_13) * r + 67_265.770_927_008_7) * r
                + 45_921.953_931_549_87)
                * r
                + 13_731.693_765_509_461)
                * r
                + 1_971.590_950_306_551_3)
                * r
                + 133.141_667_891_784_38)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((r * 5_226.495_278_852_546 + 28_729.085_735_721_943) * r + 39_307.895_800_092_71) * r
                + 21_213.794_301_586_596)
                * r
                + 5_394.196_021_424_751)
                * r
                + 687.187_007_492_057_9)
                * r
                + 42.313_330_701_600_91)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((r * 7.745_450_142_783_414e-4 + 0.022_723_844_989_269_184) * r + 0.241_780_725_177_450_6) * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((r * 1.050_750_071_644_416_9e-9 + 5.475_938_084_995_345e-4) * r + 0.015_198_666_563_616_457)
                * r
                + 0.148_103_976_427_480_07)
                * r
                + 0.689_767_334_985_1)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_759)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((r * 2.010_334_399_292_288_1e-7 + 2.711_555_568_743_487_6e-5) * r + 0.001_242_660_947_388_078_4) * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_9)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103)
            / (((((((r * 2.044_263_103_389_939_7e-15 + 1.421_511_758_316_446e-7) * r + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_133e-4)
                * r
                + 0.014_875_361_290_850_615)
                * r
                + 0.136_929_880_922_735_8)
                * r
                + 0.599_832_206_555_887_9)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// The `c >= 0` with `P(-c <= Z <= c) = level`, for `level` in `[0, 1)`.
pub fn two_sided_quantile(level: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::domain(format!(
            "two-sided coverage level must lie in [0, 1), got {level}"
        )));
    }
    if level == 0.0 {
        return Ok(0.0);
    }
    let tail = 0.5 * (1.0 - level);
    let mut c = -quantile_as241(tail);
    // Newton polish on the upper tail, sf(c) = tail.
    for _ in 0..2 {
        c += (sf(c) - tail) / pdf(c);
    }
    Ok(c)
}

/// Critical values used by the two-stage procedure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalQuantiles {
    pub alpha: f64,
    pub beta: f64,
    /// `P(-c_alpha <= Z <= c_alpha) = 1 - alpha`.
    pub c_alpha: f64,
    /// `P(-c <= Z <= c) = sqrt(1 - alpha)`, the per-interval level of the separate intervals.
    pub c_tilde_alpha: f64,
    /// Pretest critical value; zero when `beta = 1`, infinite when `beta = 0`.
    pub c_beta: f64,
}

impl NormalQuantiles {
    /// Quantiles for `0 < alpha < 1` and `0 < beta <= 1`.
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::domain(format!("beta must lie in (0, 1], got {beta}")));
        }
        Self::with_c_beta(alpha, beta, two_sided_quantile(1.0 - beta)?)
    }

    /// Like [`NormalQuantiles::new`] but also admits `beta = 0`, the never-reject pretest
    /// with `c_beta = +inf`. Only the large-sample evaluators accept an infinite `c_beta`.
    pub fn new_allow_never_reject(alpha: f64, beta: f64) -> Result<Self> {
        if beta == 0.0 {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
            }
            return Self::with_c_beta(alpha, beta, f64::INFINITY);
        }
        Self::new(alpha, beta)
    }

    fn with_c_beta(alpha: f64, beta: f64, c_beta: f64) -> Result<Self> {
        Ok(NormalQuantiles {
            alpha,
            beta,
            c_alpha: two_sided_quantile(1.0 - alpha)?,
            c_tilde_alpha: two_sided_quantile((1.0 - alpha).sqrt())?,
            c_beta,
        })
    }
}

/// `(c_alpha, c_tilde_alpha, c_beta)` for the given levels.
pub fn normal_quantiles(alpha: f64, beta: f64) -> Result<(f64, f64, f64)> {
    let q = NormalQuantiles::new(alpha, beta)?;
    Ok((q.c_alpha, q.c_tilde_alpha, q.c_beta))
}
