//! Standard normal distribution: CDF, log-CDF, density and quantile.
//!
//! The CDF follows Cody's rational Chebyshev approximations (three ranges:
//! `|z| <= 0.674`, `|z| <= sqrt(32)`, and an asymptotic rational form in
//! `1/z^2` beyond), which gives close to full double precision relative
//! accuracy in both tails. The log-CDF reuses the same pieces so that the
//! lower tail never underflows. The quantile is Wichura's AS 241 followed by
//! one Halley refinement against the CDF.

// Published coefficients are kept digit-for-digit.
#![allow(clippy::excessive_precision)]

use crate::error::{invalid, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_677_94;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_741_78;
const SQRT_32: f64 = 5.656_854_249_492_380_195_2;

const A: [f64; 5] = [
    2.235_252_035_460_683_928_7,
    161.028_231_068_555_878_81,
    1_067.689_485_460_370_958_2,
    18_154.981_253_343_561_249,
    0.065_682_337_918_207_449_113,
];
const B: [f64; 4] =
    [47.202_581_904_688_241_87, 976.098_551_737_776_693_22, 10_260.932_208_618_978_205, 45_507.789_335_026_729_956];
const C: [f64; 9] = [
    0.398_941_512_088_134_667_64,
    8.883_149_794_388_375_941_2,
    93.506_656_132_177_855_979,
    597.270_276_394_800_262_26,
    2_494.537_585_290_372_671_1,
    6_848.190_450_536_282_332_6,
    11_602.651_437_647_350_124,
    9_842.714_838_383_978_021_8,
    1.076_557_677_372_019_231_7e-8,
];
const D: [f64; 8] = [
    22.266_688_044_328_115_691,
    235.387_901_782_624_998_61,
    1_519.377_599_407_554_805,
    6_485.558_298_266_760_755,
    18_615.571_640_885_098_091,
    34_900.952_721_145_977_266,
    38_912.003_286_093_271_411,
    19_685.429_676_859_990_727,
];
const P: [f64; 6] = [
    0.215_898_534_057_956_99,
    0.127_401_161_160_247_363_9,
    0.022_235_277_870_649_807,
    0.001_421_619_193_227_893_466,
    2.911_287_495_116_879_2e-5,
    0.023_073_441_764_940_173_03,
];
const Q: [f64; 5] = [
    1.284_260_096_144_911_21,
    0.468_238_212_480_865_118,
    0.065_988_137_868_928_551_5,
    0.003_782_396_332_027_582_44,
    7.297_515_550_839_662_05e-5,
];

/// Both tails of the standard normal at `z`, plain and in log form. Each tail
/// is accurate relative to itself, so `ccum` serves as the upper tail directly.
struct Tails {
    cum: f64,
    ccum: f64,
    log_cum: f64,
    log_ccum: f64,
}

fn tails(z: f64) -> Tails {
    let y = z.abs();
    if y <= 0.674_489_75 {
        let (xnum, xden) = if y > 1e-17 {
            let xsq = z * z;
            let mut xnum = A[4] * xsq;
            let mut xden = xsq;
            for i in 0..3 {
                xnum = (xnum + A[i]) * xsq;
                xden = (xden + B[i]) * xsq;
            }
            (xnum, xden)
        } else {
            (0.0, 0.0)
        };
        let temp = z * (xnum + A[3]) / (xden + B[3]);
        let cum = 0.5 + temp;
        let ccum = 0.5 - temp;
        return Tails { cum, ccum, log_cum: cum.ln(), log_ccum: ccum.ln() };
    }

    // Small tail (the one on the side of the sign of -z), in log form.
    let log_small = if y <= SQRT_32 {
        let mut xnum = C[8] * y;
        let mut xden = y;
        for i in 0..7 {
            xnum = (xnum + C[i]) * y;
            xden = (xden + D[i]) * y;
        }
        let temp = (xnum + C[7]) / (xden + D[7]);
        split_exponent(y) + temp.ln()
    } else {
        let xsq = 1.0 / (z * z);
        let mut xnum = P[5] * xsq;
        let mut xden = xsq;
        for i in 0..4 {
            xnum = (xnum + P[i]) * xsq;
            xden = (xden + Q[i]) * xsq;
        }
        let temp = xsq * (xnum + P[4]) / (xden + Q[4]);
        let temp = (FRAC_1_SQRT_2PI - temp) / y;
        split_exponent(y) + temp.ln()
    };
    let small = log_small.exp();
    let big = -small;
    let log_big = big.ln_1p();
    let big = 1.0 + big;
    if z > 0.0 {
        Tails { cum: big, ccum: small, log_cum: log_big, log_ccum: log_small }
    } else {
        Tails { cum: small, ccum: big, log_cum: log_small, log_ccum: log_big }
    }
}

/// `-y^2/2` evaluated as `-(a^2 + (y-a)(y+a))/2` with `a = trunc(16y)/16`,
/// which keeps the leading part exact.
fn split_exponent(y: f64) -> f64 {
    let a = (y * 16.0).trunc() / 16.0;
    let del = (y - a) * (y + a);
    -a * a * 0.5 - del * 0.5
}

fn check_finite(z: f64) -> Result<()> {
    if z.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("argument must be finite, got {z}")))
    }
}

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> Result<f64> {
    check_finite(z)?;
    Ok(cdf(z))
}

/// Upper tail `1 - Phi(z)`, accurate for large positive `z`.
pub fn norm_sf(z: f64) -> Result<f64> {
    check_finite(z)?;
    Ok(tails(z).ccum)
}

/// `log(1 - Phi(z))`, accurate throughout the upper tail.
pub fn log_norm_sf(z: f64) -> Result<f64> {
    check_finite(z)?;
    Ok(log_sf(z))
}

/// `log Phi(z)`, accurate throughout the lower tail.
pub fn log_norm_cdf(z: f64) -> Result<f64> {
    check_finite(z)?;
    Ok(log_cdf(z))
}

/// Standard normal density.
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

/// `log phi(z)`.
pub fn log_norm_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

// Unchecked kernels for internal hot loops. Infinite arguments are mapped to
// their limits.
pub(crate) fn cdf(z: f64) -> f64 {
    if z == f64::INFINITY {
        1.0
    } else if z == f64::NEG_INFINITY {
        0.0
    } else {
        tails(z).cum
    }
}

pub(crate) fn log_cdf(z: f64) -> f64 {
    if z == f64::INFINITY {
        0.0
    } else if z == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        tails(z).log_cum
    }
}

/// `log(1 - Phi(z))`.
pub(crate) fn log_sf(z: f64) -> f64 {
    if z == f64::INFINITY {
        f64::NEG_INFINITY
    } else if z == f64::NEG_INFINITY {
        0.0
    } else {
        tails(z).log_ccum
    }
}

/// `phi(z) / Phi(z)`, computed in log space so it stays finite in the lower tail.
pub(crate) fn inverse_mills_lower(z: f64) -> f64 {
    (log_norm_pdf(z) - log_cdf(z)).exp()
}

/// Standard normal quantile for `p` in the open unit interval.
///
/// `p = 0` and `p = 1` are rejected; callers that need the infinite limits
/// handle them explicitly.
pub fn norm_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("quantile argument must lie in (0, 1), got {p}")));
    }
    Ok(quantile(p))
}

pub(crate) fn quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = wichura(p);
    // One Halley step on whichever tail is smaller.
    let err = if p < 0.5 { cdf(x) - p } else { (1.0 - p) - cdf(-x) };
    let dens = norm_pdf(x);
    if dens <= 0.0 || !err.is_finite() {
        return x;
    }
    let t = err / dens;
    let refined = x - t / (1.0 + 0.5 * x * t);
    if refined.is_finite() {
        refined
    } else {
        x
    }
}

fn wichura(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q
            * (((((((r * 2_509.080_928_730_122_672_7 + 33_430.575_583_588_128_105) * r
                + 67_265.770_927_008_700_853)
                * r
                + 45_921.953_931_549_871_457)
                * r
                + 13_731.693_765_509_461_125)
                * r
                + 1_971.590_950_306_551_442_7)
                * r
                + 133.141_667_891_784_377_45)
                * r
                + 3.387_132_872_796_366_608)
            / (((((((r * 5_226.495_278_852_545_925 + 28_729.085_735_721_942_674) * r + 39_307.895_800_092_710_61)
                * r
                + 21_213.794_301_586_595_867)
                * r
                + 5_394.196_021_424_751_107_7)
                * r
                + 687.187_007_492_057_908_3)
                * r
                + 42.313_330_701_600_911_252)
                * r
                + 1.0);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((r * 7.745_450_142_783_414_076_4e-4 + 0.022_723_844_989_269_184_583_3) * r
            + 0.241_780_725_177_450_611_77)
            * r
            + 1.270_458_252_452_368_382_58)
            * r
            + 3.647_848_324_763_204_605_04)
            * r
            + 5.769_497_221_460_691_405_5)
            * r
            + 4.630_337_846_156_545_295_9)
            * r
            + 1.423_437_110_749_683_577_34)
            / (((((((r * 1.050_750_071_644_416_843_24e-9 + 5.475_938_084_995_344_946e-4) * r
                + 0.015_198_666_563_616_457_196_6)
                * r
                + 0.148_103_976_427_480_074_59)
                * r
                + 0.689_767_334_985_100_004_55)
                * r
                + 1.676_384_830_183_803_849_4)
                * r
                + 2.053_191_626_637_758_821_87)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((r * 2.010_334_399_292_288_132_65e-7 + 2.711_555_568_743_487_578_15e-5) * r
            + 0.001_242_660_947_388_078_438_6)
            * r
            + 0.026_532_189_526_576_123_093)
            * r
            + 0.296_560_571_828_504_891_23)
            * r
            + 1.784_826_539_917_291_335_8)
            * r
            + 5.463_784_911_164_114_369_9)
            * r
            + 6.657_904_643_501_103_777_2)
            / (((((((r * 2.044_263_103_389_939_785_64e-15 + 1.421_511_758_316_445_888_7e-7) * r
                + 1.846_318_317_510_054_681_8e-5)
                * r
                + 7.868_691_311_456_132_591e-4)
                * r
                + 0.014_875_361_290_850_614_852_5)
                * r
                + 0.136_929_880_922_735_805_31)
                * r
                + 0.599_832_206_555_887_937_69)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}
