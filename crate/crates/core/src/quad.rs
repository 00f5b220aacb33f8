//! Adaptive Gauss-Kronrod quadrature.
//!
//! The integrals in this crate are Stieltjes integrals against a
//! distribution, with integrands that kink where a rescaled argument
//! crosses a support boundary. The driver therefore accepts explicit
//! split points and handles semi-infinite domains by the rational
//! substitution y = a + t/(1-t).

use crate::error::{Error, Result};

/// 21-point Gauss-Kronrod abscissae (positive half, descending).
#[allow(clippy::excessive_precision)]
const XGK21: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

/// 10-point Gauss weights embedded in the 21-point rule.
#[allow(clippy::excessive_precision)]
const WG10: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// 21-point Kronrod weights.
#[allow(clippy::excessive_precision)]
const WGK21: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Value and error estimate of one quadrature evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

/// One 21-point Gauss-Kronrod panel on [a, b].
fn gk21_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut res_kronrod = fc * WGK21[10];
    let mut res_gauss = 0.0;
    let mut res_abs = res_kronrod.abs();
    let mut fv = [0.0f64; 21];
    fv[10] = fc;

    for (j, xk) in XGK21.iter().enumerate().take(10) {
        let dx = half * xk;
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[j] = f1;
        fv[20 - j] = f2;
        let fsum = f1 + f2;
        res_kronrod += WGK21[j] * fsum;
        res_abs += WGK21[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_gauss += WG10[j / 2] * fsum;
        }
    }

    let mean = res_kronrod * 0.5;
    let mut res_asc = WGK21[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK21[j] * ((fv[j] - mean).abs() + (fv[20 - j] - mean).abs());
    }

    let value = res_kronrod * half;
    res_abs *= half.abs();
    res_asc *= half.abs();

    // QUADPACK error rescaling.
    let raw = ((res_kronrod - res_gauss) * half).abs();
    let mut err = raw;
    if res_asc != 0.0 && raw != 0.0 {
        err = res_asc * 1.0f64.min((200.0 * raw / res_asc).powf(1.5));
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (value, err)
}

#[derive(Debug, Clone, Copy)]
struct Interval {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

/// Refinement budget. ~2000 panels is far beyond anything a well-posed
/// integrand here needs; hitting it signals a genuinely bad integrand.
const MAX_INTERVALS: usize = 4000;

/// Adaptive integration of `f` on [a, b] with optional interior split
/// points. Converges when the summed error bound drops below
/// `max(atol, rtol * |value|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    splits: &[f64],
    atol: f64,
    rtol: f64,
) -> Result<QuadResult> {
    if a.is_nan() || b.is_nan() || a >= b {
        return Ok(QuadResult {
            value: 0.0,
            abs_error: 0.0,
            evaluations: 0,
        });
    }
    let mut edges: Vec<f64> = Vec::with_capacity(splits.len() + 2);
    edges.push(a);
    for &s in splits {
        if s > a && s < b {
            edges.push(s);
        }
    }
    edges.push(b);
    edges.sort_by(|p, q| p.partial_cmp(q).unwrap());
    edges.dedup();

    let mut intervals: Vec<Interval> = Vec::new();
    let mut evals = 0usize;
    for w in edges.windows(2) {
        let (v, e) = gk21_panel(&f, w[0], w[1]);
        evals += 21;
        intervals.push(Interval {
            a: w[0],
            b: w[1],
            value: v,
            error: e,
        });
    }

    loop {
        let total: f64 = intervals.iter().map(|i| i.value).sum();
        let err: f64 = intervals.iter().map(|i| i.error).sum();
        if err <= atol.max(rtol * total.abs()) {
            return Ok(QuadResult {
                value: total,
                abs_error: err,
                evaluations: evals,
            });
        }
        if intervals.len() >= MAX_INTERVALS {
            return Err(Error::QuadratureNonConvergence {
                partial: total,
                bound: err,
            });
        }
        // Bisect the interval with the largest error bound.
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .unwrap();
        let Interval { a: wa, b: wb, .. } = intervals[worst];
        let mid = 0.5 * (wa + wb);
        if mid <= wa || mid >= wb {
            // Interval at floating-point resolution; accept what we have.
            let total: f64 = intervals.iter().map(|i| i.value).sum();
            let err: f64 = intervals.iter().map(|i| i.error).sum();
            return Ok(QuadResult {
                value: total,
                abs_error: err,
                evaluations: evals,
            });
        }
        let (v1, e1) = gk21_panel(&f, wa, mid);
        let (v2, e2) = gk21_panel(&f, mid, wb);
        evals += 42;
        intervals[worst] = Interval {
            a: wa,
            b: mid,
            value: v1,
            error: e1,
        };
        intervals.push(Interval {
            a: mid,
            b: wb,
            value: v2,
            error: e2,
        });
    }
}

/// Adaptive integration of `f` on [a, +inf) via y = a + t/(1-t), t in (0,1).
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    splits: &[f64],
    atol: f64,
    rtol: f64,
) -> Result<QuadResult> {
    // Map interior split points y > a into t-space.
    let mut t_splits: Vec<f64> = splits
        .iter()
        .filter(|&&y| y > a && y.is_finite())
        .map(|&y| (y - a) / (1.0 + (y - a)))
        .collect();
    // A mid split keeps the first panels from straddling the knee of the map.
    t_splits.push(0.5);
    let g = |t: f64| {
        let om = 1.0 - t;
        let y = a + t / om;
        if !y.is_finite() {
            return 0.0;
        }
        f(y) / (om * om)
    };
    integrate(g, 0.0, 1.0, &t_splits, atol, rtol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x * x, 0.0, 3.0, &[], 1e-12, 1e-12).unwrap();
        assert!((r.value - 9.0).abs() < 1e-12);
    }

    #[test]
    fn kinked_integrand_with_split() {
        // |x - 0.3| on [0,1]: exact 0.3^2/2 + 0.7^2/2 = 0.29
        let f = |x: f64| (x - 0.3f64).abs();
        let r = integrate(f, 0.0, 1.0, &[0.3], 1e-14, 1e-14).unwrap();
        assert!((r.value - 0.29).abs() < 1e-14);
    }

    #[test]
    fn semi_infinite_exponential() {
        let r = integrate_semi_infinite(|x| (-x).exp(), 0.0, &[], 1e-13, 1e-13).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12, "got {}", r.value);
    }

    #[test]
    fn semi_infinite_power_tail() {
        // integral_1^inf 2 x^-3 dx = 1
        let r = integrate_semi_infinite(|x| 2.0 * x.powi(-3), 1.0, &[], 1e-13, 1e-13).unwrap();
        assert!((r.value - 1.0).abs() < 1e-11, "got {}", r.value);
    }

    #[test]
    fn integrable_endpoint_singularity() {
        // integral_0^1 x^{-1/2} dx = 2, singular at 0.
        let r = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, &[], 1e-10, 1e-10).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8, "got {}", r.value);
    }

    #[test]
    fn empty_interval_is_zero() {
        let r = integrate(|x| x, 2.0, 2.0, &[], 1e-12, 1e-12).unwrap();
        assert_eq!(r.value, 0.0);
    }
}
