//! Numerical probes of tail-class membership and tail domination.
//!
//! Class membership (long-tailed L(gamma), subexponential S(gamma)) is an
//! asymptotic property; these probes evaluate the defining ratios on
//! finite grids and report values and trends. They produce evidence, not
//! proof, and their reports say so.

use rand::Rng;
use serde::Serialize;

use crate::dependence::DependenceModel;
use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::product_tail::{h_integral_tail, McEstimate};

/// One evaluation of a tail-ratio probe.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LongTailPoint {
    pub x: f64,
    pub ratio: f64,
    pub target: f64,
    /// |ratio / target - 1|.
    pub deviation: f64,
}

/// Shifted-tail ratios `tail(x - t) / tail(x)` against the target
/// `exp(gamma t)` that membership in L(gamma) requires in the limit.
///
/// Ratios are computed through the log tail, so probes far beyond the
/// underflow point of the plain tail stay exact. For lattice laws with
/// gamma > 0 the shift must be a whole number of lattice spans.
pub fn long_tail_ratio(
    spec: &DistributionSpec,
    gamma: f64,
    t: f64,
    x_grid: &[f64],
) -> Result<Vec<LongTailPoint>> {
    if t.is_nan() || t <= 0.0 {
        return Err(Error::Domain(format!("shift t must be positive, got {t}")));
    }
    if gamma < 0.0 {
        return Err(Error::Domain(format!("gamma must be >= 0, got {gamma}")));
    }
    if gamma > 0.0 {
        if let Some(span) = spec.lattice_span() {
            let steps = t / span;
            if (steps - steps.round()).abs() > 1e-9 {
                return Err(Error::Domain(format!(
                    "shift t = {t} is not a multiple of the lattice span {span}"
                )));
            }
        }
    }
    let target = (gamma * t).exp();
    Ok(x_grid
        .iter()
        .map(|&x| {
            let ratio = (spec.log_tail(x - t) - spec.log_tail(x)).exp();
            LongTailPoint {
                x,
                ratio,
                target,
                deviation: (ratio / target - 1.0).abs(),
            }
        })
        .collect())
}

/// One evaluation of the self-convolution ratio probe.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvolutionPoint {
    pub x: f64,
    pub conv_tail: f64,
    pub base_tail: f64,
    pub ratio: f64,
    /// 2c with c the exponential moment of order gamma.
    pub target: f64,
}

/// Tail of the independent sum of two copies of the law, by an oracle
/// that does not share code with any tail-integral machinery: an exact
/// atom convolution for discrete laws, and a quantile-grid trapezoid
/// Stieltjes sum (budget points, tail mass 1e-12 truncated on each side
/// with exact analytic continuation above) for continuous laws.
pub fn self_convolution_tail(spec: &DistributionSpec, x: f64, budget: usize) -> Result<f64> {
    if let Some(atoms) = spec.atoms() {
        let mut tail = 0.0;
        for &(yi, pi) in &atoms {
            for &(yj, pj) in &atoms {
                if yi + yj > x {
                    tail += pi * pj;
                }
            }
        }
        return Ok(tail);
    }
    let n = budget.max(1_024);
    let lo = spec.quantile_at(1e-12);
    let hi = spec.quantile_at(1.0 - 1e-12).max(2.0 * x.abs()).max(lo + 1.0);
    let grid: Vec<f64> = if lo > 0.0 {
        let (la, lb) = (lo.ln(), hi.ln());
        (0..=n)
            .map(|i| (la + (lb - la) * i as f64 / n as f64).exp())
            .collect()
    } else {
        (0..=n)
            .map(|i| lo + (hi - lo) * i as f64 / n as f64)
            .collect()
    };
    // Below the grid: mass 1e-12, bounded by the integrand at the cut.
    let mut conv = (1.0 - spec.tail(grid[0])) * spec.tail(x - grid[0]);
    // Trapezoid over the grid cells, masses taken as tail differences.
    let mut tail_prev = spec.tail(grid[0]);
    let mut w_prev = spec.tail(x - grid[0]);
    for &u in &grid[1..] {
        let tail_u = spec.tail(u);
        let w_u = spec.tail(x - u);
        conv += 0.5 * (w_prev + w_u) * (tail_prev - tail_u);
        tail_prev = tail_u;
        w_prev = w_u;
    }
    // Above the grid the other copy exceeds x - hi <= 0 surely: exact.
    conv += spec.tail(hi);
    Ok(conv.clamp(0.0, 1.0))
}

/// Paired-sample Monte Carlo version of the self-convolution tail, for
/// cases where the grid oracle is impractical.
pub fn self_convolution_tail_mc<R: Rng + ?Sized>(
    spec: &DistributionSpec,
    x: f64,
    paths: u64,
    rng: &mut R,
) -> McEstimate {
    let mut hits = 0u64;
    for _ in 0..paths {
        let a = spec.sample(rng);
        let b = spec.sample(rng);
        if a + b > x {
            hits += 1;
        }
    }
    McEstimate::from_counts(hits, paths)
}

/// Self-convolution tail ratios `conv_tail(x) / tail(x)` against the
/// subexponential target 2c, c the exponential moment of order gamma.
/// Errors when that moment diverges (gamma too large for the family).
pub fn convolution_tail_ratio(
    spec: &DistributionSpec,
    gamma: f64,
    x_grid: &[f64],
    oracle_budget: usize,
) -> Result<Vec<ConvolutionPoint>> {
    let c = spec.exp_moment(gamma)?;
    if !c.is_finite() {
        return Err(Error::Domain(format!(
            "exponential moment of order {gamma} diverges for this family"
        )));
    }
    let target = 2.0 * c;
    x_grid
        .iter()
        .map(|&x| {
            let conv_tail = self_convolution_tail(spec, x, oracle_budget)?;
            let base_tail = spec.tail(x);
            Ok(ConvolutionPoint {
                x,
                conv_tail,
                base_tail,
                ratio: conv_tail / base_tail,
                target,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DominationPoint {
    pub x: f64,
    pub scaled_discount_tail: f64,
    pub product_tail: f64,
    /// Gbar(b x) / Hbar(x); tail domination requires this to vanish.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DominationReport {
    pub b: f64,
    pub points: Vec<DominationPoint>,
    /// A bounded discount law satisfies the condition automatically: the
    /// scaled tail is exactly zero beyond its endpoint over b.
    pub bounded_support: bool,
    pub note: String,
}

/// Ratios `Gbar(b x) / Hbar(x)` of the scaled discount tail to the
/// product tail, the smallness condition the product theory requires for
/// every b > 0.
pub fn tail_domination_ratio<H: Fn(f64) -> f64>(
    g: &DistributionSpec,
    product_tail: H,
    b: f64,
    x_grid: &[f64],
) -> Result<DominationReport> {
    if b.is_nan() || b <= 0.0 {
        return Err(Error::Domain(format!("scale b must be positive, got {b}")));
    }
    let bounded = g.right_endpoint().is_finite();
    let note = if bounded {
        format!(
            "discount law bounded by {}; the scaled tail vanishes identically beyond x = {}",
            g.right_endpoint(),
            g.right_endpoint() / b
        )
    } else {
        "unbounded discount law; finite-grid ratios are evidence of decay, not a certificate".into()
    };
    let points = x_grid
        .iter()
        .map(|&x| {
            let gt = g.tail(b * x);
            let ht = product_tail(x);
            DominationPoint {
                x,
                scaled_discount_tail: gt,
                product_tail: ht,
                ratio: gt / ht,
            }
        })
        .collect();
    Ok(DominationReport {
        b,
        points,
        bounded_support: bounded,
        note,
    })
}

/// The tail-class index of the product XY: `gamma_f / beta_g`, read as 0
/// when the discount law is unbounded.
pub fn classify_product(gamma_f: f64, beta_g: f64) -> Result<f64> {
    if beta_g.is_nan() || beta_g <= 0.0 {
        return Err(Error::Domain(format!(
            "right endpoint must be positive, got {beta_g}"
        )));
    }
    if gamma_f < 0.0 {
        return Err(Error::Domain(format!("gamma must be >= 0, got {gamma_f}")));
    }
    if beta_g.is_infinite() || gamma_f == 0.0 {
        Ok(0.0)
    } else {
        Ok(gamma_f / beta_g)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProductClassReport {
    /// The predicted index gamma_f / beta_g of the product law.
    pub gamma_product: f64,
    pub t: f64,
    pub points: Vec<LongTailPoint>,
    pub max_deviation: f64,
    pub deviations_decreasing: bool,
    pub note: String,
}

/// Probe the predicted tail class of the product XY: compute its tail on
/// the grid via the h-weighted integral and compare shifted-tail ratios
/// against `exp((gamma_f / beta_g) t)`.
pub fn verify_product_class(
    f: &DistributionSpec,
    g: &DistributionSpec,
    model: &DependenceModel,
    gamma_f: f64,
    t: f64,
    x_grid: &[f64],
) -> Result<ProductClassReport> {
    if t.is_nan() || t <= 0.0 {
        return Err(Error::Domain(format!("shift t must be positive, got {t}")));
    }
    let gamma_product = classify_product(gamma_f, g.right_endpoint())?;
    let target = (gamma_product * t).exp();
    let mut points = Vec::with_capacity(x_grid.len());
    for &x in x_grid {
        let shifted = h_integral_tail(f, g, model, x - t)?.value;
        let at = h_integral_tail(f, g, model, x)?.value;
        let ratio = shifted / at;
        points.push(LongTailPoint {
            x,
            ratio,
            target,
            deviation: (ratio / target - 1.0).abs(),
        });
    }
    let max_deviation = points.iter().map(|p| p.deviation).fold(0.0, f64::max);
    let deviations_decreasing = points
        .windows(2)
        .all(|w| w[1].deviation <= w[0].deviation + 1e-12);
    Ok(ProductClassReport {
        gamma_product,
        t,
        points,
        max_deviation,
        deviations_decreasing,
        note: "finite-x ratio trend; class membership is asymptotic and not certified".into(),
    })
}

/// Two-sided one-sample Kolmogorov-Smirnov distance between a sample and
/// a cdf.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let c = cdf(x);
        d = d.max(c - i as f64 / n).max((i as f64 + 1.0) / n - c);
    }
    d
}

/// Two-sample Kolmogorov-Smirnov distance. Sorts both samples in place.
pub fn ks_two_sample(xs: &mut [f64], ys: &mut [f64]) -> f64 {
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    ys.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let (nx, ny) = (xs.len() as f64, ys.len() as f64);
    let mut i = 0usize;
    let mut j = 0usize;
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / nx - j as f64 / ny).abs());
    }
    d
}
