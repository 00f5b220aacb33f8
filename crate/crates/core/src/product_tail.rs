//! Tail of the dependent product XY and of iterated discounted products.
//!
//! The central object is the h-weighted integral
//! `integral of h(y) * Fbar(x/y) G(dy)`, which captures the tail of XY
//! once the dependence has been dissolved into the h-function. Discrete
//! discount laws evaluate it as an exact atom sum; continuous laws use
//! adaptive quadrature with the integration domain split wherever the
//! rescaled argument x/y crosses a support boundary of F. Iterated
//! products are evaluated through the one-step recursion
//! `Hbar_i(x) = integral of Hbar_{i-1}(x/y) G(dy)` against a fresh
//! independent discount factor.

use std::cell::{Cell, RefCell};
use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use crate::dependence::{self, h_raw, h_value, DependenceModel, TiltedMeasure};
use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};

/// Tail values below this are clamped to zero: they are beyond the reach
/// of double precision.
const TAIL_FLOOR: f64 = 1e-300;

/// Geometric memoization-grid ratio for iterated tails: 2^(1/16).
const GRID_RATIO_LN: f64 = std::f64::consts::LN_2 / 16.0;

/// How a tail value or curve was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMethod {
    Exact,
    Quadrature,
    MonteCarlo,
}

impl std::fmt::Display for TailMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TailMethod::Exact => write!(f, "exact"),
            TailMethod::Quadrature => write!(f, "quadrature"),
            TailMethod::MonteCarlo => write!(f, "monte_carlo"),
        }
    }
}

/// One evaluated tail probability with its error estimate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TailValue {
    pub value: f64,
    pub abs_error: f64,
    pub method: TailMethod,
    /// Set when the propagated error estimate exceeds 1% of the value.
    pub warning: bool,
    /// Set when a value below the double-precision floor was clamped to 0.
    pub clamped: bool,
}

impl TailValue {
    fn exact(value: f64) -> Self {
        TailValue {
            value,
            abs_error: 0.0,
            method: TailMethod::Exact,
            warning: false,
            clamped: false,
        }
    }

    fn quadrature(value: f64, abs_error: f64) -> Self {
        // Positive values below the double-precision floor are clamped
        // and flagged; negative roundoff dust is clamped silently.
        let clamped = value > 0.0 && value < TAIL_FLOOR;
        let value = if clamped { 0.0 } else { value.clamp(0.0, 1.0) };
        TailValue {
            value,
            abs_error,
            method: TailMethod::Quadrature,
            warning: value > 0.0 && abs_error > 0.01 * value,
            clamped,
        }
    }
}

/// A tail function sampled on an increasing grid.
#[derive(Debug, Clone, Serialize)]
pub struct TailCurve {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub method: TailMethod,
}

impl TailCurve {
    /// Validates the grid ordering, the probability range, and
    /// monotonicity up to the per-point error estimates.
    pub fn new(
        xs: Vec<f64>,
        values: Vec<f64>,
        errors: Vec<f64>,
        method: TailMethod,
    ) -> Result<Self> {
        if xs.len() != values.len() || xs.len() != errors.len() {
            return Err(Error::invalid("grid", "xs, values, errors must align"));
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("grid", "xs must be strictly increasing"));
        }
        for (&v, &e) in values.iter().zip(&errors) {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid("values", format!("{v} outside [0, 1]")));
            }
            if e < 0.0 {
                return Err(Error::invalid("errors", "must be nonnegative"));
            }
        }
        for i in 1..values.len() {
            let slack = 4.0 * (errors[i - 1] + errors[i]) + 1e-12;
            if values[i] > values[i - 1] + slack {
                return Err(Error::invalid(
                    "values",
                    format!(
                        "tail increases beyond error bars at x = {}: {} -> {}",
                        xs[i],
                        values[i - 1],
                        values[i]
                    ),
                ));
            }
        }
        Ok(TailCurve {
            xs,
            values,
            errors,
            method,
        })
    }

    /// CSV rows `x,value,abs_error,method` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,value,abs_error,method\n");
        for i in 0..self.xs.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.xs[i], self.values[i], self.errors[i], self.method
            ));
        }
        out
    }
}

/// Split points in y where `Fbar(x/y)` kinks or jumps: one per positive
/// finite support boundary or atom of F.
fn rescale_splits(f: &DistributionSpec, x: f64) -> Vec<f64> {
    let mut splits = Vec::new();
    if let Some(atoms) = f.atoms() {
        for (a, _) in atoms {
            if a > 0.0 {
                splits.push(x / a);
            }
        }
        return splits;
    }
    let lf = f.left_endpoint();
    if lf.is_finite() && lf > 0.0 {
        splits.push(x / lf);
    }
    let rf = f.right_endpoint();
    if rf.is_finite() && rf > 0.0 {
        splits.push(x / rf);
    }
    splits
}

/// `integral of h(y) Fbar(x/y) G(dy)` over the support of G: the tail of
/// the dependent product XY with the dependence dissolved into h.
///
/// Exact weighted atom sum for discrete G; adaptive quadrature with an
/// absolute tolerance of `1e-10 * max(value, 1e-300)` otherwise. The
/// integrand vanishes at y = 0 since x > 0.
pub fn h_integral_tail(
    f: &DistributionSpec,
    g: &DistributionSpec,
    model: &DependenceModel,
    x: f64,
) -> Result<TailValue> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::Domain(format!("x must be positive, got {x}")));
    }
    if let Some(atoms) = g.atoms() {
        let mut value = 0.0;
        for (y, p) in atoms {
            if y <= 0.0 {
                continue;
            }
            value += p * h_value(model, g, y)? * f.tail(x / y);
        }
        return Ok(TailValue::exact(value));
    }
    let quad = g.integrate(
        f64::NEG_INFINITY,
        f64::INFINITY,
        |y| {
            if y <= 0.0 {
                0.0
            } else {
                h_raw(model, g, y) * f.tail(x / y)
            }
        },
        &rescale_splits(f, x),
        TAIL_FLOOR,
        1e-10,
    )?;
    Ok(TailValue::quadrature(quad.value, quad.abs_error))
}

/// The same product tail computed through the tilted measure: reweight G
/// by h first, then integrate the plain `Fbar(x/y)` against the tilted
/// law as if the pair were independent.
pub fn h_integral_tail_tilted(
    f: &DistributionSpec,
    g: &DistributionSpec,
    model: &DependenceModel,
    x: f64,
) -> Result<TailValue> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::Domain(format!("x must be positive, got {x}")));
    }
    let tilted = dependence::tilted_discount(model, g)?;
    match &tilted {
        TiltedMeasure::Discrete(spec) => {
            h_integral_tail(f, spec, &DependenceModel::Independent, x)
        }
        TiltedMeasure::Weighted { .. } => {
            let quad = tilted.integrate(
                f64::NEG_INFINITY,
                f64::INFINITY,
                |y| if y <= 0.0 { 0.0 } else { f.tail(x / y) },
                &rescale_splits(f, x),
                TAIL_FLOOR,
                1e-10,
            )?;
            Ok(TailValue::quadrature(quad.value, quad.abs_error))
        }
    }
}

/// Exact tail of XY when Y takes the values 1 and 2 with probability 1/2
/// each and (X, Y) is FGM(theta):
///
/// `1/2 (Fbar(x) + Fbar(x/2)) + theta/4 (Fbar(x/2) - Fbar(x))
///  - theta/4 (Fbar(x/2)^2 - Fbar(x)^2)`.
///
/// The last term is what the h-weighted integral drops asymptotically.
pub fn exact_two_point_fgm_tail(f: &DistributionSpec, theta: f64, x: f64) -> Result<f64> {
    if f.right_endpoint().is_finite() {
        return Err(Error::Domain(
            "the closed form needs an unbounded loss law".into(),
        ));
    }
    if theta.abs() > 1.0 {
        return Err(Error::Domain(format!("theta {theta} outside [-1, 1]")));
    }
    let t1 = f.tail(x);
    let t2 = f.tail(x / 2.0);
    Ok(0.5 * (t1 + t2) + theta / 4.0 * (t2 - t1) - theta / 4.0 * (t2 * t2 - t1 * t1))
}

/// Tail of the i-fold discounted product `X_i * Y_1 * ... * Y_i` where
/// the pairs are i.i.d. copies of the model.
///
/// The base case is [`h_integral_tail`]; higher levels apply
/// `Hbar_i(x) = integral of Hbar_{i-1}(x/y) G(dy)` with a fresh
/// independent discount factor. Discrete discount laws recurse exactly;
/// continuous laws memoize each level on a geometric grid (ratio 2^1/16)
/// and interpolate monotonically in log-log coordinates, folding the
/// interpolation error into the error estimate.
pub fn iterated_tail(
    f: &DistributionSpec,
    g: &DistributionSpec,
    model: &DependenceModel,
    i: u32,
    x: f64,
) -> Result<TailValue> {
    if i < 1 {
        return Err(Error::Domain("product index must be >= 1".into()));
    }
    if x.is_nan() || x <= 0.0 {
        return Err(Error::Domain(format!("x must be positive, got {x}")));
    }
    if i == 1 {
        return h_integral_tail(f, g, model, x);
    }
    if g.atoms().is_some() {
        let mut memo = BTreeMap::new();
        let value = iterated_discrete(f, g, model, i, x, &mut memo)?;
        return Ok(TailValue::exact(value));
    }
    let ctx = IterCtx::new(f, g, model, x, i);
    ctx.top(x)
}

fn iterated_discrete(
    f: &DistributionSpec,
    g: &DistributionSpec,
    model: &DependenceModel,
    level: u32,
    x: f64,
    memo: &mut BTreeMap<(u32, u64), f64>,
) -> Result<f64> {
    let key = (level, x.to_bits());
    if let Some(&v) = memo.get(&key) {
        return Ok(v);
    }
    let value = if level == 1 {
        h_integral_tail(f, g, model, x)?.value
    } else {
        let mut acc = 0.0;
        for (y, p) in g.atoms().expect("discrete recursion needs atoms") {
            if y <= 0.0 {
                continue;
            }
            acc += p * iterated_discrete(f, g, model, level - 1, x / y, memo)?;
        }
        acc
    };
    memo.insert(key, value);
    Ok(value)
}

#[derive(Debug, Clone, Copy)]
struct GridVal {
    value: f64,
    err: f64,
}

/// Per-call memoization context for the continuous-G recursion. Caches
/// are local to one evaluation, so concurrent evaluations over an x-grid
/// share nothing.
struct IterCtx<'a> {
    f: &'a DistributionSpec,
    g: &'a DistributionSpec,
    model: &'a DependenceModel,
    x_ref: f64,
    /// levels[j] caches level j+1 grid values.
    levels: Vec<RefCell<BTreeMap<i64, GridVal>>>,
    /// Max relative interpolation error observed when reading level j+1.
    interp_rel: Vec<Cell<f64>>,
    clamped: Cell<bool>,
    pending_error: RefCell<Option<Error>>,
}

impl<'a> IterCtx<'a> {
    fn new(
        f: &'a DistributionSpec,
        g: &'a DistributionSpec,
        model: &'a DependenceModel,
        x_ref: f64,
        top_level: u32,
    ) -> Self {
        let n = top_level as usize - 1;
        IterCtx {
            f,
            g,
            model,
            x_ref,
            levels: (0..n).map(|_| RefCell::new(BTreeMap::new())).collect(),
            interp_rel: (0..n).map(|_| Cell::new(0.0)).collect(),
            clamped: Cell::new(false),
            pending_error: RefCell::new(None),
        }
    }

    fn grid_x(&self, k: i64) -> f64 {
        self.x_ref * (GRID_RATIO_LN * k as f64).exp()
    }

    fn stash_error(&self, e: Error) {
        let mut slot = self.pending_error.borrow_mut();
        if slot.is_none() {
            *slot = Some(e);
        }
    }

    /// Direct (non-interpolated) evaluation of level `level` at `q`.
    fn direct(&self, level: u32, q: f64) -> Result<GridVal> {
        if level == 1 {
            let tv = h_integral_tail(self.f, self.g, self.model, q)?;
            if tv.clamped {
                self.clamped.set(true);
            }
            return Ok(GridVal {
                value: tv.value,
                err: tv.abs_error,
            });
        }
        let child = level - 1;
        let quad = self.g.integrate(
            f64::NEG_INFINITY,
            f64::INFINITY,
            |y| {
                if y <= 0.0 {
                    return 0.0;
                }
                match self.read(child, q / y) {
                    Ok(v) => v,
                    Err(e) => {
                        self.stash_error(e);
                        0.0
                    }
                }
            },
            &[],
            TAIL_FLOOR,
            1e-10,
        )?;
        if let Some(e) = self.pending_error.borrow_mut().take() {
            return Err(e);
        }
        let child_rel = self.level_rel_err(child);
        let value = quad.value.clamp(0.0, 1.0);
        Ok(GridVal {
            value,
            err: quad.abs_error + value * child_rel,
        })
    }

    /// Cached grid-point value of a level.
    fn grid_val(&self, level: u32, k: i64) -> Result<GridVal> {
        let idx = level as usize - 1;
        if let Some(&v) = self.levels[idx].borrow().get(&k) {
            return Ok(v);
        }
        let v = self.direct(level, self.grid_x(k))?;
        self.levels[idx].borrow_mut().insert(k, v);
        Ok(v)
    }

    /// Interpolated read of a level at an arbitrary argument, in log-log
    /// coordinates with monotone (Fritsch-Carlson limited) slopes.
    fn read(&self, level: u32, q: f64) -> Result<f64> {
        if !q.is_finite() {
            return Ok(0.0);
        }
        let kr = (q / self.x_ref).ln() / GRID_RATIO_LN;
        let k0 = kr.floor() as i64;
        let v0 = self.grid_val(level, k0)?;
        let v1 = self.grid_val(level, k0 + 1)?;
        if v0.value <= TAIL_FLOOR || v1.value <= TAIL_FLOOR {
            // Past the representable tail; the value is below the floor.
            if v0.value > TAIL_FLOOR || v1.value > TAIL_FLOOR {
                self.clamped.set(true);
            }
            return Ok(0.0);
        }
        let t = kr - k0 as f64; // position in [0, 1) between the knots
        let w0 = v0.value.ln();
        let w1 = v1.value.ln();
        let d = w1 - w0; // central secant in units of one grid step
        let dm = match self.grid_val(level, k0 - 1) {
            Ok(v) if v.value > TAIL_FLOOR => Some(w0 - v.value.ln()),
            _ => None,
        };
        let dp = match self.grid_val(level, k0 + 2) {
            Ok(v) if v.value > TAIL_FLOOR => Some(v.value.ln() - w1),
            _ => None,
        };
        let m0 = monotone_slope(dm, d);
        let m1 = monotone_slope(Some(d), dp.unwrap_or(d));
        // Cubic Hermite in t.
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        let w = h00 * w0 + h10 * m0 + h01 * w1 + h11 * m1;
        let w_linear = w0 + t * d;
        let value = w.exp();
        let rel_err = (w - w_linear).abs().min(1.0);
        let idx = level as usize - 1;
        if rel_err > self.interp_rel[idx].get() {
            self.interp_rel[idx].set(rel_err);
        }
        Ok(value)
    }

    fn level_rel_err(&self, level: u32) -> f64 {
        let idx = level as usize - 1;
        let mut rel = self.interp_rel[idx].get();
        for v in self.levels[idx].borrow().values() {
            if v.value > TAIL_FLOOR {
                rel = rel.max(v.err / v.value);
            }
        }
        rel
    }

    fn top(&self, x: f64) -> Result<TailValue> {
        let level = self.levels.len() as u32 + 1;
        let gv = self.direct(level, x)?;
        let mut tv = TailValue::quadrature(gv.value, gv.err);
        tv.clamped = tv.clamped || self.clamped.get();
        Ok(tv)
    }
}

/// Fritsch-Carlson limited slope from the two adjacent secants (equal
/// knot spacing): zero at a local extremum, otherwise the harmonic mean
/// cropped to preserve monotonicity.
fn monotone_slope(left: Option<f64>, right: f64) -> f64 {
    let l = match left {
        Some(l) => l,
        None => return right,
    };
    if l * right <= 0.0 {
        0.0
    } else {
        2.0 * l * right / (l + right)
    }
}

/// A Monte Carlo probability estimate with its binomial error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct McEstimate {
    pub p_hat: f64,
    pub std_err: f64,
    pub ci95: (f64, f64),
    pub paths: u64,
}

impl McEstimate {
    pub fn from_counts(hits: u64, paths: u64) -> Self {
        let p = hits as f64 / paths as f64;
        let se = (p * (1.0 - p) / paths as f64).sqrt();
        McEstimate {
            p_hat: p,
            std_err: se,
            ci95: ((p - 1.96 * se).max(0.0), (p + 1.96 * se).min(1.0)),
            paths,
        }
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci95.0 <= value && value <= self.ci95.1
    }
}

/// Monte Carlo estimate of the i-fold discounted product tail
/// `P(X_i Y_1 ... Y_i > x)`, drawing `paths` i.i.d. blocks of i pairs.
pub fn mc_product_tail<R: Rng + ?Sized>(
    model: &DependenceModel,
    f: &DistributionSpec,
    g: &DistributionSpec,
    i: u32,
    x: f64,
    paths: u64,
    rng: &mut R,
) -> Result<McEstimate> {
    if paths < 1_000 {
        return Err(Error::Domain("need at least 1000 paths".into()));
    }
    if i < 1 {
        return Err(Error::Domain("product index must be >= 1".into()));
    }
    let mut hits = 0u64;
    for _ in 0..paths {
        let mut discount = 1.0;
        let mut last_loss = 0.0;
        for _ in 0..i {
            let (xj, yj) = dependence::sample_pair(model, f, g, rng)?;
            discount *= yj;
            last_loss = xj;
        }
        if last_loss * discount > x {
            hits += 1;
        }
    }
    Ok(McEstimate::from_counts(hits, paths))
}
