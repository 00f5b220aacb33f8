//! Finite-horizon ruin probabilities in a discrete-time risk model.
//!
//! Period i brings a real-valued net loss X_i and a nonnegative discount
//! factor Y_i carrying period-i money back one period; the pairs are
//! i.i.d. across periods with a common dependence model. Ruin by time n
//! means the running maximum of the discounted partial sums
//! `S_m = sum_{i<=m} X_i Y_1...Y_i` exceeds the initial capital x.
//!
//! Two evaluations are provided: plain Monte Carlo over reproducible
//! per-path substreams, and the tail-sum approximation
//! `sum_{i=1..n} Hbar_i(x)` built from the iterated product tails. The
//! approximation is asymptotic in x and may exceed 1 at small capital,
//! where it is flagged rather than clamped.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dependence::{self, DependenceModel};
use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::product_tail::{self, McEstimate, TailValue};
use crate::stream;

/// The risk model: loss law, discount law, dependence structure, horizon.
#[derive(Debug, Clone, Serialize)]
pub struct RiskModelSpec {
    pub loss: DistributionSpec,
    pub discount: DistributionSpec,
    pub model: DependenceModel,
    pub horizon: u32,
}

impl RiskModelSpec {
    /// Validates the structural requirements: a nonnegative discount law,
    /// neither marginal degenerate at zero, horizon >= 1, and a dependence
    /// model that passes its validity checks against the marginals.
    pub fn new(
        loss: DistributionSpec,
        discount: DistributionSpec,
        model: DependenceModel,
        horizon: u32,
    ) -> Result<Self> {
        if horizon < 1 {
            return Err(Error::invalid("horizon", "must be >= 1"));
        }
        if discount.left_endpoint() < 0.0 {
            return Err(Error::invalid(
                "discount",
                "must be supported on [0, inf)",
            ));
        }
        if discount.point_prob(0.0) >= 1.0 {
            return Err(Error::invalid("discount", "must not be degenerate at 0"));
        }
        if loss.point_prob(0.0) >= 1.0 {
            return Err(Error::invalid("loss", "must not be degenerate at 0"));
        }
        let report = dependence::validate(&model, &loss, &discount);
        if !report.is_valid() {
            let failed: Vec<&str> = report
                .checks
                .iter()
                .filter(|c| !c.pass)
                .map(|c| c.name)
                .collect();
            return Err(Error::ModelInvalid(format!(
                "dependence model failed checks: {}",
                failed.join(", ")
            )));
        }
        Ok(Self {
            loss,
            discount,
            model,
            horizon,
        })
    }
}

/// Running-maximum records of one simulated path: the periods m at which
/// the discounted partial sum reached a new maximum, with the sums.
#[derive(Debug, Clone, PartialEq)]
pub struct PathOutcome {
    pub records: Vec<(u32, f64)>,
}

impl PathOutcome {
    /// max over m of S_m.
    pub fn max_partial_sum(&self) -> f64 {
        self.records.last().map(|&(_, s)| s).unwrap_or(f64::NAN)
    }

    /// The first period attaining the overall maximum.
    pub fn trigger(&self) -> Option<u32> {
        self.records.last().map(|&(m, _)| m)
    }

    /// The first period whose partial sum exceeds `x`, if any. A first
    /// crossing always happens at a new running maximum, so the records
    /// determine it exactly.
    pub fn first_crossing(&self, x: f64) -> Option<u32> {
        self.records.iter().find(|&&(_, s)| s > x).map(|&(m, _)| m)
    }
}

/// Walk one path, invoking `on_record(m, s_m)` at every new running
/// maximum of the discounted partial sums. Draw order per period: the
/// pair (Y, then X as the model dictates).
fn walk_path<R: Rng + ?Sized, F: FnMut(u32, f64)>(
    spec: &RiskModelSpec,
    rng: &mut R,
    mut on_record: F,
) -> Result<()> {
    let mut discount = 1.0;
    let mut sum = 0.0;
    let mut best = f64::NEG_INFINITY;
    for m in 1..=spec.horizon {
        let (x_m, y_m) =
            dependence::sample_pair(&spec.model, &spec.loss, &spec.discount, rng)?;
        discount *= y_m;
        sum += x_m * discount;
        if sum > best {
            best = sum;
            on_record(m, sum);
        }
    }
    Ok(())
}

/// Simulate one path and return its running-maximum records.
pub fn simulate_path<R: Rng + ?Sized>(spec: &RiskModelSpec, rng: &mut R) -> Result<PathOutcome> {
    let mut records = Vec::new();
    walk_path(spec, rng, |m, s| records.push((m, s)))?;
    Ok(PathOutcome { records })
}

/// Ruin-probability estimate at one capital level.
#[derive(Debug, Clone, Serialize)]
pub struct RuinEstimate {
    pub x: f64,
    pub n: u32,
    pub p_hat: f64,
    pub std_err: f64,
    pub ci95: (f64, f64),
    pub paths: u64,
    /// Count, per period m = 1..n, of ruined paths whose partial sum
    /// first crossed this capital level in period m. Sums to the ruin
    /// count.
    pub trigger_histogram: Vec<u64>,
}

#[derive(Clone)]
struct Accumulator {
    ruin_counts: Vec<u64>,
    triggers: Vec<Vec<u64>>,
}

impl Accumulator {
    fn new(grid_len: usize, horizon: usize) -> Self {
        Accumulator {
            ruin_counts: vec![0; grid_len],
            triggers: vec![vec![0; horizon]; grid_len],
        }
    }

    fn merge(mut self, other: Accumulator) -> Accumulator {
        for (a, b) in self.ruin_counts.iter_mut().zip(&other.ruin_counts) {
            *a += b;
        }
        for (ta, tb) in self.triggers.iter_mut().zip(&other.triggers) {
            for (a, b) in ta.iter_mut().zip(tb) {
                *a += b;
            }
        }
        self
    }
}

/// Estimate the ruin probability at every capital level of `x_grid` from
/// `paths` simulated paths.
///
/// One pass evaluates all levels: each path's running-maximum records are
/// compared against the whole (increasing) grid, which makes the
/// estimates monotone in x by construction. Path p always draws from
/// substream p of the master seed, so the result depends only on
/// `(seed, paths)` - never on `chunks`, which is purely a parallel
/// batching parameter, nor on scheduling order.
pub fn estimate_ruin(
    spec: &RiskModelSpec,
    x_grid: &[f64],
    paths: u64,
    seed: u64,
    chunks: u32,
) -> Result<Vec<RuinEstimate>> {
    validate_grid(x_grid)?;
    if paths < 1_000 {
        return Err(Error::Domain("need at least 1000 paths".into()));
    }
    if chunks < 1 {
        return Err(Error::Domain("need at least one chunk".into()));
    }
    let n = spec.horizon as usize;
    let chunk_len = paths.div_ceil(chunks as u64);
    let ranges: Vec<(u64, u64)> = (0..chunks as u64)
        .map(|c| (c * chunk_len, ((c + 1) * chunk_len).min(paths)))
        .filter(|(lo, hi)| lo < hi)
        .collect();

    let partials: Vec<Accumulator> = ranges
        .into_par_iter()
        .map(|(lo, hi)| -> Result<Accumulator> {
            let mut acc = Accumulator::new(x_grid.len(), n);
            for p in lo..hi {
                let mut rng = stream::substream(seed, p);
                let mut ptr = 0usize;
                walk_path(spec, &mut rng, |m, s| {
                    while ptr < x_grid.len() && x_grid[ptr] < s {
                        acc.ruin_counts[ptr] += 1;
                        acc.triggers[ptr][(m - 1) as usize] += 1;
                        ptr += 1;
                    }
                })?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;

    let acc = partials
        .into_iter()
        .fold(Accumulator::new(x_grid.len(), n), Accumulator::merge);

    Ok(x_grid
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let est = McEstimate::from_counts(acc.ruin_counts[i], paths);
            RuinEstimate {
                x,
                n: spec.horizon,
                p_hat: est.p_hat,
                std_err: est.std_err,
                ci95: est.ci95,
                paths,
                trigger_histogram: acc.triggers[i].clone(),
            }
        })
        .collect())
}

fn validate_grid(x_grid: &[f64]) -> Result<()> {
    if x_grid.is_empty() {
        return Err(Error::Domain("capital grid must be non-empty".into()));
    }
    if x_grid.iter().any(|&x| x.is_nan() || x <= 0.0) {
        return Err(Error::Domain("capital levels must be positive".into()));
    }
    if x_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("capital grid must be strictly increasing".into()));
    }
    Ok(())
}

/// The tail-sum approximation of the ruin probability.
#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticRuin {
    pub x: f64,
    pub n: u32,
    /// sum of the iterated product tails; an asymptotic tail sum, not a
    /// probability, and flagged when it exceeds 1.
    pub value: f64,
    pub terms: Vec<TailValue>,
    pub exceeds_one: bool,
    pub warning: bool,
}

/// `sum_{i=1..n} Hbar_i(x)`: the single-big-jump approximation of the
/// finite-time ruin probability.
pub fn asymptotic_ruin(spec: &RiskModelSpec, x: f64) -> Result<AsymptoticRuin> {
    let mut terms = Vec::with_capacity(spec.horizon as usize);
    let mut value = 0.0;
    for i in 1..=spec.horizon {
        let term = product_tail::iterated_tail(&spec.loss, &spec.discount, &spec.model, i, x)?;
        value += term.value;
        terms.push(term);
    }
    Ok(AsymptoticRuin {
        x,
        n: spec.horizon,
        value,
        exceeds_one: value > 1.0,
        warning: terms.iter().any(|t| t.warning),
        terms,
    })
}

/// One row of the Monte Carlo vs tail-sum comparison.
#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub x: f64,
    pub n: u32,
    pub psi_hat: f64,
    pub std_err: f64,
    pub ci95: (f64, f64),
    pub asym_sum: f64,
    /// psi_hat / asym_sum, with a delta-method standard error treating
    /// the tail sum as exact.
    pub ratio: f64,
    pub ratio_se: f64,
    pub paths: u64,
    pub seed: u64,
    pub trigger_histogram: Vec<u64>,
}

/// Join the Monte Carlo estimates and the tail-sum approximation on a
/// capital grid.
pub fn compare_ruin(
    spec: &RiskModelSpec,
    x_grid: &[f64],
    paths: u64,
    seed: u64,
    chunks: u32,
) -> Result<Vec<CompareRow>> {
    let estimates = estimate_ruin(spec, x_grid, paths, seed, chunks)?;
    estimates
        .into_iter()
        .map(|est| {
            let asym = asymptotic_ruin(spec, est.x)?;
            let (ratio, ratio_se) = if asym.value > 0.0 {
                (est.p_hat / asym.value, est.std_err / asym.value)
            } else {
                (f64::NAN, f64::NAN)
            };
            Ok(CompareRow {
                x: est.x,
                n: est.n,
                psi_hat: est.p_hat,
                std_err: est.std_err,
                ci95: est.ci95,
                asym_sum: asym.value,
                ratio,
                ratio_se,
                paths: est.paths,
                seed,
                trigger_histogram: est.trigger_histogram,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::product_tail::exact_two_point_fgm_tail;

    fn two_point() -> DistributionSpec {
        DistributionSpec::discrete(vec![(1.0, 0.5), (2.0, 0.5)]).unwrap()
    }

    fn example_spec(horizon: u32) -> RiskModelSpec {
        RiskModelSpec::new(
            DistributionSpec::pareto(2.0, 1.0).unwrap(),
            two_point(),
            DependenceModel::fgm(0.5).unwrap(),
            horizon,
        )
        .unwrap()
    }

    #[test]
    fn construction_rejects_bad_models() {
        let f = DistributionSpec::pareto(2.0, 1.0).unwrap();
        // Discount with mass below zero.
        let g_neg = DistributionSpec::uniform(0.0, 1.0)
            .unwrap()
            .shifted(-0.5)
            .unwrap();
        assert!(RiskModelSpec::new(
            f.clone(),
            g_neg,
            DependenceModel::independent(),
            3
        )
        .is_err());
        // Degenerate at zero.
        let g0 = DistributionSpec::point_mass(0.0).unwrap();
        assert!(
            RiskModelSpec::new(f.clone(), g0, DependenceModel::independent(), 3).is_err()
        );
        // Boundary theta without the endpoint atom.
        let g = DistributionSpec::uniform(0.5, 1.0).unwrap();
        assert!(RiskModelSpec::new(f.clone(), g, DependenceModel::fgm(1.0).unwrap(), 3).is_err());
        // Horizon zero.
        assert!(RiskModelSpec::new(f, two_point(), DependenceModel::independent(), 0).is_err());
    }

    #[test]
    fn single_period_path_is_one_product() {
        let spec = example_spec(1);
        let mut rng = stream::substream(3, 0);
        let path = simulate_path(&spec, &mut rng).unwrap();
        let mut rng2 = stream::substream(3, 0);
        let (x, y) =
            dependence::sample_pair(&spec.model, &spec.loss, &spec.discount, &mut rng2).unwrap();
        assert_eq!(path.records, vec![(1, x * y)]);
        assert_eq!(path.max_partial_sum(), x * y);
        assert_eq!(path.trigger(), Some(1));
    }

    #[test]
    fn unit_discount_reduces_to_random_walk_maximum() {
        let spec = RiskModelSpec::new(
            DistributionSpec::pareto(2.0, 1.0).unwrap().shifted(-1.5).unwrap(),
            DistributionSpec::point_mass(1.0).unwrap(),
            DependenceModel::independent(),
            6,
        )
        .unwrap();
        let mut rng = stream::substream(8, 0);
        let path = simulate_path(&spec, &mut rng).unwrap();
        // Replay the same stream by hand: the independent sampler draws
        // y then x each period.
        let mut rng2 = stream::substream(8, 0);
        let mut sum = 0.0;
        let mut best = f64::NEG_INFINITY;
        let mut records = Vec::new();
        for m in 1..=6u32 {
            let _y = spec.discount.sample(&mut rng2);
            let x = spec.loss.sample(&mut rng2);
            sum += x;
            if sum > best {
                best = sum;
                records.push((m, sum));
            }
        }
        assert_eq!(path.records, records);
    }

    #[test]
    fn paths_are_bit_reproducible() {
        let spec = example_spec(4);
        let a = simulate_path(&spec, &mut stream::substream(11, 7)).unwrap();
        let b = simulate_path(&spec, &mut stream::substream(11, 7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn estimates_monotone_in_x_and_n() {
        let grid = [2.0, 4.0, 8.0, 16.0];
        let e1 = estimate_ruin(&example_spec(1), &grid, 20_000, 5, 4).unwrap();
        let e3 = estimate_ruin(&example_spec(3), &grid, 20_000, 5, 4).unwrap();
        for w in e1.windows(2) {
            assert!(w[1].p_hat <= w[0].p_hat);
        }
        // Adding periods can only raise the running maximum; substream p
        // draws identical leading pairs for both horizons.
        for (a, b) in e1.iter().zip(&e3) {
            assert!(b.p_hat >= a.p_hat);
        }
        for est in &e3 {
            let total: u64 = est.trigger_histogram.iter().sum();
            assert_eq!(total, (est.p_hat * est.paths as f64).round() as u64);
        }
    }

    #[test]
    fn chunk_count_does_not_change_results() {
        let spec = example_spec(3);
        let grid = [2.0, 5.0, 10.0];
        let base = estimate_ruin(&spec, &grid, 10_000, 42, 1).unwrap();
        for chunks in [4u32, 8] {
            let alt = estimate_ruin(&spec, &grid, 10_000, 42, chunks).unwrap();
            for (a, b) in base.iter().zip(&alt) {
                assert_eq!(a.p_hat, b.p_hat);
                assert_eq!(a.trigger_histogram, b.trigger_histogram);
            }
        }
    }

    #[test]
    fn horizon_one_matches_exact_product_tail() {
        let spec = example_spec(1);
        let x = 10.0;
        let exact = exact_two_point_fgm_tail(&spec.loss, 0.5, x).unwrap();
        let est = &estimate_ruin(&spec, &[x], 200_000, 17, 4).unwrap()[0];
        assert!(
            (est.p_hat - exact).abs() <= 4.0 * est.std_err,
            "{} vs {exact}",
            est.p_hat
        );
    }

    #[test]
    fn asymptotic_sum_is_additive_and_matches_terms() {
        let spec = example_spec(3);
        let x = 10.0;
        let a3 = asymptotic_ruin(&spec, x).unwrap();
        let a2 = asymptotic_ruin(&RiskModelSpec { horizon: 2, ..spec.clone() }, x).unwrap();
        let h3 = product_tail::iterated_tail(&spec.loss, &spec.discount, &spec.model, 3, x)
            .unwrap()
            .value;
        assert!((a3.value - a2.value - h3).abs() < 1e-14);
        assert_eq!(a3.terms.len(), 3);
    }

    #[test]
    fn asymptotic_independent_two_point_example() {
        let spec = RiskModelSpec::new(
            DistributionSpec::pareto(2.0, 1.0).unwrap(),
            two_point(),
            DependenceModel::independent(),
            2,
        )
        .unwrap();
        let a = asymptotic_ruin(&spec, 10.0).unwrap();
        assert!((a.value - 0.0875).abs() < 1e-14);
        assert!(!a.exceeds_one);
        // At tiny capital the tail sum blows past 1 and is flagged.
        let small = asymptotic_ruin(&spec, 0.25).unwrap();
        assert!(small.exceeds_one);
    }

    #[test]
    fn compare_ruin_unit_discount_ratio_near_one() {
        let spec = RiskModelSpec::new(
            DistributionSpec::pareto(2.0, 1.0).unwrap(),
            DistributionSpec::point_mass(1.0).unwrap(),
            DependenceModel::independent(),
            1,
        )
        .unwrap();
        let rows = compare_ruin(&spec, &[5.0], 100_000, 23, 4).unwrap();
        let row = &rows[0];
        // With Y = 1 and n = 1 the tail sum is exactly Fbar(x).
        assert_eq!(row.asym_sum, spec.loss.tail(5.0));
        assert!((row.ratio - 1.0).abs() <= 4.0 * row.ratio_se);
    }

    #[test]
    fn compare_ruin_single_period_ratio_matches_closed_form_gap() {
        // At n = 1 the ratio estimates the exact-tail over tail-sum gap,
        // 0.0285625 / 0.02875 = 0.99348 at x = 10.
        let spec = example_spec(1);
        let rows = compare_ruin(&spec, &[10.0], 400_000, 61, 4).unwrap();
        let row = &rows[0];
        assert!((row.asym_sum - 0.02875).abs() < 1e-14);
        let expected = 0.0285625 / 0.02875;
        assert!(
            (row.ratio - expected).abs() <= 4.0 * row.ratio_se,
            "ratio {} vs {expected}",
            row.ratio
        );
    }

    #[test]
    fn small_capital_limit_is_prefix_positivity_probability() {
        // With P(X <= 0) > 0 the ruin probability at vanishing capital
        // approaches P(some prefix sum is positive), strictly below 1.
        // Reference value 0.38749 from three independent 1e7-path runs
        // (agreeing to 2e-4).
        let spec = RiskModelSpec::new(
            DistributionSpec::pareto(2.0, 1.0).unwrap().shifted(-2.0).unwrap(),
            DistributionSpec::discrete(vec![(0.5, 0.5), (0.9, 0.5)]).unwrap(),
            DependenceModel::fgm(0.5).unwrap(),
            3,
        )
        .unwrap();
        let est = &estimate_ruin(&spec, &[1e-6], 100_000, 4, 4).unwrap()[0];
        let oracle = 0.38749;
        let band = 4.0 * (est.std_err + 1.6e-4);
        assert!(
            (est.p_hat - oracle).abs() <= band,
            "{} vs oracle {oracle} (band {band})",
            est.p_hat
        );
        assert!(est.p_hat < 0.5, "must stay bounded away from 1");
    }

    #[test]
    fn exchangeability_of_forward_and_backward_sums() {
        // S_n and T_n = sum X_i Y_i...Y_n share a distribution; check by
        // a two-sample KS on paired-seed samples at n = 3.
        let spec = example_spec(3);
        let n_samples = 100_000;
        let mut s_vals = Vec::with_capacity(n_samples);
        let mut t_vals = Vec::with_capacity(n_samples);
        for p in 0..n_samples {
            let mut rng = stream::substream(31, p as u64);
            let mut pairs = Vec::with_capacity(3);
            for _ in 0..3 {
                pairs.push(
                    dependence::sample_pair(&spec.model, &spec.loss, &spec.discount, &mut rng)
                        .unwrap(),
                );
            }
            let mut s = 0.0;
            let mut disc = 1.0;
            for &(x, y) in &pairs {
                disc *= y;
                s += x * disc;
            }
            let mut t = 0.0;
            for (i, &(x, _)) in pairs.iter().enumerate() {
                let back: f64 = pairs[i..].iter().map(|&(_, y)| y).product();
                t += x * back;
            }
            s_vals.push(s);
            t_vals.push(t);
        }
        let d = crate::diagnostics::ks_two_sample(&mut s_vals, &mut t_vals);
        assert!(d <= 0.015, "KS distance {d}");
    }
}
