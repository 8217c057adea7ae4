//! Subsamplability diagnostics and sample-size planning.
//!
//! A dataset is (m, alpha, beta)-subsamplable when a uniform subsample of
//! size m has its second moment within a (1 +- alpha) Loewner band around
//! the full moment, except with probability beta. This module measures that
//! property empirically, identifies the heavy "tail" points that obstruct
//! it, and turns the accuracy theorems into concrete sample-size plans for
//! the two estimators.

use crate::error::{Error, Result};
use crate::matcore::{
    self, loewner_leq, pseudo_inverse, second_moment, second_moment_rows, Dataset, SymMat,
};
use crate::noise::RngState;
use crate::privacy::{approx_to_zcdp_rho, zcdp_to_approx_eps};
use rayon::prelude::*;

/// Two-sided 95% normal quantile used for Wilson intervals.
pub const WILSON_Z: f64 = 1.959963984540054;

/// Subsamplability parameters: subsample size `m`, Loewner band half-width
/// `alpha`, failure probability `beta`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SubsampParams {
    pub m: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl SubsampParams {
    pub fn new(m: usize, alpha: f64, beta: f64) -> Result<Self> {
        if m < 1 {
            return Err(Error::invalid("m", "subsample size must be at least 1"));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid("alpha", "must lie in (0, 1)"));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::invalid("beta", "must lie in (0, 1)"));
        }
        Ok(SubsampParams { m, alpha, beta })
    }
}

/// Tail points of a dataset: those whose leverage against the full second
/// moment exceeds `m (1 + alpha)`, so a single squared projection can
/// dominate a size-m subsample.
#[derive(Debug, Clone)]
pub struct TailReport {
    /// Leverage cutoff `m (1 + alpha)`.
    pub threshold: f64,
    /// Per-point leverage `x' S^+ x`; infinite when the point has mass
    /// outside the numerical range of the moment.
    pub leverages: Vec<f64>,
    /// Indices with leverage strictly above the cutoff, ascending.
    pub indices: Vec<usize>,
    /// Dataset size the fractions refer to.
    pub n: usize,
}

impl TailReport {
    /// Tail fraction `|indices| / n`.
    pub fn fraction(&self) -> f64 {
        self.indices.len() as f64 / self.n as f64
    }

    pub fn is_tail(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }
}

/// Finds the tail points of `data` for subsample size `m` and band `alpha`.
///
/// Membership reduces to the leverage criterion `x' S^+ x > m (1 + alpha)`;
/// the supremum over directions u of `<x,u>^2 / (u' S u)` is attained at
/// `u = S^+ x`. Points with more than a 1e-9 relative share of their mass
/// outside the range of `S` count as infinite leverage and are always tail.
pub fn tail_points(data: &Dataset, m: usize, alpha: f64) -> Result<TailReport> {
    if m < 1 {
        return Err(Error::invalid("m", "subsample size must be at least 1"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha", "must lie in (0, 1)"));
    }
    let sigma = second_moment(data);
    let pinv = pseudo_inverse(&sigma)?;
    let threshold = m as f64 * (1.0 + alpha);
    let mut leverages = Vec::with_capacity(data.len());
    let mut indices = Vec::new();
    for (i, x) in data.iter().enumerate() {
        let norm2: f64 = x.iter().map(|&v| v * v).sum();
        let stray = pinv.out_of_range_mass(x)?;
        let lev = if stray > matcore::RANGE_MASS_TOL * norm2 {
            f64::INFINITY
        } else {
            pinv.leverage(x)?
        };
        if lev > threshold {
            indices.push(i);
        }
        leverages.push(lev);
    }
    Ok(TailReport { threshold, leverages, indices, n: data.len() })
}

/// Second moment of the non-tail points, still divided by the full `n`.
pub fn effective_second_moment(data: &Dataset, tail: &TailReport) -> Result<SymMat> {
    if tail.n != data.len() {
        return Err(Error::DimensionMismatch {
            context: "effective second moment",
            left: tail.n,
            right: data.len(),
        });
    }
    let d = data.dim();
    let mut acc = SymMat::zeros(d);
    for (i, x) in data.iter().enumerate() {
        if tail.is_tail(i) {
            continue;
        }
        for a in 0..d {
            for b in a..d {
                acc.set(a, b, acc.get(a, b) + x[a] * x[b]);
            }
        }
    }
    Ok(acc.scale(1.0 / data.len() as f64))
}

/// Result of a Monte-Carlo subsamplability check.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SubsampCheck {
    pub trials: usize,
    pub failures: usize,
    /// `failures / trials`.
    pub failure_rate: f64,
    /// Wilson 95% interval for the failure probability.
    pub wilson_low: f64,
    pub wilson_high: f64,
}

/// Wilson 95% score interval for `failures` out of `trials`, clamped to
/// [0, 1].
pub fn wilson_interval(failures: usize, trials: usize) -> (f64, f64) {
    debug_assert!(trials >= 1 && failures <= trials);
    let n = trials as f64;
    let p = failures as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Estimates the probability that a with-replacement subsample of size `m`
/// falls outside the `(1 +- alpha)` Loewner band around the full second
/// moment. The band check uses tolerance 0 on the raw inequalities, so a
/// rank-deficient subsample of a full-rank moment always counts as a
/// failure. Trials run in parallel on split substreams of `rng`.
pub fn empirical_subsamplability(
    data: &Dataset,
    m: usize,
    alpha: f64,
    trials: usize,
    rng: &RngState,
) -> Result<SubsampCheck> {
    if m < 1 {
        return Err(Error::invalid("m", "subsample size must be at least 1"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha", "must lie in (0, 1)"));
    }
    if trials < 1 {
        return Err(Error::invalid("trials", "need at least one trial"));
    }
    let d = data.dim();
    let n = data.len() as u64;
    let sigma = second_moment(data);
    let lower = sigma.scale(1.0 - alpha);
    let upper = sigma.scale(1.0 + alpha);
    let fails: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<bool> {
            let mut r = rng.substream_named("subsamp-trial", t as u64);
            let mut buf = Vec::with_capacity(m * d);
            for _ in 0..m {
                let idx = r.below(n) as usize;
                buf.extend_from_slice(data.point(idx));
            }
            let hat = second_moment_rows(&buf, d);
            let ok = loewner_leq(&lower, &hat, 0.0)? && loewner_leq(&hat, &upper, 0.0)?;
            Ok(!ok)
        })
        .collect::<Result<_>>()?;
    let failures = fails.iter().filter(|&&f| f).count();
    let (wilson_low, wilson_high) = wilson_interval(failures, trials);
    Ok(SubsampCheck {
        trials,
        failures,
        failure_rate: failures as f64 / trials as f64,
        wilson_low,
        wilson_high,
    })
}

/// Runs [`empirical_subsamplability`] at subsample sizes `m * factor` for
/// each factor, approximating the "every size at least m" quantifier on a
/// small grid. Returns `(subsample size, check)` pairs in input order.
pub fn subsamplability_grid(
    data: &Dataset,
    m: usize,
    alpha: f64,
    trials: usize,
    factors: &[usize],
    rng: &RngState,
) -> Result<Vec<(usize, SubsampCheck)>> {
    if factors.is_empty() {
        return Err(Error::invalid("factors", "grid must be nonempty"));
    }
    let mut out = Vec::with_capacity(factors.len());
    for (k, &f) in factors.iter().enumerate() {
        if f < 1 {
            return Err(Error::invalid("factors", "each factor must be at least 1"));
        }
        let sub = rng.substream_named("subsamp-grid", k as u64);
        out.push((m * f, empirical_subsamplability(data, m * f, alpha, trials, &sub)?));
    }
    Ok(out)
}

/// Matrix-Bernstein sample size: the subsample size at which a distribution
/// with directional second moment at most `m2` and mean-norm proxy `m1`
/// concentrates to relative error `alpha` with failure probability `beta`
/// in dimension `d`. Computes `ceil(max{2 m2 / alpha^2,
/// 2 (1 + m1^2) / (3 alpha)} * ln(4 d / beta))`.
pub fn bernstein_sample_bound(m1: f64, m2: f64, alpha: f64, beta: f64, d: usize) -> Result<usize> {
    if !(m1.is_finite() && m1 >= 0.0) {
        return Err(Error::invalid("m1", "must be finite and nonnegative"));
    }
    if !(m2.is_finite() && m2 > 0.0) {
        return Err(Error::invalid("m2", "must be finite and positive"));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid("alpha", "must be finite and positive"));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid("beta", "must lie in (0, 1)"));
    }
    if d < 1 {
        return Err(Error::invalid("d", "dimension must be at least 1"));
    }
    let lead = (2.0 * m2 / (alpha * alpha)).max(2.0 * (1.0 + m1 * m1) / (3.0 * alpha));
    let value = lead * (4.0 * d as f64 / beta).ln();
    ceil_to_usize(value, "bernstein sample bound")
}

/// Privacy budget a plan is drawn against.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum PlanBudget {
    /// Concentrated DP budget, used directly by the recursive estimator.
    Zcdp { rho: f64 },
    /// Approximate DP budget, used directly by the baseline estimator.
    Approx { eps: f64, delta: f64 },
}

/// Tunable constants the accuracy theorems leave unspecified.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PlanOptions {
    /// Multiplier on the recursive estimator's sample bound.
    pub const_c: f64,
    /// The constant C inside the baseline rotation magnitude eta.
    pub c_mult: f64,
    /// Base for the logarithms whose base the bounds leave open.
    pub log_base: f64,
    /// Delta used to translate a zCDP budget into an approximate-DP budget
    /// for the baseline bound (and the reverse direction for the recursive
    /// bound).
    pub zcdp_delta: f64,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions { const_c: 1.0, c_mult: 1.0, log_base: 2.0, zcdp_delta: 1e-6 }
    }
}

/// Sample-size plan for both estimators at a common parameter set.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SamplePlan {
    /// Exact level count `log_{7/3}((1/(1-alpha)) kappa / (640 m))`,
    /// clamped at 0, where `kappa = R^2 / lambda_min`.
    pub t_exact: f64,
    /// Levels the recursive estimator will execute: `ceil(t_exact) + 1`,
    /// or 1 when the cascade terminates immediately.
    pub levels_hint: usize,
    /// Samples for the recursive estimator's accuracy guarantee.
    pub n_recursive: usize,
    /// Samples for the baseline estimator's accuracy guarantee.
    pub n_baseline: usize,
    /// Rotation magnitude eta the baseline bound was evaluated at.
    pub eta: f64,
    /// Largest beta the recursive guarantee tolerates at these settings;
    /// infinite when the condition is vacuous.
    pub beta_threshold: f64,
    /// Whether the requested beta meets `beta_threshold`.
    pub beta_ok: bool,
    /// Whether `m >= 2 beta n / xi` holds at `n = n_baseline`.
    pub baseline_m_ok: bool,
}

/// Evaluates the sample-size conditions of both estimators.
///
/// `radius` bounds the point norms and `lambda_min` lower-bounds the second
/// moment's spectrum, so `kappa = radius^2 / lambda_min` is the condition
/// number after preconditioning. `gamma` is the recursive estimator's
/// relative accuracy target and `xi` the failure probability. Budgets are
/// converted between the two privacy currencies with `opts.zcdp_delta`.
#[allow(clippy::too_many_arguments)]
pub fn plan_sample_sizes(
    params: &SubsampParams,
    d: usize,
    budget: &PlanBudget,
    gamma: f64,
    xi: f64,
    radius: f64,
    lambda_min: f64,
    opts: &PlanOptions,
) -> Result<SamplePlan> {
    if d < 1 {
        return Err(Error::invalid("d", "dimension must be at least 1"));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid("gamma", "must be finite and positive"));
    }
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::invalid("xi", "must lie in (0, 1)"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid("radius", "must be finite and positive"));
    }
    if !(lambda_min > 0.0 && lambda_min.is_finite()) {
        return Err(Error::invalid("lambda_min", "must be finite and positive"));
    }
    if !(opts.const_c >= 0.0 && opts.const_c.is_finite()) {
        return Err(Error::invalid("const_c", "must be finite and nonnegative"));
    }
    if !(opts.c_mult > 0.0 && opts.c_mult.is_finite()) {
        return Err(Error::invalid("c_mult", "must be finite and positive"));
    }
    if !(opts.log_base > 1.0 && opts.log_base.is_finite()) {
        return Err(Error::invalid("log_base", "must exceed 1"));
    }
    if !(opts.zcdp_delta > 0.0 && opts.zcdp_delta < 1.0) {
        return Err(Error::invalid("zcdp_delta", "must lie in (0, 1)"));
    }
    let (rho, eps, delta) = match *budget {
        PlanBudget::Zcdp { rho } => {
            let eps = zcdp_to_approx_eps(rho, opts.zcdp_delta)?;
            (rho, eps, opts.zcdp_delta)
        }
        PlanBudget::Approx { eps, delta } => (approx_to_zcdp_rho(eps, delta)?, eps, delta),
    };

    let m = params.m as f64;
    let alpha = params.alpha;
    let kappa = radius * radius / lambda_min;
    let logb = |v: f64| v.ln() / opts.log_base.ln();

    let arg = (1.0 / (1.0 - alpha)) * kappa / (640.0 * m);
    let t_exact = if arg <= 1.0 { 0.0 } else { arg.ln() / (7.0f64 / 3.0).ln() };
    let levels_hint = if t_exact <= 0.0 { 1 } else { t_exact.ceil() as usize + 1 };

    // Recursive bound: m sqrt(d/rho) (sqrt(T) log(T/xi) + log(1/xi)/gamma),
    // each term floored at zero; only the terminal level remains when the
    // cascade is trivial.
    let per_level = if t_exact > 0.0 {
        (t_exact.sqrt() * logb(t_exact / xi)).max(0.0)
    } else {
        0.0
    };
    let terminal = (logb(1.0 / xi) / gamma).max(0.0);
    let n_recursive = ceil_to_usize(
        opts.const_c * m * (d as f64 / rho).sqrt() * (per_level + terminal),
        "recursive sample bound",
    )?;

    // Baseline bound: 800 m times the largest of the five theorem terms.
    let eta = alpha / (48.0 * opts.c_mult * ((d as f64).sqrt() + (4.0 / xi).ln().sqrt()));
    let ln2d = (2.0 / delta).ln();
    let t1 = (2.0 * d as f64 * (d as f64 + 1.0 / (eta * eta)) / eps).sqrt();
    let t2 = 8.0 * d as f64 * ln2d.sqrt() / eps;
    let t3 = 8.0 * ln2d / eps;
    let t4 = 12.0 * (d as f64 * ln2d).sqrt() / (eps * eta);
    let t5 = (eps.exp_m1() / (2.0 * delta)).ln_1p() / (80.0 * eps);
    let worst = t1.max(t2).max(t3).max(t4).max(t5);
    let n_baseline = ceil_to_usize(800.0 * m * worst, "baseline sample bound")?;

    // Recursive beta condition; vacuous when the log term is nonpositive.
    let beta_arg = kappa / ((1.0 + alpha) * m);
    let beta_log = logb(beta_arg);
    let (beta_threshold, beta_ok) = if beta_log <= 0.0 {
        (f64::INFINITY, true)
    } else {
        let thr = alpha / (4.0 * (1.0 + alpha) * beta_log);
        (thr, params.beta <= thr)
    };

    let baseline_m_ok = m >= 2.0 * params.beta * n_baseline as f64 / xi;

    Ok(SamplePlan {
        t_exact,
        levels_hint,
        n_recursive,
        n_baseline,
        eta,
        beta_threshold,
        beta_ok,
        baseline_m_ok,
    })
}

fn ceil_to_usize(value: f64, what: &'static str) -> Result<usize> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::invalid(what, "must be finite and nonnegative"));
    }
    let up = value.ceil();
    if up > u64::MAX as f64 {
        return Err(Error::invalid(what, "overflows a machine integer"));
    }
    Ok(up as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::eig_sym;

    fn dataset_1d(values: &[f64], radius: f64) -> Dataset {
        Dataset::new(1, values.to_vec(), radius).unwrap()
    }

    #[test]
    fn tail_identifies_the_one_dimensional_outlier() {
        let data = dataset_1d(&[1.0, 1.0, 1.0, 10.0], 10.0);
        let report = tail_points(&data, 2, 0.5).unwrap();
        assert_eq!(report.threshold, 3.0);
        assert_eq!(report.indices, vec![3]);
        assert_eq!(report.fraction(), 0.25);
        // second moment 25.75, so the outlier's leverage is 100/25.75
        assert!((report.leverages[3] - 3.883495145631068).abs() < 1e-12);
        assert!((report.leverages[0] - 0.038834951456310676).abs() < 1e-14);
        assert!(report.is_tail(3) && !report.is_tail(0));
    }

    #[test]
    fn equal_points_have_unit_leverage_and_no_tail() {
        let points = vec![2.0, 0.0, 2.0, 0.0, 2.0, 0.0, 2.0, 0.0, 2.0, 0.0];
        let data = Dataset::new(2, points, 2.0).unwrap();
        let report = tail_points(&data, 2, 0.5).unwrap();
        assert!(report.indices.is_empty());
        for &lev in &report.leverages {
            assert!((lev - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn off_range_points_have_infinite_leverage() {
        // rank-deficient moment: the tiny second coordinate falls below the
        // rank cutoff, so the second point lives outside the range
        let data = Dataset::new(2, vec![1.0, 0.0, 0.0, 1e-13], 1.0).unwrap();
        let report = tail_points(&data, 2, 0.5).unwrap();
        assert_eq!(report.indices, vec![1]);
        assert!(report.leverages[1].is_infinite());
        assert!(report.leverages[0].is_finite());
    }

    #[test]
    fn effective_moment_drops_tail_points() {
        let data = dataset_1d(&[1.0, 1.0, 1.0, 10.0], 10.0);
        let report = tail_points(&data, 2, 0.5).unwrap();
        let eff = effective_second_moment(&data, &report).unwrap();
        assert_eq!(eff.get(0, 0), 0.75);

        // empty tail reproduces the full moment exactly
        let calm = dataset_1d(&[1.0, -1.0, 1.0, -1.0], 1.0);
        let none = tail_points(&calm, 2, 0.5).unwrap();
        assert!(none.indices.is_empty());
        let full = effective_second_moment(&calm, &none).unwrap();
        assert_eq!(full.get(0, 0), second_moment(&calm).get(0, 0));

        // all points tail gives the zero matrix
        let all = TailReport {
            threshold: 0.0,
            leverages: vec![f64::INFINITY; 4],
            indices: vec![0, 1, 2, 3],
            n: 4,
        };
        let zero = effective_second_moment(&calm, &all).unwrap();
        assert_eq!(zero.get(0, 0), 0.0);
    }

    #[test]
    fn identical_points_never_fail_the_check() {
        let points: Vec<f64> = (0..6).flat_map(|_| [0.5, -0.25]).collect();
        let data = Dataset::new(2, points, 1.0).unwrap();
        let rng = RngState::new(3, 1);
        let check = empirical_subsamplability(&data, 3, 0.5, 64, &rng).unwrap();
        assert_eq!(check.failures, 0);
        assert_eq!(check.failure_rate, 0.0);
        assert_eq!(check.wilson_low, 0.0);
    }

    #[test]
    fn orthogonal_pair_always_fails_at_subsample_size_one() {
        // a single sampled point has a rank-1 moment, which can never
        // dominate (1 - alpha) times the rank-2 full moment
        let data = Dataset::new(2, vec![1.0, 0.0, 0.0, 1.0], 1.0).unwrap();
        let rng = RngState::new(5, 2);
        let check = empirical_subsamplability(&data, 1, 0.5, 50, &rng).unwrap();
        assert_eq!(check.failures, 50);
        assert_eq!(check.failure_rate, 1.0);
        let (lo, hi) = wilson_interval(50, 50);
        assert_eq!(check.wilson_low, lo);
        assert_eq!(check.wilson_high, hi);
    }

    #[test]
    fn check_replays_from_the_seed() {
        let points: Vec<f64> = (0..40)
            .map(|i| if i % 2 == 0 { 1.0 + 0.01 * i as f64 } else { -1.0 - 0.01 * i as f64 })
            .collect();
        let data = dataset_1d(&points, 2.0);
        let rng = RngState::new(11, 4);
        let a = empirical_subsamplability(&data, 5, 0.3, 40, &rng).unwrap();
        let b = empirical_subsamplability(&data, 5, 0.3, 40, &rng).unwrap();
        assert_eq!(a, b);
        let c = empirical_subsamplability(&data, 5, 0.3, 40, &RngState::new(12, 4)).unwrap();
        assert!(a.failures != c.failures || a == c);
    }

    #[test]
    fn grid_covers_the_requested_factors() {
        let points: Vec<f64> = (0..30).map(|i| ((i % 7) as f64 - 3.0) / 3.0 + 0.1).collect();
        let data = dataset_1d(&points, 2.0);
        let rng = RngState::new(7, 7);
        let grid = subsamplability_grid(&data, 2, 0.5, 30, &[1, 2, 4], &rng).unwrap();
        assert_eq!(grid.len(), 3);
        assert_eq!(grid[0].0, 2);
        assert_eq!(grid[1].0, 4);
        assert_eq!(grid[2].0, 8);
        // larger subsamples concentrate no worse on this well-spread data
        assert!(grid[2].1.failures <= grid[0].1.failures);
        assert!(subsamplability_grid(&data, 2, 0.5, 30, &[], &rng).is_err());
        assert!(subsamplability_grid(&data, 2, 0.5, 30, &[0], &rng).is_err());
    }

    #[test]
    fn wilson_bounds_are_pinned() {
        let (lo0, hi0) = wilson_interval(0, 200);
        assert!(lo0 <= 1e-15);
        assert!((hi0 - 0.018845326377266575).abs() < 1e-12);
        let (lo1, hi1) = wilson_interval(200, 200);
        assert!((lo1 - 0.9811546736227335).abs() < 1e-12);
        assert!(hi1 >= 1.0 - 1e-12 && hi1 <= 1.0);
        let (lo2, hi2) = wilson_interval(10, 40);
        assert!((lo2 - 0.14187118639096302).abs() < 1e-12);
        assert!((hi2 - 0.40193961420768026).abs() < 1e-12);
    }

    #[test]
    fn leverage_reduction_matches_the_witness_direction() {
        // membership by leverage must equal membership by the witness
        // direction u = S^+ x in the raw definition, and any random search
        // direction can only certify points the leverage rule already takes
        let mut rng = RngState::new(21, 0);
        for case in 0..200 {
            let d = 1 + (case % 3);
            let n = 8 + (case % 43);
            let m = 1 + (case % 4);
            let alpha = 0.5;
            let mut points = Vec::with_capacity(n * d);
            for _ in 0..n * d {
                points.push(rng.normal() + 0.3);
            }
            let radius =
                points.chunks(d).map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(
                    0.0,
                    f64::max,
                );
            let data = Dataset::new(d, points, radius.max(1e-6)).unwrap();
            let sigma = second_moment(&data);
            let pinv = pseudo_inverse(&sigma).unwrap();
            let report = tail_points(&data, m, alpha).unwrap();
            let threshold = report.threshold;
            for (i, x) in data.iter().enumerate() {
                let lev = report.leverages[i];
                if !lev.is_finite() || (lev - threshold).abs() < 1e-6 * threshold {
                    continue;
                }
                // witness direction
                let u = pinv.inv.apply(x).unwrap();
                let proj: f64 = x.iter().zip(&u).map(|(a, b)| a * b).sum();
                let mass = sigma.quad(&u).unwrap();
                let by_witness = proj * proj > threshold * mass * (1.0 - 1e-9);
                assert_eq!(report.is_tail(i), by_witness, "case {case} point {i}");
                // random directions never certify non-members
                for k in 0..20 {
                    let mut v = rng.substream(case as u64 * 1000 + k);
                    let dir: Vec<f64> = (0..d).map(|_| v.normal()).collect();
                    let p: f64 = x.iter().zip(&dir).map(|(a, b)| a * b).sum();
                    let dm = sigma.quad(&dir).unwrap();
                    if dm > 0.0 && p * p > threshold * dm * (1.0 + 1e-8) {
                        assert!(
                            report.is_tail(i),
                            "case {case}: direction found a non-member"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn tail_fraction_shrinks_with_subsample_size() {
        // the heavier the subsample the fewer points can dominate it
        let mut rng = RngState::new(33, 1);
        let d = 2;
        let n = 400;
        let mut points = Vec::with_capacity(n * d);
        for _ in 0..n * d {
            points.push(rng.normal());
        }
        let radius = points.chunks(d).map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(
            0.0,
            f64::max,
        );
        let data = Dataset::new(d, points, radius).unwrap();
        let f2 = tail_points(&data, 2, 0.5).unwrap().fraction();
        let f8 = tail_points(&data, 8, 0.5).unwrap().fraction();
        assert!(f8 <= f2);
    }

    #[test]
    fn bernstein_bound_matches_the_ellipsoid_case() {
        // d=4 ellipsoid moments: M1 = sqrt(d), M2 = d
        assert_eq!(bernstein_sample_bound(2.0, 4.0, 0.5, 0.1, 4).unwrap(), 163);
        // second branch dominates when M2 vanishes
        assert_eq!(bernstein_sample_bound(0.0, 1e-12, 1.0, 0.1, 4).unwrap(), 4);
        // doubling beta never increases the bound
        for &(m1, m2, a, d) in &[(2.0, 4.0, 0.5, 4usize), (1.0, 1.0, 0.25, 2), (0.5, 3.0, 0.8, 7)]
        {
            for &beta in &[0.01, 0.05, 0.2, 0.4] {
                let tight = bernstein_sample_bound(m1, m2, a, beta, d).unwrap();
                let loose = bernstein_sample_bound(m1, m2, a, (2.0 * beta).min(0.9), d).unwrap();
                assert!(loose <= tight);
            }
        }
        assert!(bernstein_sample_bound(2.0, 0.0, 0.5, 0.1, 4).is_err());
        assert!(bernstein_sample_bound(2.0, 4.0, 0.5, 1.0, 4).is_err());
    }

    #[test]
    fn plan_hits_the_exact_log_identity() {
        let params = SubsampParams::new(1, 0.5, 0.01).unwrap();
        let radius = (320.0f64 * (7.0 / 3.0) * (7.0 / 3.0)).sqrt();
        let plan = plan_sample_sizes(
            &params,
            3,
            &PlanBudget::Zcdp { rho: 0.5 },
            0.3,
            0.05,
            radius,
            1.0,
            &PlanOptions::default(),
        )
        .unwrap();
        assert!((plan.t_exact - 2.0).abs() < 1e-12);
        assert_eq!(plan.levels_hint, 3);
    }

    #[test]
    fn trivial_cascade_keeps_only_the_terminal_term() {
        let params = SubsampParams::new(2, 0.5, 0.01).unwrap();
        // kappa = 16 <= 640 m (1 - alpha), so the cascade never iterates
        let plan = plan_sample_sizes(
            &params,
            3,
            &PlanBudget::Zcdp { rho: 0.5 },
            0.3,
            0.05,
            4.0,
            1.0,
            &PlanOptions::default(),
        )
        .unwrap();
        assert_eq!(plan.t_exact, 0.0);
        assert_eq!(plan.levels_hint, 1);
        // n = m sqrt(d/rho) log2(1/xi)/gamma, ceiled
        let expect = 2.0 * (3.0f64 / 0.5).sqrt() * (20.0f64.ln() / 2.0f64.ln()) / 0.3;
        assert_eq!(plan.n_recursive, expect.ceil() as usize);
        // kappa below (1 + alpha) m makes the beta condition vacuous
        let vac = plan_sample_sizes(
            &params,
            3,
            &PlanBudget::Zcdp { rho: 0.5 },
            0.3,
            0.05,
            1.2,
            1.0,
            &PlanOptions::default(),
        )
        .unwrap();
        assert!(vac.beta_threshold.is_infinite());
        assert!(vac.beta_ok);
    }

    #[test]
    fn plan_values_are_pinned() {
        // m=2, alpha=0.4, d=3, gamma=0.3, xi=0.05, R^2=64000, lambda_min=2
        let params = SubsampParams::new(2, 0.4, 0.01).unwrap();
        let plan = plan_sample_sizes(
            &params,
            3,
            &PlanBudget::Approx { eps: 1.0, delta: 1e-6 },
            0.3,
            0.05,
            64000.0f64.sqrt(),
            2.0,
            &PlanOptions::default(),
        )
        .unwrap();
        assert!((plan.t_exact - 4.401877572226806).abs() < 1e-10);
        assert_eq!(plan.levels_hint, 6);
        assert_eq!(plan.n_recursive, 527);
        assert_eq!(plan.n_baseline, 58147533);
        assert!((plan.eta - 0.002178432882369251).abs() < 1e-15);
        assert!((plan.beta_threshold - 0.0052987149379243115).abs() < 1e-15);
        assert!(!plan.beta_ok);
        assert!(!plan.baseline_m_ok);
    }

    #[test]
    fn beta_threshold_is_pinned() {
        let params = SubsampParams::new(1, 0.5, 0.01).unwrap();
        let radius = (4.0f64.exp() * 1.5).sqrt();
        let plan = plan_sample_sizes(
            &params,
            2,
            &PlanBudget::Zcdp { rho: 0.5 },
            0.3,
            0.05,
            radius,
            1.0,
            &PlanOptions::default(),
        )
        .unwrap();
        assert!((plan.beta_threshold - 0.01444056626166553).abs() < 1e-14);
        assert!(plan.beta_ok);
        let tight = SubsampParams::new(1, 0.5, 0.02).unwrap();
        let plan2 = plan_sample_sizes(
            &tight,
            2,
            &PlanBudget::Zcdp { rho: 0.5 },
            0.3,
            0.05,
            radius,
            1.0,
            &PlanOptions::default(),
        )
        .unwrap();
        assert!(!plan2.beta_ok);
    }

    #[test]
    fn zero_constant_zeroes_the_recursive_plan() {
        let params = SubsampParams::new(1, 0.5, 0.01).unwrap();
        let opts = PlanOptions { const_c: 0.0, ..PlanOptions::default() };
        let plan = plan_sample_sizes(
            &params,
            3,
            &PlanBudget::Zcdp { rho: 0.5 },
            0.3,
            0.05,
            100.0,
            1.0,
            &opts,
        )
        .unwrap();
        assert_eq!(plan.n_recursive, 0);
        assert!(plan.n_baseline > 0);
    }

    #[test]
    fn bad_settings_are_rejected() {
        assert!(SubsampParams::new(0, 0.5, 0.1).is_err());
        assert!(SubsampParams::new(1, 0.0, 0.1).is_err());
        assert!(SubsampParams::new(1, 0.5, 1.0).is_err());
        let data = dataset_1d(&[1.0, 2.0], 2.0);
        assert!(tail_points(&data, 0, 0.5).is_err());
        assert!(tail_points(&data, 1, 1.0).is_err());
        let rng = RngState::new(0, 0);
        assert!(empirical_subsamplability(&data, 1, 0.5, 0, &rng).is_err());
        let params = SubsampParams::new(1, 0.5, 0.1).unwrap();
        let opts = PlanOptions::default();
        let budget = PlanBudget::Zcdp { rho: 0.5 };
        assert!(plan_sample_sizes(&params, 0, &budget, 0.3, 0.05, 1.0, 1.0, &opts).is_err());
        assert!(plan_sample_sizes(&params, 2, &budget, 0.0, 0.05, 1.0, 1.0, &opts).is_err());
        assert!(plan_sample_sizes(&params, 2, &budget, 0.3, 1.5, 1.0, 1.0, &opts).is_err());
        assert!(plan_sample_sizes(&params, 2, &budget, 0.3, 0.05, 0.0, 1.0, &opts).is_err());
        assert!(plan_sample_sizes(&params, 2, &budget, 0.3, 0.05, 1.0, 0.0, &opts).is_err());
        let bad = PlanOptions { log_base: 1.0, ..PlanOptions::default() };
        assert!(plan_sample_sizes(&params, 2, &budget, 0.3, 0.05, 1.0, 1.0, &bad).is_err());
    }

    #[test]
    fn effective_moment_respects_lemma_nine_shape() {
        // non-tail points keep at least (1 - alpha) of every direction on a
        // well-spread cloud
        let mut rng = RngState::new(44, 2);
        let d = 2;
        let n = 500;
        let mut points = Vec::with_capacity(n * d);
        for _ in 0..n * d {
            points.push(rng.normal());
        }
        let radius = points.chunks(d).map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(
            0.0,
            f64::max,
        );
        let data = Dataset::new(d, points, radius).unwrap();
        let alpha = 0.5;
        let report = tail_points(&data, 4, alpha).unwrap();
        let eff = effective_second_moment(&data, &report).unwrap();
        let sigma = second_moment(&data);
        let lo = eig_sym(&sigma).unwrap().min_value();
        let lo_eff = eig_sym(&eff).unwrap().min_value();
        assert!(lo_eff >= (1.0 - alpha) * lo - 1e-9);
    }
}
