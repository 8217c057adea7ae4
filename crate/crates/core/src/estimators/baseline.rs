//! Subsample-and-aggregate baseline under approximate DP.
//!
//! The data is split into `n/m` groups; each group votes on how many other
//! groups' second moments sit within a fixed relative distance of its own.
//! A truncated-Laplace-noised consensus score decides between aborting and
//! releasing a reweighted group average, randomly rotated to hide the
//! remaining group-level influence.
//!
//! Aborting is an ordinary outcome carrying the same privacy cost as a
//! release: the decision itself consumed budget.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matcore::{second_moment_rows, spectral_dist, sqrt_psd, Dataset, Mat, SymMat};
use crate::noise::{std_normal_matrix, tlap_bound, tlap_sample, RngState};
use crate::privacy::ApproxDpBudget;

use super::shuffled_indices;

/// Settings for one baseline run.
#[derive(Debug, Clone)]
pub struct BaselineConfig {
    /// Group size; the data is assumed `(alpha, beta)`-subsamplable at `m`.
    pub m: usize,
    pub alpha: f64,
    /// Subsamplability failure rate. Only used for the reported
    /// `m >= 2 beta n / xi` precondition flag.
    pub beta: f64,
    /// Failure probability target; drives the rotation magnitude.
    pub xi: f64,
    /// Per-stage privacy parameters. The composed cost of a run is
    /// `(2 eps, 4 e^eps delta)`.
    pub eps: f64,
    pub delta: f64,
    /// Multiplier on the rotation denominator constant (1 reproduces the
    /// printed constant 48).
    pub c_mult: f64,
    /// Test-mode switch: skip the consensus noise and the rotation.
    pub zero_noise: bool,
}

impl BaselineConfig {
    pub fn new(m: usize, alpha: f64, beta: f64, xi: f64, eps: f64, delta: f64) -> Self {
        BaselineConfig {
            m,
            alpha,
            beta,
            xi,
            eps,
            delta,
            c_mult: 1.0,
            zero_noise: false,
        }
    }
}

/// Group-level diagnostics of a run (aggregates only, no raw points).
#[derive(Debug, Clone)]
pub struct GroupStats {
    /// Number of groups `T = floor(n/m)`.
    pub groups: usize,
    /// Per-group closeness scores, each in `[1/T, 1]`.
    pub q: Vec<f64>,
    pub q_mean: f64,
    /// Noised consensus score compared against the abort threshold.
    pub q_noisy: f64,
    pub abort_threshold: f64,
    /// Per-group averaging weights `min(1, 10 max(0, q - 0.6))`.
    pub weights: Vec<f64>,
    /// Rotation magnitude `alpha / (48 C (sqrt(d) + sqrt(ln(4/xi))))`.
    pub eta: f64,
    /// Whether `m >= 2 beta n / xi`, the precondition under which the
    /// accuracy guarantee applies.
    pub m_condition_ok: bool,
}

/// Result of a baseline run. Both arms carry the privacy cost actually paid.
#[derive(Debug, Clone)]
pub enum BaselineOutcome {
    Estimate {
        sigma_hat: SymMat,
        cost: ApproxDpBudget,
        stats: GroupStats,
    },
    Aborted {
        cost: ApproxDpBudget,
        stats: GroupStats,
    },
}

impl BaselineOutcome {
    pub fn stats(&self) -> &GroupStats {
        match self {
            BaselineOutcome::Estimate { stats, .. } => stats,
            BaselineOutcome::Aborted { stats, .. } => stats,
        }
    }

    pub fn cost(&self) -> &ApproxDpBudget {
        match self {
            BaselineOutcome::Estimate { cost, .. } => cost,
            BaselineOutcome::Aborted { cost, .. } => cost,
        }
    }

    pub fn is_abort(&self) -> bool {
        matches!(self, BaselineOutcome::Aborted { .. })
    }
}

/// Averaging weight of a group with closeness score `q`: zero up to 0.6,
/// then a linear ramp reaching 1 at 0.7.
pub fn group_weight(q: f64) -> f64 {
    (10.0 * (q - 0.6).max(0.0)).min(1.0)
}

/// Runs the baseline. Consumes randomness in a fixed order (grouping,
/// consensus noise, rotation) so runs replay exactly from the seed.
pub fn baseline_estimate(
    data: &Dataset,
    cfg: &BaselineConfig,
    rng: &mut RngState,
) -> Result<BaselineOutcome> {
    if cfg.m == 0 {
        return Err(Error::invalid("m", "must be at least 1"));
    }
    for (name, v) in [
        ("alpha", cfg.alpha),
        ("beta", cfg.beta),
        ("xi", cfg.xi),
        ("delta", cfg.delta),
    ] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::invalid(name, "must be in (0, 1)"));
        }
    }
    if !(cfg.eps.is_finite() && cfg.eps > 0.0) {
        return Err(Error::invalid("eps", "must be finite and positive"));
    }
    if !(cfg.c_mult.is_finite() && cfg.c_mult > 0.0) {
        return Err(Error::invalid("c_mult", "must be finite and positive"));
    }
    let n = data.len();
    let d = data.dim();
    if n < 2 * cfg.m {
        return Err(Error::invalid("n", "need at least two groups: n >= 2m"));
    }
    let cost_delta = 4.0 * cfg.eps.exp() * cfg.delta;
    if !(cost_delta < 1.0) {
        return Err(Error::invalid(
            "delta",
            "composed privacy cost 4 e^eps delta reaches 1; lower eps or delta",
        ));
    }
    let cost = ApproxDpBudget::new(2.0 * cfg.eps, cost_delta)?;

    let t = n / cfg.m;
    let idx = shuffled_indices(n, rng);
    let mut groups = Vec::with_capacity(t);
    for g in 0..t {
        let mut buf = Vec::with_capacity(cfg.m * d);
        for &i in &idx[g * cfg.m..(g + 1) * cfg.m] {
            buf.extend_from_slice(data.point(i));
        }
        groups.push(second_moment_rows(&buf, d));
    }

    // closeness scores: fraction of groups within the relative-distance
    // budget; the self pair counts by definition, singular groups are
    // infinitely far from everything
    let close_tol = 2.0 * cfg.alpha / (1.0 - cfg.alpha);
    let tf = t as f64;
    let q: Vec<f64> = groups
        .par_iter()
        .enumerate()
        .map(|(a, ga)| -> Result<f64> {
            let mut count = 1usize;
            for (b, gb) in groups.iter().enumerate() {
                if b != a && spectral_dist(ga, gb)? <= close_tol {
                    count += 1;
                }
            }
            Ok(count as f64 / tf)
        })
        .collect::<Result<Vec<f64>>>()?;
    let q_mean = q.iter().sum::<f64>() / tf;

    let sens = 2.0 / tf;
    let z = if cfg.zero_noise {
        0.0
    } else {
        tlap_sample(rng, sens, cfg.eps, cfg.delta)?
    };
    let q_noisy = q_mean + z;
    let abort_threshold = 0.8 + tlap_bound(sens, cfg.eps, cfg.delta)?;

    let weights: Vec<f64> = q.iter().map(|&v| group_weight(v)).collect();
    let eta = cfg.alpha
        / (48.0 * cfg.c_mult * ((d as f64).sqrt() + (4.0 / cfg.xi).ln().sqrt()));
    let stats = GroupStats {
        groups: t,
        q,
        q_mean,
        q_noisy,
        abort_threshold,
        weights,
        eta,
        m_condition_ok: cfg.m as f64 >= 2.0 * cfg.beta * n as f64 / cfg.xi,
    };

    if q_noisy < abort_threshold {
        return Ok(BaselineOutcome::Aborted { cost, stats });
    }

    // passing the test forces q_mean > 0.6, so some weight is positive
    let weight_sum: f64 = stats.weights.iter().sum();
    debug_assert!(weight_sum > 0.0);
    let mut acc = SymMat::zeros(d);
    for (w, g) in stats.weights.iter().zip(&groups) {
        if *w > 0.0 {
            acc = acc.add(&g.scale(*w))?;
        }
    }
    let sigma_avg = acc.scale(1.0 / weight_sum);

    let sigma_hat = if cfg.zero_noise {
        sigma_avg
    } else {
        let root = sqrt_psd(&sigma_avg)?.to_dense();
        let gauss = std_normal_matrix(rng, d, d);
        let mut perturb = Mat::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let ident = if i == j { 1.0 } else { 0.0 };
                perturb.set(i, j, ident + eta * gauss.get(i, j));
            }
        }
        let rotated = perturb.matmul(&perturb.transpose())?;
        let full = root.matmul(&rotated)?.matmul(&root)?;
        SymMat::from_dense(&full)?
    };
    if !sigma_hat.is_finite() {
        return Err(Error::NonFinite {
            context: "baseline estimate",
        });
    }

    Ok(BaselineOutcome::Estimate {
        sigma_hat,
        cost,
        stats,
    })
}
