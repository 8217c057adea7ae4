//! Private minimum-eigenvalue estimation via a stability histogram.
//!
//! Group minimum eigenvalues are bucketed on a geometric grid; a bucket is
//! released only when its Laplace-noised count clears a stability threshold,
//! and the winner is the released bucket with the largest noisy count. When
//! nothing is stable the mechanism declines to answer, which is an ordinary
//! outcome, not an error.

use crate::error::{Error, Result};
use crate::matcore::{eig_sym, second_moment_rows, Dataset};
use crate::noise::{laplace_sample, RngState};
use crate::privacy::ApproxDpBudget;

use super::shuffled_indices;

/// Cap on grid size so a tiny `alpha` cannot allocate an absurd histogram.
const MAX_BUCKETS: usize = 200_000;

/// Geometric bucket grid with ratio `1/(1-alpha)`, anchored at 1.
///
/// Bucket `i` covers `[lower(i), lower(i+1))`; the first bucket is a
/// catch-all `[0, smallest edge)` for values below the floor and the last
/// extends to infinity. Values are clamped at 0 before bucketing, so the
/// slightly negative eigenvalues that rounding produces land in the
/// catch-all.
#[derive(Debug, Clone)]
pub struct BucketGrid {
    lowers: Vec<f64>,
}

impl BucketGrid {
    pub fn geometric(alpha: f64, floor: f64, cap: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid("alpha", "must be in (0, 1)"));
        }
        if !(floor.is_finite() && floor > 0.0) {
            return Err(Error::invalid("lambda_floor", "must be finite and positive"));
        }
        if !(cap.is_finite() && cap > floor) {
            return Err(Error::invalid("lambda_cap", "must be finite and above the floor"));
        }
        let shrink = 1.0 - alpha;
        let grow = 1.0 / shrink;
        let mut down = Vec::new();
        let mut e = 1.0;
        while e > floor {
            e *= shrink;
            down.push(e);
            if down.len() > MAX_BUCKETS {
                return Err(Error::invalid("alpha", "grid would exceed the bucket cap"));
            }
        }
        let mut up = Vec::new();
        let mut e = 1.0;
        while e < cap {
            e *= grow;
            up.push(e);
            if up.len() > MAX_BUCKETS {
                return Err(Error::invalid("alpha", "grid would exceed the bucket cap"));
            }
        }
        let mut lowers = vec![0.0];
        lowers.extend(down.iter().rev());
        lowers.push(1.0);
        lowers.extend(up.iter());
        Ok(BucketGrid { lowers })
    }

    pub fn len(&self) -> usize {
        self.lowers.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Lower edges, ascending, starting at 0.
    pub fn lowers(&self) -> &[f64] {
        &self.lowers
    }

    pub fn lower(&self, i: usize) -> f64 {
        self.lowers[i]
    }

    pub fn upper(&self, i: usize) -> f64 {
        if i + 1 < self.lowers.len() {
            self.lowers[i + 1]
        } else {
            f64::INFINITY
        }
    }

    /// Index of the bucket containing `v` (lower edge closed, upper open).
    pub fn bucket_of(&self, v: f64) -> usize {
        let v = v.max(0.0);
        self.lowers.partition_point(|&e| e <= v) - 1
    }
}

/// Count threshold a noisy bucket must exceed to be released:
/// `1 + 2 ln(2/delta) / eps`.
pub fn stability_threshold(eps: f64, delta: f64) -> Result<f64> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::invalid("eps", "must be finite and positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", "must be in (0, 1)"));
    }
    Ok(1.0 + 2.0 * (2.0 / delta).ln() / eps)
}

/// A bucket that survived the stability test.
#[derive(Debug, Clone)]
pub struct ReleasedBucket {
    pub index: usize,
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub noisy_count: f64,
}

/// `(eps, delta)`-DP stability histogram: each occupied bucket gets
/// `Laplace(2/eps)` count noise and is released only above the stability
/// threshold. Empty buckets are never touched, so the noise draws follow
/// the occupied buckets in ascending order.
pub fn stability_histogram(
    values: &[f64],
    grid: &BucketGrid,
    eps: f64,
    delta: f64,
    zero_noise: bool,
    rng: &mut RngState,
) -> Result<Vec<ReleasedBucket>> {
    let threshold = stability_threshold(eps, delta)?;
    let mut counts = vec![0usize; grid.len()];
    for &v in values {
        counts[grid.bucket_of(v)] += 1;
    }
    let mut released = Vec::new();
    for (i, &count) in counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let noise = if zero_noise {
            0.0
        } else {
            laplace_sample(rng, 2.0 / eps)?
        };
        let noisy_count = count as f64 + noise;
        if noisy_count > threshold {
            released.push(ReleasedBucket {
                index: i,
                lower: grid.lower(i),
                upper: grid.upper(i),
                count,
                noisy_count,
            });
        }
    }
    Ok(released)
}

/// Settings for the private minimum-eigenvalue estimator.
#[derive(Debug, Clone)]
pub struct EigminConfig {
    pub m: usize,
    pub alpha: f64,
    pub eps: f64,
    pub delta: f64,
    /// Smallest positive grid edge. Group eigenvalues below it land in the
    /// catch-all bucket whose released value is 0.
    pub lambda_floor: f64,
    /// Largest grid anchor; defaults to the squared dataset radius, the
    /// largest possible eigenvalue.
    pub lambda_cap: Option<f64>,
    pub zero_noise: bool,
}

impl EigminConfig {
    pub fn new(m: usize, alpha: f64, eps: f64, delta: f64) -> Self {
        EigminConfig {
            m,
            alpha,
            eps,
            delta,
            lambda_floor: 1e-9,
            lambda_cap: None,
            zero_noise: false,
        }
    }
}

#[derive(Debug, Clone)]
pub enum EigminOutcome {
    Released {
        /// Lower edge of the winning bucket.
        value: f64,
        bucket: ReleasedBucket,
        cost: ApproxDpBudget,
        groups: usize,
    },
    NoStableBucket {
        cost: ApproxDpBudget,
        groups: usize,
    },
}

impl EigminOutcome {
    pub fn is_release(&self) -> bool {
        matches!(self, EigminOutcome::Released { .. })
    }

    pub fn cost(&self) -> &ApproxDpBudget {
        match self {
            EigminOutcome::Released { cost, .. } => cost,
            EigminOutcome::NoStableBucket { cost, .. } => cost,
        }
    }
}

/// Estimates the minimum eigenvalue of the second moment: group the data,
/// bucket each group's smallest eigenvalue, release the stablest bucket's
/// lower edge. Ties go to the smaller edge, the conservative answer.
pub fn dp_min_eigenvalue(
    data: &Dataset,
    cfg: &EigminConfig,
    rng: &mut RngState,
) -> Result<EigminOutcome> {
    if cfg.m == 0 {
        return Err(Error::invalid("m", "must be at least 1"));
    }
    let n = data.len();
    let d = data.dim();
    if n < 2 * cfg.m {
        return Err(Error::invalid("n", "need at least two groups: n >= 2m"));
    }
    let cap = cfg.lambda_cap.unwrap_or(data.radius() * data.radius());
    let grid = BucketGrid::geometric(cfg.alpha, cfg.lambda_floor, cap)?;
    let cost = ApproxDpBudget::new(cfg.eps, cfg.delta)?;

    let t = n / cfg.m;
    let idx = shuffled_indices(n, rng);
    let mut lambdas = Vec::with_capacity(t);
    for g in 0..t {
        let mut buf = Vec::with_capacity(cfg.m * d);
        for &i in &idx[g * cfg.m..(g + 1) * cfg.m] {
            buf.extend_from_slice(data.point(i));
        }
        let moment = second_moment_rows(&buf, d);
        lambdas.push(eig_sym(&moment)?.min_value());
    }

    let released =
        stability_histogram(&lambdas, &grid, cfg.eps, cfg.delta, cfg.zero_noise, rng)?;
    let winner = released.into_iter().reduce(|best, b| {
        // strict comparison keeps the earlier (smaller-edge) bucket on ties
        if b.noisy_count > best.noisy_count {
            b
        } else {
            best
        }
    });
    Ok(match winner {
        Some(bucket) => EigminOutcome::Released {
            value: bucket.lower,
            bucket,
            cost,
            groups: t,
        },
        None => EigminOutcome::NoStableBucket { cost, groups: t },
    })
}
