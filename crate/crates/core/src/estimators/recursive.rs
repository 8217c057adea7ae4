//! Recursive preconditioning estimator under zero-concentrated DP.
//!
//! The estimator adds Gaussian-orthogonal-ensemble noise to the empirical
//! second moment at a cascade of levels. Each non-terminal level identifies
//! the subspace where the noisy moment is still large, shrinks it, inflates
//! the remainder, and recurses with a tighter norm bound, so the noise scale
//! (which is driven by the norm bound) decays geometrically. Unwinding the
//! cascade undoes the linear maps exactly; only the injected noise and the
//! radial capping of oversized points perturb the output.
//!
//! Privacy: each level is a Gaussian mechanism on a (4 R_level^2 / n)-
//! sensitive query, charged `rho / levels` so the composed cost is `rho`.

use crate::error::{Error, Result};
use crate::matcore::{second_moment_rows, shrink_map, Dataset, EigenDecomp, Mat, SymMat};
use crate::noise::{gue_sample, RngState};
use crate::privacy::{gaussian_sigma_for_zcdp, sensitivity_second_moment, BudgetLedger};

/// Per-level curvature decay factor. The same constant drives both the level
/// count and the recursion so the two can never disagree.
const DECAY: f64 = 3.0 / 7.0;

/// User-facing estimator settings.
#[derive(Debug, Clone)]
pub struct RecursiveConfig {
    /// Subsample size the data is assumed subsamplable at.
    pub m: usize,
    /// Subsamplability accuracy; must be in `(0, 1/2]`.
    pub alpha: f64,
    /// Total zCDP budget, split evenly across levels.
    pub rho: f64,
    /// Failure probability target carried through to the level parameters.
    pub xi: f64,
    /// Norm bound to calibrate noise with. Defaults to the dataset radius;
    /// an override must still cover every point.
    pub radius: Option<f64>,
    /// Test-mode switch: skip every noise draw (output is then a pure
    /// function of the data).
    pub zero_noise: bool,
    /// Test-mode switch: snapshot the transformed points entering each
    /// level. The snapshots are raw-data diagnostics, not private outputs.
    pub keep_level_points: bool,
}

impl RecursiveConfig {
    pub fn new(m: usize, alpha: f64, rho: f64, xi: f64) -> Self {
        RecursiveConfig {
            m,
            alpha,
            rho,
            xi,
            radius: None,
            zero_noise: false,
            keep_level_points: false,
        }
    }
}

/// Resolved level-schedule parameters.
#[derive(Debug, Clone)]
pub struct RecParams {
    pub eta: f64,
    pub psi: f64,
    pub c_noise: f64,
    pub c_stop: f64,
    /// Curvature bound at the top level (after the `1/(1-alpha)` rescale).
    pub kappa: f64,
    /// Norm bound at the top level (after the rescale).
    pub radius: f64,
    /// Real-valued level exponent `log_{7/3}(kappa / c_stop)`.
    pub t_real: f64,
    /// Number of levels the cascade executes, terminal level included.
    /// The per-level budget is `rho / t_used`.
    pub t_used: usize,
    pub xi: f64,
    pub rho: f64,
    pub alpha: f64,
    pub m: usize,
}

/// One level of the cascade as it ran.
#[derive(Debug, Clone)]
pub struct LevelRecord {
    pub level: usize,
    /// Curvature bound entering this level.
    pub kappa: f64,
    /// Norm bound entering this level.
    pub radius: f64,
    /// Noise scale used at this level.
    pub sigma: f64,
    /// Spectral norm of the injected noise (0 when noise is skipped).
    pub noise_norm: f64,
    /// Whether the noise stayed within the benign-event bound
    /// `noise_norm <= c_noise * kappa`.
    pub event_e: bool,
    /// Dimension of the retained large subspace; 0 at the terminal level,
    /// which computes none.
    pub subspace_dim: usize,
    /// Points capped back to the radius bound when passing to the next
    /// level, by original dataset index.
    pub shrunk_indices: Vec<usize>,
    /// Input points of this level (flat, row-major), if snapshots were
    /// requested.
    pub points: Option<Vec<f64>>,
}

impl LevelRecord {
    pub fn shrunk(&self) -> usize {
        self.shrunk_indices.len()
    }
}

#[derive(Debug, Clone, Default)]
pub struct RecTrace {
    pub levels: Vec<LevelRecord>,
}

impl RecTrace {
    pub fn total_shrunk(&self) -> usize {
        self.levels.iter().map(|l| l.shrunk()).sum()
    }

    pub fn all_noise_benign(&self) -> bool {
        self.levels.iter().all(|l| l.event_e)
    }
}

/// Estimator output: the estimate plus everything needed to audit the run.
#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub sigma_hat: SymMat,
    pub ledger: BudgetLedger,
    pub trace: RecTrace,
    pub params: RecParams,
}

/// Derives the level schedule from the user settings.
///
/// The wrapper rescale multiplies the data by `sqrt(1/(1-alpha))`, so the
/// top-level curvature bound is `kappa = radius^2 / (1-alpha)` and the level
/// count follows from repeatedly multiplying it by 3/7 until it falls to
/// `c_stop = 640 m`.
pub fn derive_params(m: usize, alpha: f64, rho: f64, xi: f64, radius: f64) -> Result<RecParams> {
    if m == 0 {
        return Err(Error::invalid("m", "must be at least 1"));
    }
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::invalid("alpha", "must be in (0, 1/2]"));
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::invalid("rho", "must be finite and positive"));
    }
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::invalid("xi", "must be in (0, 1)"));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::invalid("radius", "must be finite and positive"));
    }
    let mf = m as f64;
    let scale = 1.0 / (1.0 - alpha);
    let kappa = scale * (radius * radius);
    if kappa < 1.0 {
        return Err(Error::invalid(
            "radius",
            "curvature bound radius^2/(1-alpha) is below 1; rescale the data first",
        ));
    }
    let c_stop = 640.0 * mf;
    let t_real = (kappa / c_stop).ln() / (7.0f64 / 3.0).ln();
    // Count levels by replaying the exact float cascade the recursion runs,
    // so the budget split always matches what executes.
    let mut t_used = 1usize;
    let mut k = kappa;
    while k > c_stop {
        k *= DECAY;
        t_used += 1;
    }
    Ok(RecParams {
        eta: 0.5,
        psi: 1.0 / (10.0 * mf),
        c_noise: 1.0 / (80.0 * mf),
        c_stop,
        kappa,
        radius: scale.sqrt() * radius,
        t_real,
        t_used,
        xi,
        rho,
        alpha,
        m,
    })
}

/// Columns of the eigenbasis whose eigenvalue is at least `threshold`
/// (closed comparison). Eigenvalues arrive sorted descending, so the
/// selection is a prefix.
pub fn threshold_subspace(eig: &EigenDecomp, threshold: f64) -> Mat {
    let k = eig.values.iter().take_while(|&&v| v >= threshold).count();
    let idx: Vec<usize> = (0..k).collect();
    eig.vectors.select_columns(&idx)
}

/// Caps every point with squared norm above `(3/7) * radius^2` back onto
/// that sphere, preserving direction. Points already inside pass through
/// bit-identically. Returns the indices that were capped.
pub fn shrink_points(points: &mut [f64], dim: usize, radius: f64) -> Vec<usize> {
    assert!(dim > 0 && points.len() % dim == 0);
    let cap_sq = DECAY * (radius * radius);
    let mut shrunk = Vec::new();
    for (i, p) in points.chunks_mut(dim).enumerate() {
        let norm_sq: f64 = p.iter().map(|&v| v * v).sum();
        if norm_sq > cap_sq {
            let s = (cap_sq / norm_sq).sqrt();
            for v in p.iter_mut() {
                *v *= s;
            }
            shrunk.push(i);
        }
    }
    shrunk
}

/// Rescales a dataset by `1/sqrt(lambda_hat)` so that a known lower bound
/// `lambda_hat` on the population minimum eigenvalue becomes 1.
pub fn precondition(data: &Dataset, lambda_hat: f64) -> Result<Dataset> {
    if !(lambda_hat.is_finite() && lambda_hat > 0.0) {
        return Err(Error::invalid("lambda_hat", "must be finite and positive"));
    }
    let s = 1.0 / lambda_hat.sqrt();
    let points: Vec<f64> = data.points_flat().iter().map(|&v| s * v).collect();
    Dataset::new(data.dim(), points, s * data.radius())
}

/// Runs the full estimator: rescale, noisy cascade, unwind, final rescale.
pub fn estimate(
    data: &Dataset,
    cfg: &RecursiveConfig,
    rng: &mut RngState,
) -> Result<EstimateReport> {
    let radius = match cfg.radius {
        Some(r) => {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::invalid("radius", "must be finite and positive"));
            }
            if data.max_norm() > r * (1.0 + 1e-12) {
                return Err(Error::invalid(
                    "radius",
                    "override is smaller than the largest point norm",
                ));
            }
            r
        }
        None => data.radius(),
    };
    let params = derive_params(cfg.m, cfg.alpha, cfg.rho, cfg.xi, radius)?;
    let dim = data.dim();
    let n = data.len();
    let rho_level = params.rho / params.t_used as f64;

    let scale = (1.0 / (1.0 - params.alpha)).sqrt();
    let mut pts: Vec<f64> = data.points_flat().iter().map(|&v| scale * v).collect();

    let mut ledger = BudgetLedger::new();
    let mut trace = RecTrace::default();
    let mut unwind: Vec<SymMat> = Vec::new();

    let mut kappa = params.kappa;
    let mut level_radius = params.radius;
    let mut level = 0usize;
    let inflate = (8.0f64 / 7.0).sqrt();

    let top = loop {
        let sens = sensitivity_second_moment(level_radius, n)?;
        let sigma = gaussian_sigma_for_zcdp(sens, rho_level)?;
        // the last level is charged whatever is left so the entries always
        // sum to rho bitwise; the remainder is within an ulp of rho / T
        let charge = if level + 1 == params.t_used {
            params.rho - ledger.total_rho()
        } else {
            rho_level
        };
        ledger.charge(format!("level {level}"), charge);

        let moment = second_moment_rows(&pts, dim);
        let (noisy, noise_norm) = if cfg.zero_noise {
            (moment, 0.0)
        } else {
            let noise = gue_sample(rng, dim, sigma)?;
            let norm = noise.spectral_norm()?;
            (moment.add(&noise)?, norm)
        };

        let terminal = kappa <= params.c_stop;
        let mut record = LevelRecord {
            level,
            kappa,
            radius: level_radius,
            sigma,
            noise_norm,
            event_e: noise_norm <= params.c_noise * kappa,
            subspace_dim: 0,
            shrunk_indices: Vec::new(),
            points: cfg.keep_level_points.then(|| pts.clone()),
        };
        if terminal {
            trace.levels.push(record);
            break noisy;
        }

        let eig = crate::matcore::eig_sym(&noisy)?;
        let basis = threshold_subspace(&eig, params.psi * kappa);
        record.subspace_dim = basis.cols();
        let (shrink, unshrink) = shrink_map(&basis, params.eta)?;

        // y = sqrt(8/7) * (shrink x), then cap oversized points.
        let dense = shrink.to_dense();
        let mut scratch = vec![0.0; dim];
        for p in pts.chunks_mut(dim) {
            for (i, s) in scratch.iter_mut().enumerate() {
                let row = &dense.as_slice()[i * dim..(i + 1) * dim];
                *s = inflate * row.iter().zip(p.iter()).map(|(&a, &b)| a * b).sum::<f64>();
            }
            p.copy_from_slice(&scratch);
        }
        record.shrunk_indices = shrink_points(&mut pts, dim, level_radius);
        trace.levels.push(record);

        unwind.push(unshrink);
        kappa *= DECAY;
        level_radius *= DECAY.sqrt();
        level += 1;
    };

    let mut out = top;
    while let Some(unshrink) = unwind.pop() {
        out = out.conjugate(&unshrink)?.scale(7.0 / 8.0);
    }
    let sigma_hat = out.scale(1.0 - params.alpha);
    if !sigma_hat.is_finite() {
        return Err(Error::NonFinite {
            context: "recursive estimate",
        });
    }

    Ok(EstimateReport {
        sigma_hat,
        ledger,
        trace,
        params,
    })
}
