//! Synthetic dataset generators with known population second moments.
//!
//! Every generator is a pure function of its RNG stream, so datasets replay
//! exactly from a seed. [`DistSpec`] is the serializable description used by
//! the CLI; the `gen_*` helpers cover the common cases directly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{eig_sym, sqrt_psd, Dataset, SymMat};
use crate::noise::{pareto6_sample, pareto6_second_moment, unit_sphere_sample, RngState};

/// Declarative description of a sampling distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistSpec {
    /// Centered Gaussian with the given second moment.
    Gaussian { sigma: SymMat },
    /// `A^{1/2} u` for `u` uniform on the unit sphere; requires `0 < A <= I`
    /// in the Loewner order, so every point lies in the unit ball.
    Ellipsoid { a: SymMat },
    /// `lambda v` with `lambda` truncated power-law on `[1, b]` and `v`
    /// uniform on the sphere in `dim` dimensions.
    ParetoRadial { b: f64, dim: usize },
    /// `(lambda, v)` concatenated: output dimension is `dim + 1`.
    ParetoConcat { b: f64, dim: usize },
    /// Each point is an outlier with probability `eta`, drawn from
    /// `outlier` instead of `base`.
    Mixture {
        base: Box<DistSpec>,
        outlier: Box<DistSpec>,
        eta: f64,
    },
    /// Uniform choice among a fixed list of points.
    FixedPoints { dim: usize, points: Vec<Vec<f64>> },
}

impl DistSpec {
    /// Dimension of generated points.
    pub fn dim(&self) -> usize {
        match self {
            DistSpec::Gaussian { sigma } => sigma.dim(),
            DistSpec::Ellipsoid { a } => a.dim(),
            DistSpec::ParetoRadial { dim, .. } => *dim,
            DistSpec::ParetoConcat { dim, .. } => dim + 1,
            DistSpec::Mixture { base, .. } => base.dim(),
            DistSpec::FixedPoints { dim, .. } => *dim,
        }
    }

    /// A norm bound every sample respects, when one exists. Gaussians are
    /// unbounded, so datasets built from them use the realized maximum.
    pub fn certified_radius(&self) -> Option<f64> {
        match self {
            DistSpec::Gaussian { .. } => None,
            DistSpec::Ellipsoid { a } => {
                let top = eig_sym(a).ok()?.max_value().max(0.0);
                Some(top.sqrt())
            }
            DistSpec::ParetoRadial { b, .. } => Some(*b),
            DistSpec::ParetoConcat { b, .. } => Some((b * b + 1.0).sqrt()),
            DistSpec::Mixture { base, outlier, .. } => {
                Some(base.certified_radius()?.max(outlier.certified_radius()?))
            }
            DistSpec::FixedPoints { dim, points } => points
                .iter()
                .map(|p| p.iter().take(*dim).map(|&v| v * v).sum::<f64>().sqrt())
                .fold(None, |acc: Option<f64>, n| Some(acc.map_or(n, |a| a.max(n)))),
        }
    }

    /// Closed-form population second moment.
    pub fn population_second_moment(&self) -> Result<SymMat> {
        match self {
            DistSpec::Gaussian { sigma } => Ok(sigma.clone()),
            DistSpec::Ellipsoid { a } => Ok(a.scale(1.0 / a.dim() as f64)),
            DistSpec::ParetoRadial { b, dim } => {
                let v = pareto6_second_moment(*b) / *dim as f64;
                Ok(SymMat::identity(*dim).scale(v))
            }
            DistSpec::ParetoConcat { b, dim } => {
                let mut m = SymMat::zeros(dim + 1);
                m.set(0, 0, pareto6_second_moment(*b));
                for i in 1..=*dim {
                    m.set(i, i, 1.0 / *dim as f64);
                }
                Ok(m)
            }
            DistSpec::Mixture { base, outlier, eta } => {
                let b = base.population_second_moment()?;
                let o = outlier.population_second_moment()?;
                b.scale(1.0 - eta).add(&o.scale(*eta))
            }
            DistSpec::FixedPoints { dim, points } => {
                let k = points.len() as f64;
                Ok(SymMat::from_fn(*dim, |i, j| {
                    points.iter().map(|p| p[i] * p[j]).sum::<f64>() / k
                }))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            DistSpec::Gaussian { sigma } => {
                if sigma.dim() == 0 {
                    return Err(Error::invalid("sigma", "dimension must be positive"));
                }
                if !sigma.is_finite() {
                    return Err(Error::NonFinite {
                        context: "gaussian second moment",
                    });
                }
                Ok(())
            }
            DistSpec::Ellipsoid { a } => {
                let eig = eig_sym(a)?;
                if eig.min_value() <= 0.0 {
                    return Err(Error::NotPositiveDefinite {
                        context: "ellipsoid shape",
                        eigenvalue: eig.min_value(),
                    });
                }
                if eig.max_value() > 1.0 + 1e-9 {
                    return Err(Error::invalid("a", "must satisfy A <= I"));
                }
                Ok(())
            }
            DistSpec::ParetoRadial { b, dim } | DistSpec::ParetoConcat { b, dim } => {
                if !(b.is_finite() && *b > 1.0) {
                    return Err(Error::invalid("b", "must be finite and above 1"));
                }
                if *dim == 0 {
                    return Err(Error::invalid("dim", "must be positive"));
                }
                Ok(())
            }
            DistSpec::Mixture { base, outlier, eta } => {
                if !(*eta >= 0.0 && *eta < 1.0) {
                    return Err(Error::invalid("eta", "must be in [0, 1)"));
                }
                if base.dim() != outlier.dim() {
                    return Err(Error::DimensionMismatch {
                        context: "mixture components",
                        left: base.dim(),
                        right: outlier.dim(),
                    });
                }
                base.validate()?;
                outlier.validate()
            }
            DistSpec::FixedPoints { dim, points } => {
                if *dim == 0 {
                    return Err(Error::invalid("dim", "must be positive"));
                }
                if points.is_empty() {
                    return Err(Error::invalid("points", "need at least one point"));
                }
                for p in points {
                    if p.len() != *dim {
                        return Err(Error::DimensionMismatch {
                            context: "fixed point list",
                            left: *dim,
                            right: p.len(),
                        });
                    }
                    if !p.iter().all(|v| v.is_finite()) {
                        return Err(Error::NonFinite {
                            context: "fixed point list",
                        });
                    }
                }
                Ok(())
            }
        }
    }

    /// Generates a dataset; see [`generate_labeled`] for outlier labels.
    pub fn generate(&self, n: usize, rng: &mut RngState) -> Result<Dataset> {
        Ok(generate_labeled(self, n, rng)?.0)
    }
}

enum Prepared {
    Gaussian { root: SymMat },
    Ellipsoid { root: SymMat },
    ParetoRadial { b: f64, dim: usize },
    ParetoConcat { b: f64, dim: usize },
    Mixture { base: Box<Prepared>, outlier: Box<Prepared>, eta: f64 },
    Fixed { points: Vec<Vec<f64>> },
}

fn prepare(spec: &DistSpec) -> Result<Prepared> {
    spec.validate()?;
    Ok(match spec {
        DistSpec::Gaussian { sigma } => Prepared::Gaussian {
            root: sqrt_psd(sigma)?,
        },
        DistSpec::Ellipsoid { a } => Prepared::Ellipsoid { root: sqrt_psd(a)? },
        DistSpec::ParetoRadial { b, dim } => Prepared::ParetoRadial { b: *b, dim: *dim },
        DistSpec::ParetoConcat { b, dim } => Prepared::ParetoConcat { b: *b, dim: *dim },
        DistSpec::Mixture { base, outlier, eta } => Prepared::Mixture {
            base: Box::new(prepare(base)?),
            outlier: Box::new(prepare(outlier)?),
            eta: *eta,
        },
        DistSpec::FixedPoints { points, .. } => Prepared::Fixed { points: points.clone() },
    })
}

/// Draws one point; returns whether the top-level mixture picked its
/// outlier branch.
fn draw(p: &Prepared, rng: &mut RngState, out: &mut Vec<f64>) -> Result<bool> {
    match p {
        Prepared::Gaussian { root } => {
            let d = root.dim();
            let z: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            out.extend(root.apply(&z)?);
            Ok(false)
        }
        Prepared::Ellipsoid { root } => {
            let u = unit_sphere_sample(rng, root.dim());
            out.extend(root.apply(&u)?);
            Ok(false)
        }
        Prepared::ParetoRadial { b, dim } => {
            let lambda = pareto6_sample(rng, *b)?;
            let v = unit_sphere_sample(rng, *dim);
            out.extend(v.iter().map(|&c| lambda * c));
            Ok(false)
        }
        Prepared::ParetoConcat { b, dim } => {
            let lambda = pareto6_sample(rng, *b)?;
            out.push(lambda);
            out.extend(unit_sphere_sample(rng, *dim));
            Ok(false)
        }
        Prepared::Mixture { base, outlier, eta } => {
            if rng.uniform() < *eta {
                draw(outlier, rng, out)?;
                Ok(true)
            } else {
                draw(base, rng, out)?;
                Ok(false)
            }
        }
        Prepared::Fixed { points, .. } => {
            let i = rng.below(points.len() as u64) as usize;
            out.extend(points[i].iter().copied());
            Ok(false)
        }
    }
}

/// Generates `n` points plus per-point outlier labels (all false unless the
/// spec is a mixture). The dataset radius is the spec's certified bound when
/// one exists, otherwise the realized maximum norm; a degenerate all-zero
/// sample gets radius 1.
pub fn generate_labeled(
    spec: &DistSpec,
    n: usize,
    rng: &mut RngState,
) -> Result<(Dataset, Vec<bool>)> {
    if n == 0 {
        return Err(Error::invalid("n", "must be positive"));
    }
    let prepared = prepare(spec)?;
    let dim = spec.dim();
    let mut points = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        labels.push(draw(&prepared, rng, &mut points)?);
    }
    let radius = match spec.certified_radius() {
        Some(r) if r > 0.0 => r,
        _ => {
            let realized = points
                .chunks(dim)
                .map(|p| p.iter().map(|&v| v * v).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            if realized > 0.0 {
                realized
            } else {
                1.0
            }
        }
    };
    Ok((Dataset::new(dim, points, radius)?, labels))
}

pub fn gen_gaussian(sigma: &SymMat, n: usize, rng: &mut RngState) -> Result<Dataset> {
    DistSpec::Gaussian {
        sigma: sigma.clone(),
    }
    .generate(n, rng)
}

pub fn gen_ellipsoid(a: &SymMat, n: usize, rng: &mut RngState) -> Result<Dataset> {
    DistSpec::Ellipsoid { a: a.clone() }.generate(n, rng)
}

pub fn gen_pareto_radial(b: f64, dim: usize, n: usize, rng: &mut RngState) -> Result<Dataset> {
    DistSpec::ParetoRadial { b, dim }.generate(n, rng)
}

pub fn gen_pareto_concat(b: f64, dim: usize, n: usize, rng: &mut RngState) -> Result<Dataset> {
    DistSpec::ParetoConcat { b, dim }.generate(n, rng)
}

pub fn gen_mixture(
    base: &DistSpec,
    outlier: &DistSpec,
    eta: f64,
    n: usize,
    rng: &mut RngState,
) -> Result<(Dataset, Vec<bool>)> {
    generate_labeled(
        &DistSpec::Mixture {
            base: Box::new(base.clone()),
            outlier: Box::new(outlier.clone()),
            eta,
        },
        n,
        rng,
    )
}
