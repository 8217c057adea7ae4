//! Deterministic random sampling.
//!
//! All randomness in this crate flows through [`RngState`], a ChaCha8 stream
//! cipher addressed by a `(seed, stream)` pair. Substreams are derived by
//! mixing, not by consuming parent state, so a parent and any number of
//! children can be replayed independently. This is what makes parallel
//! estimation runs reproducible: each work item gets `substream(index)` and
//! the merge order stops mattering.
//!
//! Samplers are written against the raw uniform source, with no hidden
//! caches: the polar normal method draws a fresh pair on every call instead
//! of stashing the second value, trading a little speed for replayability.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matcore::{Mat, SymMat};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seeded random state with cheap independent substreams.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngState { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Derives the `index`-th child stream. Pure in the parent's identity:
    /// it does not consume parent state, and calling it twice with the same
    /// index yields the same child.
    pub fn substream(&self, index: u64) -> RngState {
        let child_seed = splitmix64(self.seed ^ splitmix64(self.stream.wrapping_add(1)));
        RngState::new(child_seed, index)
    }

    /// Like [`substream`](Self::substream) but additionally keyed by a
    /// label, so differently named components cannot collide even when they
    /// use the same indices.
    pub fn substream_named(&self, label: &str, index: u64) -> RngState {
        let h = fnv1a64(label.as_bytes());
        let child_seed = splitmix64(self.seed ^ h ^ splitmix64(self.stream.wrapping_add(1)));
        RngState::new(child_seed, index)
    }

    pub fn raw_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform integer in `[0, bound)` by rejection, so every value has
    /// exactly equal probability.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "below() requires a positive bound");
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let raw = self.rng.next_u64();
            if raw < zone {
                return raw % bound;
            }
        }
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    /// A pair of independent standard normals via the polar method.
    pub fn normal_pair(&mut self) -> (f64, f64) {
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                return (u * f, v * f);
            }
        }
    }

    /// A single standard normal. Draws a pair and discards the second value
    /// so that no state is carried between calls.
    pub fn normal(&mut self) -> f64 {
        self.normal_pair().0
    }
}

/// Symmetric matrix with independent `N(0, sigma^2)` entries on and above
/// the diagonal; the lower triangle mirrors the upper by storage, so
/// symmetry is exact. The diagonal uses the same variance as the
/// off-diagonal entries.
pub fn gue_sample(rng: &mut RngState, dim: usize, sigma: f64) -> Result<SymMat> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::invalid("sigma", "must be finite and nonnegative"));
    }
    Ok(SymMat::from_fn(dim, |_, _| sigma * rng.normal()))
}

/// Dense matrix of independent standard normals, filled row-major.
pub fn std_normal_matrix(rng: &mut RngState, rows: usize, cols: usize) -> Mat {
    let mut m = Mat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m.set(i, j, rng.normal());
        }
    }
    m
}

/// Uniform point on the unit sphere in `R^dim`.
pub fn unit_sphere_sample(rng: &mut RngState, dim: usize) -> Vec<f64> {
    assert!(dim > 0, "sphere dimension must be positive");
    loop {
        let mut v = Vec::with_capacity(dim);
        while v.len() < dim {
            let (a, b) = rng.normal_pair();
            v.push(a);
            if v.len() < dim {
                v.push(b);
            }
        }
        let norm2: f64 = v.iter().map(|&x| x * x).sum();
        if norm2 > 0.0 {
            let inv = 1.0 / norm2.sqrt();
            for x in &mut v {
                *x *= inv;
            }
            return v;
        }
    }
}

/// Zero-mean Laplace sample with the given scale, by inverse CDF.
pub fn laplace_sample(rng: &mut RngState, scale: f64) -> Result<f64> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::invalid("scale", "must be finite and positive"));
    }
    let w = rng.uniform() - 0.5;
    let sign = if w < 0.0 { -1.0 } else { 1.0 };
    Ok(-scale * sign * (1.0 - 2.0 * w.abs()).ln())
}

fn check_tlap_params(sensitivity: f64, eps: f64, delta: f64) -> Result<()> {
    if !(sensitivity.is_finite() && sensitivity > 0.0) {
        return Err(Error::invalid("sensitivity", "must be finite and positive"));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::invalid("eps", "must be finite and positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", "must lie in (0, 1)"));
    }
    Ok(())
}

/// Half-width of the truncated Laplace distribution used for
/// `(eps, delta)`-private release of a statistic with the given sensitivity:
/// `(sensitivity/eps) * ln(1 + (e^eps - 1) / (2 delta))`.
pub fn tlap_bound(sensitivity: f64, eps: f64, delta: f64) -> Result<f64> {
    check_tlap_params(sensitivity, eps, delta)?;
    let b = sensitivity / eps;
    Ok(b * (1.0 + (eps.exp_m1()) / (2.0 * delta)).ln())
}

/// Sample from the Laplace distribution with scale `sensitivity/eps`
/// truncated to `[-B, B]` where `B` is [`tlap_bound`]. Inverse CDF on a
/// single uniform draw.
pub fn tlap_sample(rng: &mut RngState, sensitivity: f64, eps: f64, delta: f64) -> Result<f64> {
    let bound = tlap_bound(sensitivity, eps, delta)?;
    let b = sensitivity / eps;
    let a = 1.0 - (-bound / b).exp();
    let w = rng.uniform() - 0.5;
    let sign = if w < 0.0 { -1.0 } else { 1.0 };
    Ok(-b * sign * (1.0 - 2.0 * w.abs() * a).ln())
}

/// Inverse CDF of the power-law radial scale on `[1, b]` with density
/// proportional to `x^{-6}`.
pub fn pareto6_icdf(u: f64, b: f64) -> f64 {
    let b5 = b.powi(5);
    (1.0 - u * (b5 - 1.0) / b5).powf(-0.2)
}

/// Sample the truncated power-law scale on `[1, b]`.
pub fn pareto6_sample(rng: &mut RngState, b: f64) -> Result<f64> {
    if !(b.is_finite() && b > 1.0) {
        return Err(Error::invalid("b", "must be finite and exceed 1"));
    }
    Ok(pareto6_icdf(rng.uniform(), b))
}

/// Mean of the truncated power-law scale.
pub fn pareto6_mean(b: f64) -> f64 {
    1.25 * (1.0 - b.powi(-4)) / (1.0 - b.powi(-5))
}

/// Second moment of the truncated power-law scale.
pub fn pareto6_second_moment(b: f64) -> f64 {
    (5.0 / 3.0) * b * b * (b.powi(3) - 1.0) / (b.powi(5) - 1.0)
}

/// Fourth moment of the truncated power-law scale.
pub fn pareto6_fourth_moment(b: f64) -> f64 {
    5.0 * b.powi(4) * (b - 1.0) / (b.powi(5) - 1.0)
}
