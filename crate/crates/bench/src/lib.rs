//! Shared fixtures for the benchmark targets.

use privmoment::datagen::DistSpec;
use privmoment::{Dataset, RngState, SymMat};

/// Gaussian cloud with a geometric eigenvalue profile from `top` down.
pub fn gaussian_data(d: usize, n: usize, top: f64, seed: u64) -> Dataset {
    let sigma = SymMat::from_fn(d, |i, j| {
        if i == j {
            top * 0.5f64.powi(i as i32)
        } else {
            0.0
        }
    });
    let mut rng = RngState::new(seed, 0);
    DistSpec::Gaussian { sigma }
        .generate(n, &mut rng)
        .expect("fixture generation cannot fail")
}

/// Random positive definite matrix built as a second moment.
pub fn random_pd(d: usize, seed: u64) -> SymMat {
    let data = gaussian_data(d, 4 * d.max(8), 4.0, seed);
    privmoment::matcore::second_moment(&data)
}
