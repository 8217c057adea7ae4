//! Differentially private estimation of second-moment matrices.
//!
//! The central object is the second moment `Σ = (1/n) Σ_i x_i x_iᵀ` of a
//! bounded dataset. Releasing `Σ` under differential privacy is easy when a
//! good a-priori bound on its condition number exists and hard otherwise;
//! this crate implements estimators that adapt to the data instead:
//!
//! * [`estimators::recursive`]: a multi-level preconditioning estimator
//!   under zero-concentrated differential privacy. Each level adds Gaussian
//!   noise to the current second moment, identifies the well-conditioned
//!   part of the spectrum, shrinks it, and recurses on the residual.
//! * [`estimators::baseline`]: subsample-and-aggregate under approximate
//!   differential privacy: split the data into groups, test whether the
//!   group estimates agree, and release a weighted average plus noise.
//! * [`estimators::eigmin`]: a stability-histogram release of the minimum
//!   eigenvalue, usable as a private preprocessing step.
//!
//! Supporting modules: [`matcore`] (dense symmetric linear algebra, no
//! external BLAS), [`noise`] (deterministic counter-based sampling),
//! [`privacy`] (budget accounting and calibration), [`subsamp`]
//! (subsamplability diagnostics and sample-size planning), and [`datagen`]
//! (synthetic dataset families for experiments).
//!
//! All randomized entry points take an explicit [`noise::RngState`]; results
//! are reproducible bit-for-bit given the same seed and inputs.

pub mod datagen;
pub mod error;
pub mod estimators;
pub mod matcore;
pub mod noise;
pub mod privacy;
pub mod subsamp;

pub use error::{Error, Result};
pub use matcore::{Dataset, EigenDecomp, Mat, SymMat};
pub use noise::RngState;
