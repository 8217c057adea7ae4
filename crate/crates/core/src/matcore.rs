//! Dense symmetric linear algebra.
//!
//! Everything here is plain `f64` with no external BLAS or LAPACK. The
//! dimensions this crate targets are small (typically `d <= 64`) while the
//! datasets are large, so the hot loops are outer-product accumulations and
//! the eigensolver is a cyclic Jacobi iteration: slower than LAPACK for big
//! `d` but dependency-free, deterministic, and accurate on symmetric input.
//!
//! Conventions:
//! * [`Mat`] is a general dense matrix, row-major.
//! * [`SymMat`] stores only the upper triangle, so symmetry is exact by
//!   construction rather than a property to be checked.
//! * Eigenvalues are reported in descending order; ties keep the order in
//!   which the Jacobi iteration produced them, which is deterministic.

use crate::error::{Error, Result};

/// Hard cap on Jacobi sweeps. Quadratic convergence makes this generous;
/// hitting it means the input was pathological (NaN should be caught first).
const JACOBI_MAX_SWEEPS: usize = 100;

/// Convergence threshold for the off-diagonal Frobenius norm, relative to
/// the Frobenius norm of the input matrix.
const JACOBI_REL_TOL: f64 = 1e-12;

/// Relative slack allowed when validating point norms against a dataset
/// radius, to absorb rounding in norm computation.
const RADIUS_SLACK: f64 = 1e-12;

/// Eigenvalues below this (relative) cutoff are treated as zero when
/// computing ranks and pseudo-inverses.
pub fn rank_tolerance(spectral_norm: f64) -> f64 {
    1e-12 * spectral_norm.abs().max(1.0)
}

/// Mass tolerance used when deciding whether one PSD matrix lives inside the
/// range of another. Relative to `max(1, ||·||_2)`.
pub(crate) const RANGE_MASS_TOL: f64 = 1e-9;

/// Negative eigenvalues above `-psd_slack` are clamped to zero by
/// [`sqrt_psd`]; anything more negative is an error.
fn psd_slack(spectral_norm: f64) -> f64 {
    1e-9 * spectral_norm.abs().max(1.0)
}

// ---------------------------------------------------------------------------
// Dense matrices

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from explicit rows. All rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    context: "row length",
                    left: c,
                    right: rows[i].len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Mat { rows: r, cols: c, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                context: "matrix product",
                left: self.cols,
                right: other.rows,
            });
        }
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                context: "matrix-vector product",
                left: self.cols,
                right: v.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .map(|(&a, &b)| a * b)
                    .sum()
            })
            .collect())
    }

    /// New matrix keeping the listed columns, in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> Mat {
        let mut out = Mat::zeros(self.rows, idx.len());
        for i in 0..self.rows {
            for (jj, &j) in idx.iter().enumerate() {
                out.data[i * idx.len() + jj] = self.get(i, j);
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Symmetric matrices, packed upper triangle

/// Symmetric matrix storing only entries `(i, j)` with `i <= j`.
///
/// Symmetry is therefore exact regardless of how the entries were produced.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SymMat {
    dim: usize,
    data: Vec<f64>,
}

impl SymMat {
    pub fn zeros(dim: usize) -> Self {
        SymMat {
            dim,
            data: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = SymMat::zeros(dim);
        for i in 0..dim {
            let k = m.index(i, i);
            m.data[k] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = SymMat::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Builds from a callback evaluated on the upper triangle.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = SymMat::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let k = m.index(i, j);
                m.data[k] = f(i, j);
            }
        }
        m
    }

    /// Symmetrizes a square dense matrix by averaging `a_ij` and `a_ji`.
    pub fn from_dense(m: &Mat) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::DimensionMismatch {
                context: "symmetrize",
                left: m.rows(),
                right: m.cols(),
            });
        }
        Ok(SymMat::from_fn(m.rows(), |i, j| {
            0.5 * (m.get(i, j) + m.get(j, i))
        }))
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= j && j < self.dim);
        i * self.dim - i * (i + 1) / 2 + j
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.data[self.index(a, b)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        let k = self.index(a, b);
        self.data[k] = v;
    }

    pub fn add(&self, other: &SymMat) -> Result<SymMat> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SymMat) -> Result<SymMat> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &SymMat, f: impl Fn(f64, f64) -> f64) -> Result<SymMat> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                context: "symmetric matrix arithmetic",
                left: self.dim,
                right: other.dim,
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(SymMat { dim: self.dim, data })
    }

    pub fn scale(&self, c: f64) -> SymMat {
        SymMat {
            dim: self.dim,
            data: self.data.iter().map(|&v| c * v).collect(),
        }
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "symmetric matrix-vector product",
                left: self.dim,
                right: v.len(),
            });
        }
        let mut out = vec![0.0; self.dim];
        for i in 0..self.dim {
            let mut acc = 0.0;
            for j in 0..self.dim {
                acc += self.get(i, j) * v[j];
            }
            out[i] = acc;
        }
        Ok(out)
    }

    /// Quadratic form `v' M v`.
    pub fn quad(&self, v: &[f64]) -> Result<f64> {
        let mv = self.apply(v)?;
        Ok(v.iter().zip(&mv).map(|(&a, &b)| a * b).sum())
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                let v = self.data[self.index(i, j)];
                s += if i == j { v * v } else { 2.0 * v * v };
            }
        }
        s.sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn to_dense(&self) -> Mat {
        let mut m = Mat::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.set(i, j, self.get(i, j));
            }
        }
        m
    }

    /// Largest eigenvalue magnitude.
    pub fn spectral_norm(&self) -> Result<f64> {
        let eig = eig_sym(self)?;
        Ok(eig.max_abs_value())
    }

    /// Two-sided product `s * self * s` for symmetric `s`, re-symmetrized to
    /// absorb rounding.
    pub fn conjugate(&self, s: &SymMat) -> Result<SymMat> {
        if self.dim != s.dim {
            return Err(Error::DimensionMismatch {
                context: "conjugation",
                left: self.dim,
                right: s.dim,
            });
        }
        let prod = s.to_dense().matmul(&self.to_dense())?.matmul(&s.to_dense())?;
        SymMat::from_dense(&prod)
    }
}

// ---------------------------------------------------------------------------
// Eigendecomposition

/// Result of [`eig_sym`]: eigenvalues in descending order, with the matching
/// eigenvectors as columns of an orthogonal matrix.
#[derive(Debug, Clone)]
pub struct EigenDecomp {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

impl EigenDecomp {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn max_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn min_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn max_abs_value(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    /// Number of eigenvalues strictly above `cutoff`.
    pub fn rank_above(&self, cutoff: f64) -> usize {
        self.values.iter().filter(|&&v| v > cutoff).count()
    }

    /// Rebuilds `V diag(values) V'`.
    pub fn reconstruct(&self) -> SymMat {
        self.map_values(|v| v)
    }

    /// Applies `f` to each eigenvalue and reassembles the matrix.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> SymMat {
        let d = self.dim();
        let mapped: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        SymMat::from_fn(d, |i, j| {
            (0..d)
                .map(|k| mapped[k] * self.vectors.get(i, k) * self.vectors.get(j, k))
                .sum()
        })
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Deterministic: the pivot order is fixed, so identical input bits give
/// identical output bits. Converges when the off-diagonal Frobenius norm
/// drops below `1e-12` times the Frobenius norm of the input.
pub fn eig_sym(m: &SymMat) -> Result<EigenDecomp> {
    if !m.is_finite() {
        return Err(Error::NonFinite {
            context: "eigendecomposition input",
        });
    }
    let d = m.dim;
    let mut a = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            a[i * d + j] = m.get(i, j);
        }
    }
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }

    let fro = m.frobenius();
    let tol2 = (JACOBI_REL_TOL * fro).powi(2);

    let off2 = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                s += 2.0 * a[i * d + j] * a[i * d + j];
            }
        }
        s
    };

    let mut sweeps = 0;
    while off2(&a) > tol2 {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::EigNoConvergence {
                sweeps,
                offdiag: off2(&a).sqrt(),
            });
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    // Avoid overflow in theta^2; the rotation is tiny anyway.
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                let app = a[p * d + p];
                let aqq = a[q * d + q];
                a[p * d + p] = app - t * apq;
                a[q * d + q] = aqq + t * apq;
                a[p * d + q] = 0.0;
                a[q * d + p] = 0.0;
                for i in 0..d {
                    if i == p || i == q {
                        continue;
                    }
                    let aip = a[i * d + p];
                    let aiq = a[i * d + q];
                    let np = c * aip - s * aiq;
                    let nq = s * aip + c * aiq;
                    a[i * d + p] = np;
                    a[p * d + i] = np;
                    a[i * d + q] = nq;
                    a[q * d + i] = nq;
                }
                for i in 0..d {
                    let vip = v[i * d + p];
                    let viq = v[i * d + q];
                    v[i * d + p] = c * vip - s * viq;
                    v[i * d + q] = s * vip + c * viq;
                }
            }
        }
        sweeps += 1;
    }

    let mut order: Vec<usize> = (0..d).collect();
    // Stable sort keeps the Jacobi output order among ties.
    order.sort_by(|&i, &j| {
        a[j * d + j]
            .partial_cmp(&a[i * d + i])
            .expect("eigenvalues are finite")
    });

    let values: Vec<f64> = order.iter().map(|&k| a[k * d + k]).collect();
    let mut vectors = Mat::zeros(d, d);
    for (newk, &oldk) in order.iter().enumerate() {
        for i in 0..d {
            vectors.set(i, newk, v[i * d + oldk]);
        }
    }
    Ok(EigenDecomp { values, vectors })
}

// ---------------------------------------------------------------------------
// Datasets and second moments

/// A dataset of `n` points in `R^d`, all with Euclidean norm at most the
/// stated radius. Stored flat, row-major.
#[derive(Debug, Clone)]
pub struct Dataset {
    dim: usize,
    radius: f64,
    points: Vec<f64>,
}

impl Dataset {
    /// Validates and wraps a flat point buffer.
    ///
    /// Requirements: `dim >= 1`, at least one point, every coordinate
    /// finite, and every norm at most `radius` up to relative slack `1e-12`.
    pub fn new(dim: usize, points: Vec<f64>, radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid("radius", "must be finite and positive"));
        }
        if points.is_empty() || points.len() % dim != 0 {
            return Err(Error::invalid(
                "points",
                format!("buffer length {} is not a positive multiple of dim {}", points.len(), dim),
            ));
        }
        let bound = radius * (1.0 + RADIUS_SLACK);
        for (i, x) in points.chunks_exact(dim).enumerate() {
            let norm2: f64 = x.iter().map(|&v| v * v).sum();
            if !norm2.is_finite() {
                return Err(Error::NonFinite {
                    context: "dataset point",
                });
            }
            let norm = norm2.sqrt();
            if norm > bound {
                return Err(Error::PointOutOfBounds {
                    index: i,
                    norm,
                    bound: radius,
                });
            }
        }
        Ok(Dataset { dim, radius, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires at least one point
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points_flat(&self) -> &[f64] {
        &self.points
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn max_norm(&self) -> f64 {
        self.iter()
            .map(|x| x.iter().map(|&v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Second moment `(1/n) sum_i x_i x_i'` of a dataset.
pub fn second_moment(data: &Dataset) -> SymMat {
    second_moment_rows(data.points_flat(), data.dim())
}

/// Second moment of a flat row-major point buffer.
///
/// Accumulates in chunks to keep the summation error logarithmic in `n`
/// rather than linear.
pub fn second_moment_rows(rows: &[f64], dim: usize) -> SymMat {
    assert!(dim > 0 && rows.len() % dim == 0, "malformed point buffer");
    let n = rows.len() / dim;
    let packed = dim * (dim + 1) / 2;
    let mut total = vec![0.0; packed];
    // 4096 points per partial sum.
    for chunk in rows.chunks(4096 * dim) {
        let mut part = vec![0.0; packed];
        for x in chunk.chunks_exact(dim) {
            let mut k = 0;
            for i in 0..dim {
                let xi = x[i];
                for &xj in &x[i..dim] {
                    part[k] += xi * xj;
                    k += 1;
                }
            }
        }
        for (t, p) in total.iter_mut().zip(&part) {
            *t += p;
        }
    }
    let inv_n = 1.0 / n as f64;
    SymMat {
        dim,
        data: total.iter().map(|&v| v * inv_n).collect(),
    }
}

// ---------------------------------------------------------------------------
// Order and distance on the PSD cone

/// Tests `a <= b` in the Loewner order, tolerating eigenvalues of `b - a`
/// down to `-tol`.
pub fn loewner_leq(a: &SymMat, b: &SymMat, tol: f64) -> Result<bool> {
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::invalid("tol", "must be finite and nonnegative"));
    }
    let diff = b.sub(a)?;
    let eig = eig_sym(&diff)?;
    Ok(eig.min_value() >= -tol)
}

/// Pseudo-inverse data for a PSD matrix: the inverse on its numerical range
/// and a basis of that range.
pub struct PseudoInverse {
    /// Inverse restricted to the range, zero on the null space.
    pub inv: SymMat,
    /// `d x rank` matrix whose columns span the numerical range.
    pub range: Mat,
    pub rank: usize,
    /// Eigenvalue cutoff that defined the range.
    pub cutoff: f64,
}

impl PseudoInverse {
    /// `x' M^+ x`; the leverage of `x` when `M` is a second moment.
    pub fn leverage(&self, x: &[f64]) -> Result<f64> {
        self.inv.quad(x)
    }

    /// Squared mass of `x` outside the numerical range, clamped at zero.
    pub fn out_of_range_mass(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.range.rows() {
            return Err(Error::DimensionMismatch {
                context: "out-of-range mass",
                left: self.range.rows(),
                right: x.len(),
            });
        }
        let norm2: f64 = x.iter().map(|&v| v * v).sum();
        let mut in_range = 0.0;
        for k in 0..self.rank {
            let dot: f64 = (0..x.len()).map(|i| self.range.get(i, k) * x[i]).sum();
            in_range += dot * dot;
        }
        Ok((norm2 - in_range).max(0.0))
    }
}

/// Pseudo-inverse of a PSD matrix with the rank cutoff
/// `1e-12 * max(1, ||m||_2)`. Eigenvalues below the cutoff count as zero;
/// eigenvalues below `-cutoff` are rejected.
pub fn pseudo_inverse(m: &SymMat) -> Result<PseudoInverse> {
    let eig = eig_sym(m)?;
    let cutoff = rank_tolerance(eig.max_abs_value());
    if eig.min_value() < -cutoff {
        return Err(Error::NotPositiveDefinite {
            context: "pseudo-inverse",
            eigenvalue: eig.min_value(),
        });
    }
    let rank = eig.rank_above(cutoff);
    let inv = eig.map_values(|v| if v > cutoff { 1.0 / v } else { 0.0 });
    let range = eig.vectors.select_columns(&(0..rank).collect::<Vec<_>>());
    Ok(PseudoInverse { inv, range, rank, cutoff })
}

fn pinv_sqrt_from(eig: &EigenDecomp, cutoff: f64) -> SymMat {
    eig.map_values(|v| if v > cutoff { 1.0 / v.sqrt() } else { 0.0 })
}

/// Mass of PSD `b` outside the range of `a` (given `a`'s eigensystem):
/// `trace((I - P) b (I - P))` for `P` the range projector of `a`.
fn mass_outside_range(eig_a: &EigenDecomp, cutoff_a: f64, b: &SymMat) -> Result<f64> {
    let d = eig_a.dim();
    let mut mass = 0.0;
    for k in 0..d {
        if eig_a.values[k] > cutoff_a {
            continue;
        }
        let u = eig_a.vectors.col(k);
        mass += b.quad(&u)?;
    }
    Ok(mass.max(0.0))
}

/// Relative spectral distance between two positive definite matrices:
///
/// `max( ||A^{-1/2} (B-A) A^{-1/2}||_2 , ||B^{-1/2} (A-B) B^{-1/2}||_2 )`
///
/// Infinite as soon as either matrix has an eigenvalue at or below the rank
/// tolerance: the distance compares shapes, and a flat direction on either
/// side makes them incomparable. Errors only on genuinely negative input.
pub fn spectral_dist(a: &SymMat, b: &SymMat) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            context: "spectral distance",
            left: a.dim(),
            right: b.dim(),
        });
    }
    let eig_a = eig_sym(a)?;
    let eig_b = eig_sym(b)?;
    let cut_a = rank_tolerance(eig_a.max_abs_value());
    let cut_b = rank_tolerance(eig_b.max_abs_value());
    for (eig, cut, name) in [(&eig_a, cut_a, "left"), (&eig_b, cut_b, "right")] {
        if eig.min_value() < -(psd_slack(eig.max_abs_value())) {
            return Err(Error::NotPositiveDefinite {
                context: if name == "left" {
                    "spectral distance, left operand"
                } else {
                    "spectral distance, right operand"
                },
                eigenvalue: eig.min_value(),
            });
        }
        if eig.min_value() <= cut {
            return Ok(f64::INFINITY);
        }
    }

    let diff = b.sub(a)?;
    let sa = pinv_sqrt_from(&eig_a, cut_a);
    let sb = pinv_sqrt_from(&eig_b, cut_b);
    let da = diff.conjugate(&sa)?.spectral_norm()?;
    let db = diff.conjugate(&sb)?.spectral_norm()?;
    Ok(da.max(db))
}

/// One-sided relative error of `estimate` against reference `sigma`:
/// `||Sigma^{-1/2} (estimate - Sigma) Sigma^{-1/2}||_2` with the
/// pseudo-inverse square root. Infinite if the estimate carries mass outside
/// the range of the reference.
pub fn rel_spectral_error(sigma: &SymMat, estimate: &SymMat) -> Result<f64> {
    if sigma.dim() != estimate.dim() {
        return Err(Error::DimensionMismatch {
            context: "relative spectral error",
            left: sigma.dim(),
            right: estimate.dim(),
        });
    }
    let eig = eig_sym(sigma)?;
    let cut = rank_tolerance(eig.max_abs_value());
    if eig.min_value() < -cut {
        return Err(Error::NotPositiveDefinite {
            context: "relative error reference",
            eigenvalue: eig.min_value(),
        });
    }
    let mass_tol = RANGE_MASS_TOL * {
        let est_norm = eig_sym(estimate)?.max_abs_value();
        est_norm.max(1.0)
    };
    if mass_outside_range(&eig, cut, estimate)? > mass_tol {
        return Ok(f64::INFINITY);
    }
    let s = pinv_sqrt_from(&eig, cut);
    estimate.sub(sigma)?.conjugate(&s)?.spectral_norm()
}

/// Inverse square root of a positive definite matrix. Errors if any
/// eigenvalue falls below `floor`.
pub fn inv_sqrt(m: &SymMat, floor: f64) -> Result<SymMat> {
    if !(floor.is_finite() && floor > 0.0) {
        return Err(Error::invalid("floor", "must be finite and positive"));
    }
    let eig = eig_sym(m)?;
    if eig.min_value() < floor {
        return Err(Error::NotPositiveDefinite {
            context: "inverse square root",
            eigenvalue: eig.min_value(),
        });
    }
    Ok(eig.map_values(|v| 1.0 / v.sqrt()))
}

/// Square root of a PSD matrix. Eigenvalues slightly negative from rounding
/// (within `1e-9 * max(1, ||m||_2)`) are clamped to zero; anything lower is
/// an error.
pub fn sqrt_psd(m: &SymMat) -> Result<SymMat> {
    let eig = eig_sym(m)?;
    let slack = psd_slack(eig.max_abs_value());
    if eig.min_value() < -slack {
        return Err(Error::NotPositiveDefinite {
            context: "matrix square root",
            eigenvalue: eig.min_value(),
        });
    }
    Ok(eig.map_values(|v| v.max(0.0).sqrt()))
}

/// Builds the pair `(P, P_inv)` where `P = eta * Proj + (I - Proj)` shrinks
/// the span of `basis` by `eta` and leaves its complement alone, and
/// `P_inv` undoes it exactly on the same split.
///
/// `basis` must have orthonormal columns (checked to `1e-8`); a basis with
/// zero columns yields the identity pair.
pub fn shrink_map(basis: &Mat, eta: f64) -> Result<(SymMat, SymMat)> {
    if !(eta.is_finite() && eta > 0.0 && eta <= 1.0) {
        return Err(Error::invalid("eta", "must be in (0, 1]"));
    }
    let d = basis.rows();
    let k = basis.cols();
    if k > d {
        return Err(Error::DimensionMismatch {
            context: "shrink basis",
            left: d,
            right: k,
        });
    }
    let mut gram_dev: f64 = 0.0;
    for a in 0..k {
        for b in a..k {
            let dot: f64 = (0..d).map(|i| basis.get(i, a) * basis.get(i, b)).sum();
            let target = if a == b { 1.0 } else { 0.0 };
            gram_dev = gram_dev.max((dot - target).abs());
        }
    }
    if gram_dev > 1e-8 {
        return Err(Error::NonOrthonormalBasis { deviation: gram_dev });
    }

    let proj = SymMat::from_fn(d, |i, j| {
        (0..k).map(|c| basis.get(i, c) * basis.get(j, c)).sum()
    });
    let mut shrink = SymMat::zeros(d);
    let mut unshrink = SymMat::zeros(d);
    for i in 0..d {
        for j in i..d {
            let p = proj.get(i, j);
            let idp = if i == j { 1.0 } else { 0.0 };
            shrink.set(i, j, eta * p + (idp - p));
            unshrink.set(i, j, p / eta + (idp - p));
        }
    }
    Ok((shrink, unshrink))
}
