//! Truncated Laplace–Beltrami eigenbases.
//!
//! The `k` smallest generalized eigenpairs of `W φ = λ M φ` are computed with
//! a shift-invert block subspace iteration: every sweep applies
//! `(W − σM)⁻¹ M` to a block of `p > k` vectors (one envelope Cholesky
//! factorization, reused), M-orthonormalizes the block and performs a
//! Rayleigh–Ritz projection. The shift `σ` sits slightly below zero so the
//! shifted operator is positive definite while the constant null mode stays
//! the dominant direction. Small problems go straight to a dense
//! decomposition of `M^{-1/2} W M^{-1/2}`.
//!
//! Eigenvalues come back ascending and non-negative; every eigenvector is
//! M-normalized and its first entry of non-negligible magnitude (in vertex
//! order) is positive.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{dot, norm, symmetric_eigen, EnvelopeCholesky, Mat};
use crate::mesh::LaplacianPair;
use crate::{Error, Result};

/// Column-wise generalized eigen-residual bound `‖Wφ − λMφ‖ ≤ tol·‖W‖·‖φ‖`
/// enforced on every returned basis.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;

/// Default number of basis functions at desk scale.
pub const DEFAULT_K: usize = 30;

/// Basis size used by the large-scale configuration.
pub const LARGE_SCALE_K: usize = 200;

#[derive(Clone, Debug)]
pub struct EigenSolverOptions {
    /// Convergence threshold on the relative residual (tighter than
    /// [`EIGEN_RESIDUAL_TOL`] so the returned basis satisfies it with margin).
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Problems with at most this many vertices use the dense solver.
    pub dense_limit: usize,
    pub seed: u64,
}

impl Default for EigenSolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-11,
            max_iterations: 2000,
            dense_limit: 200,
            seed: 0x5eed_ba5e,
        }
    }
}

/// Truncated eigenbasis `(Φ, Λ)` with the mass-weighted pseudo-inverse
/// `Φ† = Φᵀ M`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralBasis {
    phi: Mat,
    lambda: Vec<f64>,
    phi_dagger: Mat,
    mass: Vec<f64>,
}

impl SpectralBasis {
    /// Assembles a basis from stored eigenpairs (e.g. a cache entry).
    pub fn from_parts(phi: Mat, lambda: Vec<f64>, mass: Vec<f64>) -> Result<Self> {
        if phi.cols() != lambda.len() || phi.rows() != mass.len() {
            return Err(Error::DimensionMismatch {
                context: "SpectralBasis::from_parts",
                expected: (mass.len(), lambda.len()),
                found: phi.shape(),
            });
        }
        if mass.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::InvalidParameter("mass entries must be positive".into()));
        }
        let phi_dagger = phi.scale_rows(&mass).transpose();
        Ok(Self {
            phi,
            lambda,
            phi_dagger,
            mass,
        })
    }

    /// `n × k` eigenfunctions, one per column.
    pub fn phi(&self) -> &Mat {
        &self.phi
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// `k × n` pseudo-inverse `Φᵀ M`.
    pub fn phi_dagger(&self) -> &Mat {
        &self.phi_dagger
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn k(&self) -> usize {
        self.lambda.len()
    }

    pub fn n(&self) -> usize {
        self.mass.len()
    }

    /// First `k` eigenpairs.
    pub fn truncated(&self, k: usize) -> Result<SpectralBasis> {
        if k > self.k() {
            return Err(Error::BasisTooSmall {
                requested: k,
                available: self.k(),
            });
        }
        SpectralBasis::from_parts(self.phi.leading_columns(k), self.lambda[..k].to_vec(), self.mass.clone())
    }

    /// The same basis on a relabeled mesh whose vertex `i` is old vertex
    /// `order[i]` (the permuted eigenvectors are used as-is).
    pub fn permuted(&self, order: &[usize]) -> SpectralBasis {
        let phi = self.phi.select_rows(order);
        let mass = order.iter().map(|&o| self.mass[o]).collect();
        SpectralBasis::from_parts(phi, self.lambda.clone(), mass).expect("permutation keeps shapes")
    }

    /// Spectral coefficients `Φ† f` of the `n × c` matrix `f`.
    pub fn project(&self, f: &Mat) -> Result<Mat> {
        if f.rows() != self.n() {
            return Err(Error::DimensionMismatch {
                context: "project",
                expected: (self.n(), f.cols()),
                found: f.shape(),
            });
        }
        Ok(self.phi_dagger.matmul(f))
    }

    /// `Φ a` for a `k × c` coefficient matrix.
    pub fn reconstruct(&self, coefficients: &Mat) -> Result<Mat> {
        if coefficients.rows() != self.k() {
            return Err(Error::DimensionMismatch {
                context: "reconstruct",
                expected: (self.k(), coefficients.cols()),
                found: coefficients.shape(),
            });
        }
        Ok(self.phi.matmul(coefficients))
    }

    /// Largest column-wise relative residual `‖Wφ − λMφ‖ / (‖W‖∞ ‖φ‖)`.
    pub fn max_residual(&self, lap: &LaplacianPair) -> f64 {
        let w = lap.stiffness();
        let w_norm = w.norm_inf();
        (0..self.k())
            .map(|j| {
                let phi = self.phi.column(j);
                let wphi = w.mul_vec(&phi);
                let r: Vec<f64> = wphi
                    .iter()
                    .zip(&phi)
                    .zip(lap.mass())
                    .map(|((a, p), m)| a - self.lambda[j] * m * p)
                    .collect();
                norm(&r) / (w_norm * norm(&phi))
            })
            .fold(0.0, f64::max)
    }
}

/// Spectral coefficients `Φ† f`.
pub fn project(basis: &SpectralBasis, f: &Mat) -> Result<Mat> {
    basis.project(f)
}

/// The `k` smallest generalized eigenpairs of the Laplacian pair.
pub fn compute_basis(lap: &LaplacianPair, k: usize) -> Result<SpectralBasis> {
    compute_basis_with(lap, k, &EigenSolverOptions::default())
}

pub fn compute_basis_with(lap: &LaplacianPair, k: usize, options: &EigenSolverOptions) -> Result<SpectralBasis> {
    let n = lap.n();
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if k >= n {
        return Err(Error::KTooLarge { k, n });
    }
    let block = (2 * k).max(k + 8).min(n);
    let (mut values, mut vectors) = if n <= options.dense_limit || 2 * block >= n {
        dense_eigenpairs(lap, k)
    } else {
        subspace_iteration(lap, k, block, options)?
    };

    // Gershgorin bound on the spectrum of M⁻¹W sets the scale for snapping
    // rounding-level eigenvalues of the null mode to zero.
    let w = lap.stiffness();
    let scale = (0..n)
        .map(|i| 2.0 * w.get(i, i) / lap.mass()[i])
        .fold(0.0, f64::max);
    for v in values.iter_mut() {
        if v.abs() <= 1e-12 * scale {
            *v = 0.0;
        }
    }
    for j in 0..k {
        let col = vectors.column(j);
        let big = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if let Some(first) = col.iter().find(|v| v.abs() > 1e-8 * big) {
            if *first < 0.0 {
                let flipped: Vec<f64> = col.iter().map(|v| -v).collect();
                vectors.set_column(j, &flipped);
            }
        }
    }
    values.truncate(k);
    SpectralBasis::from_parts(vectors, values, lap.mass().to_vec())
}

fn dense_eigenpairs(lap: &LaplacianPair, k: usize) -> (Vec<f64>, Mat) {
    let n = lap.n();
    let inv_sqrt_m: Vec<f64> = lap.mass().iter().map(|m| 1.0 / libm::sqrt(*m)).collect();
    let w = lap.stiffness();
    let mut a = Mat::zeros(n, n);
    for i in 0..n {
        let (cols, vals) = w.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            a[(i, j)] = v * inv_sqrt_m[i] * inv_sqrt_m[j];
        }
    }
    // symmetrize against rounding in the assembly
    let a = Mat::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let (values, y) = symmetric_eigen(&a);
    let phi = Mat::from_fn(n, k, |i, j| y[(i, j)] * inv_sqrt_m[i]);
    (values[..k].to_vec(), phi)
}

/// M-orthonormalizes `block` in place with two passes of modified
/// Gram–Schmidt. Collapsed vectors are replaced by fresh random ones.
fn m_orthonormalize(block: &mut [Vec<f64>], mass: &[f64], rng: &mut ChaCha8Rng) {
    let m_dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(mass).map(|((x, y), m)| x * y * m).sum() };
    for j in 0..block.len() {
        for attempt in 0..3 {
            let before = libm::sqrt(m_dot(&block[j], &block[j]));
            for _pass in 0..2 {
                for i in 0..j {
                    let (head, tail) = block.split_at_mut(j);
                    let proj = m_dot(&head[i], &tail[0]);
                    for (t, h) in tail[0].iter_mut().zip(&head[i]) {
                        *t -= proj * h;
                    }
                }
            }
            let after = libm::sqrt(m_dot(&block[j], &block[j]));
            if after > 1e-10 * before && after > 0.0 {
                block[j].iter_mut().for_each(|v| *v /= after);
                break;
            }
            assert!(attempt < 2, "could not complete an M-orthonormal block");
            block[j].iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        }
    }
}

fn subspace_iteration(
    lap: &LaplacianPair,
    k: usize,
    block_size: usize,
    options: &EigenSolverOptions,
) -> Result<(Vec<f64>, Mat)> {
    let n = lap.n();
    let w = lap.stiffness();
    let mass = lap.mass();
    let w_norm = w.norm_inf();
    let gershgorin = (0..n).map(|i| 2.0 * w.get(i, i) / mass[i]).fold(0.0, f64::max);
    let shift = 1e-6 * gershgorin;
    let shifted: Vec<f64> = mass.iter().map(|m| shift * m).collect();
    let factor = EnvelopeCholesky::factor(&w.add_diagonal(&shifted))?;

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut x: Vec<Vec<f64>> = (0..block_size)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut residual = f64::INFINITY;

    for _iteration in 0..options.max_iterations {
        for col in x.iter_mut() {
            col.iter_mut().zip(mass).for_each(|(v, m)| *v *= m);
            factor.solve_in_place(col);
        }
        m_orthonormalize(&mut x, mass, &mut rng);

        let wx: Vec<Vec<f64>> = x.iter().map(|c| w.mul_vec(c)).collect();
        let projected = Mat::from_fn(block_size, block_size, |i, j| {
            0.5 * (dot(&x[i], &wx[j]) + dot(&x[j], &wx[i]))
        });
        let (theta, s) = symmetric_eigen(&projected);

        let combine = |basis: &[Vec<f64>], j: usize| -> Vec<f64> {
            let mut out = vec![0.0; n];
            for (l, b) in basis.iter().enumerate() {
                let c = s[(l, j)];
                for (o, v) in out.iter_mut().zip(b) {
                    *o += c * v;
                }
            }
            out
        };
        let ritz: Vec<Vec<f64>> = (0..block_size).map(|j| combine(&x, j)).collect();

        residual = (0..k)
            .map(|j| {
                let wr = combine(&wx, j);
                let r: Vec<f64> = wr
                    .iter()
                    .zip(&ritz[j])
                    .zip(mass)
                    .map(|((a, p), m)| a - theta[j] * m * p)
                    .collect();
                norm(&r) / (w_norm * norm(&ritz[j]))
            })
            .fold(0.0, f64::max);
        x = ritz;
        if residual <= options.tolerance {
            let phi = Mat::from_fn(n, k, |i, j| x[j][i]);
            return Ok((theta[..k].to_vec(), phi));
        }
    }
    Err(Error::ConvergenceFailure {
        iterations: options.max_iterations,
        residual,
    })
}
