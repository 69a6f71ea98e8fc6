//! Intrinsic per-vertex descriptors: heat and wave kernel signatures.
//!
//! Both are computed from a truncated eigenbasis and every output column is
//! scaled to unit M-weighted norm `sqrt(Σ_i M_ii f_i²)`.

use alloc::vec::Vec;

use crate::linalg::Mat;
use crate::spectral::SpectralBasis;
use crate::{Error, Result};

/// Default wave-kernel variance multiplier.
pub const DEFAULT_WKS_VARIANCE: f64 = 7.0;

/// Default descriptor dimension.
pub const DEFAULT_WKS_ENERGIES: usize = 128;

/// Per-vertex descriptors `F` (n × c) together with their spectral
/// coefficients `A = Φ† F` (k × c).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    features: Mat,
    coefficients: Mat,
}

impl FeatureMatrix {
    /// Wraps descriptors defined on the mesh of `basis`.
    ///
    /// Rejects non-finite values and all-zero rows.
    pub fn new(features: Mat, basis: &SpectralBasis) -> Result<Self> {
        let coefficients = Self::validate(&features, basis)?;
        Ok(Self { features, coefficients })
    }

    /// Replaces the descriptors, recomputing the coefficients.
    pub fn set_features(&mut self, features: Mat, basis: &SpectralBasis) -> Result<()> {
        self.coefficients = Self::validate(&features, basis)?;
        self.features = features;
        Ok(())
    }

    fn validate(features: &Mat, basis: &SpectralBasis) -> Result<Mat> {
        if !features.is_finite() {
            return Err(Error::InvalidParameter("features contain non-finite values".into()));
        }
        if features.cols() == 0 {
            return Err(Error::InvalidParameter("features have no columns".into()));
        }
        if let Some(row) = (0..features.rows()).find(|&i| features.row(i).iter().all(|&v| v == 0.0)) {
            return Err(Error::InvalidParameter(alloc::format!("feature row {row} is all zero")));
        }
        basis.project(features)
    }

    pub fn features(&self) -> &Mat {
        &self.features
    }

    pub fn coefficients(&self) -> &Mat {
        &self.coefficients
    }

    /// First `k` rows of the coefficient matrix (coefficients in a truncated basis).
    pub fn coefficients_truncated(&self, k: usize) -> Result<Mat> {
        if k > self.coefficients.rows() {
            return Err(Error::BasisTooSmall {
                requested: k,
                available: self.coefficients.rows(),
            });
        }
        Ok(self.coefficients.top_left(k, self.coefficients.cols()))
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }
}

fn nonzero_eigenvalues(basis: &SpectralBasis) -> Result<Vec<(usize, f64)>> {
    let lambda = basis.lambda();
    let max = lambda.iter().copied().fold(0.0, f64::max);
    let nonzero: Vec<(usize, f64)> = lambda
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, l)| l > 1e-8 * max)
        .collect();
    if nonzero.len() < 2 {
        return Err(Error::DegenerateSpectrum { nonzero: nonzero.len() });
    }
    Ok(nonzero)
}

fn normalize_columns(f: &mut Mat, mass: &[f64]) {
    for j in 0..f.cols() {
        let norm = libm::sqrt((0..f.rows()).map(|i| mass[i] * f[(i, j)] * f[(i, j)]).sum::<f64>());
        if norm > 0.0 {
            for i in 0..f.rows() {
                f[(i, j)] /= norm;
            }
        }
    }
}

fn linspace(start: f64, end: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return alloc::vec![start];
    }
    (0..count)
        .map(|i| start + (end - start) * i as f64 / (count - 1) as f64)
        .collect()
}

/// `HKS(x, t) = Σ_i exp(−Λ_i t) Φ[x,i]²` at the given times, columns
/// normalized.
pub fn heat_kernel_signature(basis: &SpectralBasis, times: &[f64]) -> Mat {
    let phi = basis.phi();
    let mut f = Mat::from_fn(basis.n(), times.len(), |x, c| {
        basis
            .lambda()
            .iter()
            .enumerate()
            .map(|(i, &l)| libm::exp(-l * times[c]) * phi[(x, i)] * phi[(x, i)])
            .sum()
    });
    normalize_columns(&mut f, basis.mass());
    f
}

/// Heat kernel signature at `num_times` times log-spaced over
/// `[4 ln 10 / Λ_max, 4 ln 10 / Λ_min]` (smallest nonzero eigenvalue).
pub fn hks(basis: &SpectralBasis, num_times: usize) -> Result<FeatureMatrix> {
    if num_times == 0 {
        return Err(Error::InvalidParameter("num_times must be positive".into()));
    }
    let nonzero = nonzero_eigenvalues(basis)?;
    let lambda_min = nonzero[0].1;
    let lambda_max = nonzero[nonzero.len() - 1].1;
    let c = 4.0 * core::f64::consts::LN_10;
    let times: Vec<f64> = linspace(libm::log(c / lambda_max), libm::log(c / lambda_min), num_times)
        .into_iter()
        .map(libm::exp)
        .collect();
    FeatureMatrix::new(heat_kernel_signature(basis, &times), basis)
}

/// `WKS(x, e) = Σ_i g_i(e) Φ[x,i]² / Σ_i g_i(e)` with
/// `g_i(e) = exp(−(e − ln Λ_i)² / 2σ²)` over the nonzero eigenvalues,
/// columns normalized.
pub fn wave_kernel_signature(basis: &SpectralBasis, energies: &[f64], sigma: f64) -> Result<Mat> {
    let nonzero = nonzero_eigenvalues(basis)?;
    let log_lambda: Vec<f64> = nonzero.iter().map(|&(_, l)| libm::log(l)).collect();
    let phi = basis.phi();
    let mut f = Mat::zeros(basis.n(), energies.len());
    for (c, &e) in energies.iter().enumerate() {
        let exponents: Vec<f64> = log_lambda
            .iter()
            .map(|&ll| -(e - ll) * (e - ll) / (2.0 * sigma * sigma))
            .collect();
        // the common factor exp(max) cancels in the ratio
        let top = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = exponents.iter().map(|&x| libm::exp(x - top)).collect();
        let total: f64 = weights.iter().sum();
        for x in 0..basis.n() {
            let s: f64 = nonzero
                .iter()
                .zip(&weights)
                .map(|(&(i, _), &g)| g * phi[(x, i)] * phi[(x, i)])
                .sum();
            f[(x, c)] = s / total;
        }
    }
    normalize_columns(&mut f, basis.mass());
    Ok(f)
}

/// Wave kernel signature with `num_energies` energies linearly spaced over
/// `[ln Λ_1 + 2σ, ln Λ_max − 2σ]` and `σ = variance_scale · (ln Λ_max − ln Λ_1) / num_energies`.
pub fn wks(basis: &SpectralBasis, num_energies: usize, variance_scale: f64) -> Result<FeatureMatrix> {
    if num_energies == 0 {
        return Err(Error::InvalidParameter("num_energies must be positive".into()));
    }
    if !(variance_scale > 0.0) {
        return Err(Error::InvalidParameter("variance_scale must be positive".into()));
    }
    let nonzero = nonzero_eigenvalues(basis)?;
    let e_min = libm::log(nonzero[0].1);
    let e_max = libm::log(nonzero[nonzero.len() - 1].1);
    let sigma = variance_scale * (e_max - e_min) / num_energies as f64;
    if !(sigma > 0.0) {
        return Err(Error::DegenerateSpectrum { nonzero: 1 });
    }
    let energies = linspace(e_min + 2.0 * sigma, e_max - 2.0 * sigma, num_energies);
    FeatureMatrix::new(wave_kernel_signature(basis, &energies, sigma)?, basis)
}
