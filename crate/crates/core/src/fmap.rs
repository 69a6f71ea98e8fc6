//! Mask-regularized functional map solver.
//!
//! Solves
//!
//! ```text
//! C = argmin_C ‖C A_X − A_Y‖²_F + λ Σ_ij mask_ij C_ij²
//! ```
//!
//! The penalty is diagonal in the entries of each row of `C`, so the problem
//! splits into one `k_X × k_X` SPD system per row:
//! `(A_X A_Xᵀ + λ diag(mask_i)) c_i = A_X a_{Y,i}ᵀ`.
//!
//! Gradients of a downstream loss with respect to `λ` and the mask shape `γ`
//! are obtained by implicit differentiation of those row systems.

use alloc::vec::Vec;

use crate::linalg::{dot, DenseCholesky, Mat};
use crate::{Error, Result};

/// Row systems whose condition estimate exceeds this are rejected.
pub const MAX_ROW_CONDITION: f64 = 1e12;

pub const DEFAULT_LAMBDA: f64 = 100.0;
pub const DEFAULT_GAMMA: f64 = 0.5;
pub const DEFAULT_TAU: f64 = 0.07;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskKind {
    /// `(Λ_Y[i] − Λ_X[j])²`
    StandardLaplacian,
    /// Resolvent mask with shape parameter `γ`.
    Resolvent,
}

/// Weights of the unsupervised loss terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub bij: f64,
    pub orth: f64,
    pub couple: f64,
    pub contrast: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            bij: 1.0,
            orth: 1.0,
            couple: 1.0,
            contrast: 10.0,
        }
    }
}

/// Solver and loss configuration.
///
/// `λ` and `γ` are stored as unconstrained reals, `λ = exp(u)` and
/// `γ = 1 / (1 + exp(−v))`, so any gradient step keeps `λ > 0` and
/// `γ ∈ (0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverParams {
    log_lambda: f64,
    gamma_logit: f64,
    pub k: usize,
    pub tau: f64,
    pub weights: LossWeights,
    pub mask_kind: MaskKind,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self::new(DEFAULT_LAMBDA, DEFAULT_GAMMA).expect("defaults are valid")
    }
}

impl SolverParams {
    /// Resolvent-mask parameters with the given `λ > 0` and `γ ∈ (0, 1)`, and
    /// default `k`, `τ` and weights.
    pub fn new(lambda: f64, gamma: f64) -> Result<Self> {
        let mut p = Self {
            log_lambda: 0.0,
            gamma_logit: 0.0,
            k: crate::spectral::DEFAULT_K,
            tau: DEFAULT_TAU,
            weights: LossWeights::default(),
            mask_kind: MaskKind::Resolvent,
        };
        p.set_lambda(lambda)?;
        p.set_gamma(gamma)?;
        Ok(p)
    }

    pub fn lambda(&self) -> f64 {
        libm::exp(self.log_lambda)
    }

    pub fn gamma(&self) -> f64 {
        1.0 / (1.0 + libm::exp(-self.gamma_logit))
    }

    pub fn set_lambda(&mut self, lambda: f64) -> Result<()> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!("lambda must be positive, got {lambda}")));
        }
        self.log_lambda = libm::log(lambda);
        Ok(())
    }

    pub fn set_gamma(&mut self, gamma: f64) -> Result<()> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::GammaOutOfRange(gamma));
        }
        self.gamma_logit = libm::log(gamma / (1.0 - gamma));
        Ok(())
    }

    /// Unconstrained coordinates `(ln λ, logit γ)`.
    pub fn unconstrained(&self) -> [f64; 2] {
        [self.log_lambda, self.gamma_logit]
    }

    pub fn with_unconstrained(&self, u: [f64; 2]) -> Self {
        Self {
            log_lambda: u[0],
            gamma_logit: u[1],
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be positive".into()));
        }
        if !(self.tau > 0.0) {
            return Err(Error::InvalidParameter("tau must be positive".into()));
        }
        let w = &self.weights;
        if [w.bij, w.orth, w.couple, w.contrast].iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidParameter("loss weights must be non-negative".into()));
        }
        if !self.log_lambda.is_finite() || !self.gamma_logit.is_finite() {
            return Err(Error::InvalidParameter("non-finite lambda/gamma".into()));
        }
        Ok(())
    }

    /// Mask of the configured kind between target spectrum `lambda_y` and
    /// source spectrum `lambda_x`.
    pub fn mask(&self, lambda_x: &[f64], lambda_y: &[f64]) -> Result<MaskMatrix> {
        match self.mask_kind {
            MaskKind::StandardLaplacian => mask_standard(lambda_x, lambda_y),
            MaskKind::Resolvent => mask_resolvent(lambda_x, lambda_y, self.gamma()),
        }
    }
}

/// Non-negative per-entry penalty on a `k_Y × k_X` functional map.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskMatrix {
    entries: Mat,
}

impl MaskMatrix {
    pub fn new(entries: Mat) -> Result<Self> {
        if entries.as_slice().iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("mask entries must be finite and non-negative".into()));
        }
        Ok(Self { entries })
    }

    pub fn zeros(k_y: usize, k_x: usize) -> Self {
        Self {
            entries: Mat::zeros(k_y, k_x),
        }
    }

    pub fn entries(&self) -> &Mat {
        &self.entries
    }

    pub fn shape(&self) -> (usize, usize) {
        self.entries.shape()
    }
}

fn check_spectrum(values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidParameter("eigenvalues must be non-negative".into()));
    }
    Ok(())
}

/// `mask[i][j] = (Λ_Y[i] − Λ_X[j])²`.
pub fn mask_standard(lambda_x: &[f64], lambda_y: &[f64]) -> Result<MaskMatrix> {
    check_spectrum(lambda_x)?;
    check_spectrum(lambda_y)?;
    Ok(MaskMatrix {
        entries: Mat::from_fn(lambda_y.len(), lambda_x.len(), |i, j| {
            let d = lambda_y[i] - lambda_x[j];
            d * d
        }),
    })
}

/// Real and imaginary resolvent components of one eigenvalue and their
/// derivatives with respect to `γ`: `(re, im, d re/dγ, d im/dγ)` where
/// `re = Λ^γ / (Λ^{2γ} + 1)` and `im = 1 / (Λ^{2γ} + 1)`.
fn resolvent_parts(value: f64, gamma: f64) -> (f64, f64, f64, f64) {
    if value == 0.0 {
        // 0^γ = 0 for γ > 0, and the derivative of 0^γ in γ vanishes
        return (0.0, 1.0, 0.0, 0.0);
    }
    let p = libm::pow(value, gamma);
    let dp = p * libm::log(value);
    let q = p * p + 1.0;
    let re = p / q;
    let im = 1.0 / q;
    let dre = (1.0 - p * p) / (q * q) * dp;
    let dim = -2.0 * p / (q * q) * dp;
    (re, im, dre, dim)
}

/// Resolvent mask `M_re + M_im` with
/// `M_re[i][j] = (re(Λ_Y[i]) − re(Λ_X[j]))²` and
/// `M_im[i][j] = (im(Λ_Y[i]) − im(Λ_X[j]))²`.
///
/// Entries lie in `[0, 1.25]`.
pub fn mask_resolvent(lambda_x: &[f64], lambda_y: &[f64], gamma: f64) -> Result<MaskMatrix> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::GammaOutOfRange(gamma));
    }
    check_spectrum(lambda_x)?;
    check_spectrum(lambda_y)?;
    let px: Vec<_> = lambda_x.iter().map(|&l| resolvent_parts(l, gamma)).collect();
    let py: Vec<_> = lambda_y.iter().map(|&l| resolvent_parts(l, gamma)).collect();
    Ok(MaskMatrix {
        entries: Mat::from_fn(lambda_y.len(), lambda_x.len(), |i, j| {
            let dre = py[i].0 - px[j].0;
            let dim = py[i].1 - px[j].1;
            dre * dre + dim * dim
        }),
    })
}

/// Entrywise `∂ mask_resolvent / ∂γ`.
pub fn mask_resolvent_gamma_derivative(lambda_x: &[f64], lambda_y: &[f64], gamma: f64) -> Result<Mat> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::GammaOutOfRange(gamma));
    }
    let px: Vec<_> = lambda_x.iter().map(|&l| resolvent_parts(l, gamma)).collect();
    let py: Vec<_> = lambda_y.iter().map(|&l| resolvent_parts(l, gamma)).collect();
    Ok(Mat::from_fn(lambda_y.len(), lambda_x.len(), |i, j| {
        let (rey, imy, drey, dimy) = py[i];
        let (rex, imx, drex, dimx) = px[j];
        2.0 * (rey - rex) * (drey - drex) + 2.0 * (imy - imx) * (dimy - dimx)
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    /// Output of [`solve_fmap`].
    Solved,
    /// `Φ_Y† Π Φ_X` from a point-wise map.
    ConvertedFromPointwise,
}

/// A `k_Y × k_X` functional map from shape X to shape Y.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalMap {
    matrix: Mat,
    provenance: Provenance,
}

impl FunctionalMap {
    pub fn new(matrix: Mat, provenance: Provenance) -> Result<Self> {
        if !matrix.is_finite() {
            return Err(Error::InvalidParameter("functional map has non-finite entries".into()));
        }
        Ok(Self { matrix, provenance })
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn into_matrix(self) -> Mat {
        self.matrix
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn k_target(&self) -> usize {
        self.matrix.rows()
    }

    pub fn k_source(&self) -> usize {
        self.matrix.cols()
    }
}

fn check_solver_shapes(a_x: &Mat, a_y: &Mat, mask: &MaskMatrix) -> Result<()> {
    if a_x.cols() != a_y.cols() {
        return Err(Error::DimensionMismatch {
            context: "solve_fmap: descriptor count",
            expected: (a_y.rows(), a_x.cols()),
            found: a_y.shape(),
        });
    }
    if mask.shape() != (a_y.rows(), a_x.rows()) {
        return Err(Error::DimensionMismatch {
            context: "solve_fmap: mask",
            expected: (a_y.rows(), a_x.rows()),
            found: mask.shape(),
        });
    }
    Ok(())
}

/// Factorizations of the per-row systems `A_X A_Xᵀ + λ diag(mask_i)`.
struct RowSystems {
    systems: Vec<(Mat, DenseCholesky)>,
}

impl RowSystems {
    fn build(a_x: &Mat, mask: &MaskMatrix, lambda: f64) -> Result<Self> {
        let gram = a_x.matmul_tr(a_x);
        let k_x = a_x.rows();
        let mut systems = Vec::with_capacity(mask.shape().0);
        for i in 0..mask.shape().0 {
            let mut h = gram.clone();
            for j in 0..k_x {
                h[(j, j)] += lambda * mask.entries()[(i, j)];
            }
            let chol = DenseCholesky::factor(&h).map_err(|_| Error::SingularSystem {
                row: i,
                condition: f64::INFINITY,
            })?;
            let condition = chol.condition_estimate(&h);
            if !(condition <= MAX_ROW_CONDITION) {
                return Err(Error::SingularSystem { row: i, condition });
            }
            systems.push((h, chol));
        }
        Ok(Self { systems })
    }
}

/// Unique minimizer of `‖C A_X − A_Y‖²_F + λ Σ mask_ij C_ij²`, solved row by row.
///
/// `a_x` is `k_X × c`, `a_y` is `k_Y × c` and `mask` is `k_Y × k_X`.
pub fn solve_fmap(a_x: &Mat, a_y: &Mat, mask: &MaskMatrix, lambda: f64) -> Result<FunctionalMap> {
    check_solver_shapes(a_x, a_y, mask)?;
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(alloc::format!("lambda must be non-negative, got {lambda}")));
    }
    let rows = RowSystems::build(a_x, mask, lambda)?;
    let rhs = a_y.matmul_tr(a_x);
    let mut c = Mat::zeros(a_y.rows(), a_x.rows());
    for (i, (h, chol)) in rows.systems.iter().enumerate() {
        let ci = chol.solve_refined(h, rhs.row(i));
        c.row_mut(i).copy_from_slice(&ci);
    }
    FunctionalMap::new(c, Provenance::Solved)
}

/// Gradient of a scalar loss with respect to the unconstrained solver
/// parameters `(ln λ, logit γ)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ParamGradient {
    pub d_log_lambda: f64,
    pub d_gamma_logit: f64,
}

impl ParamGradient {
    pub fn as_array(&self) -> [f64; 2] {
        [self.d_log_lambda, self.d_gamma_logit]
    }
}

impl core::ops::Add for ParamGradient {
    type Output = ParamGradient;
    fn add(self, rhs: ParamGradient) -> ParamGradient {
        ParamGradient {
            d_log_lambda: self.d_log_lambda + rhs.d_log_lambda,
            d_gamma_logit: self.d_gamma_logit + rhs.d_gamma_logit,
        }
    }
}

/// Chains `upstream = ∂L/∂C` through the solver's row systems.
///
/// For row `i` with `H_i c_i = b_i`:
/// `∂c_i/∂λ = −H_i⁻¹ diag(m_i) c_i` and `∂c_i/∂γ = −λ H_i⁻¹ diag(∂m_i/∂γ) c_i`.
/// The result is expressed in the unconstrained coordinates
/// (`∂/∂ln λ = λ ∂/∂λ`, `∂/∂logit γ = γ(1 − γ) ∂/∂γ`).
pub fn fmap_param_gradients(
    solution: &FunctionalMap,
    a_x: &Mat,
    a_y: &Mat,
    lambda_x: &[f64],
    lambda_y: &[f64],
    params: &SolverParams,
    upstream: &Mat,
) -> Result<ParamGradient> {
    if solution.provenance() != Provenance::Solved {
        return Err(Error::ProvenanceMismatch("parameter gradients need a solved map"));
    }
    let mask = params.mask(lambda_x, lambda_y)?;
    check_solver_shapes(a_x, a_y, &mask)?;
    let c = solution.matrix();
    if c.shape() != mask.shape() || upstream.shape() != mask.shape() {
        return Err(Error::DimensionMismatch {
            context: "fmap_param_gradients",
            expected: mask.shape(),
            found: upstream.shape(),
        });
    }
    let lambda = params.lambda();
    let gamma = params.gamma();
    let d_mask = match params.mask_kind {
        MaskKind::Resolvent => Some(mask_resolvent_gamma_derivative(lambda_x, lambda_y, gamma)?),
        MaskKind::StandardLaplacian => None,
    };

    let rows = RowSystems::build(a_x, &mask, lambda)?;
    let mut d_lambda = 0.0;
    let mut d_gamma = 0.0;
    for (i, (_, chol)) in rows.systems.iter().enumerate() {
        let g = upstream.row(i);
        if g.iter().all(|v| *v == 0.0) {
            continue;
        }
        // H is symmetric, so gᵀ H⁻¹ v = (H⁻¹ g)ᵀ v
        let w = chol.solve(g);
        let ci = c.row(i);
        let m: Vec<f64> = (0..ci.len()).map(|j| mask.entries()[(i, j)] * ci[j]).collect();
        d_lambda -= dot(&w, &m);
        if let Some(dm) = &d_mask {
            let v: Vec<f64> = (0..ci.len()).map(|j| dm[(i, j)] * ci[j]).collect();
            d_gamma -= lambda * dot(&w, &v);
        }
    }
    Ok(ParamGradient {
        d_log_lambda: lambda * d_lambda,
        d_gamma_logit: gamma * (1.0 - gamma) * d_gamma,
    })
}
