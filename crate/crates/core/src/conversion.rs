//! Conversion between point-wise and functional maps.
//!
//! Point maps run from Y to X: entry `y` names the vertex of X that vertex
//! `y` of Y corresponds to, so `Π` is `n_Y × n_X` and the induced functional
//! map is `C = Φ_Y† Π Φ_X` (`k_Y × k_X`).

use alloc::vec::Vec;

use crate::descriptors::FeatureMatrix;
use crate::fmap::{FunctionalMap, Provenance};
use crate::linalg::{dot, Mat};
pub use crate::nn::NnBackend;
use crate::nn::nearest_rows;
use crate::spectral::SpectralBasis;
use crate::{Error, Result};

/// Row count kept by the sparse soft-map variant.
pub const DEFAULT_SOFT_TOP: usize = 32;

const ROW_SUM_TOL: f64 = 1e-9;

/// Row-stochastic `n_Y × n_X` correspondence weights.
#[derive(Clone, Debug, PartialEq)]
pub enum SoftMap {
    Dense(Mat),
    /// Each row keeps only its `t` largest weights.
    TopT {
        n_x: usize,
        t: usize,
        indices: Vec<usize>,
        weights: Vec<f64>,
    },
}

impl SoftMap {
    pub fn n_y(&self) -> usize {
        match self {
            SoftMap::Dense(m) => m.rows(),
            SoftMap::TopT { t, indices, .. } => indices.len() / t,
        }
    }

    pub fn n_x(&self) -> usize {
        match self {
            SoftMap::Dense(m) => m.cols(),
            SoftMap::TopT { n_x, .. } => *n_x,
        }
    }

    /// Dense copy of the weights.
    pub fn to_dense(&self) -> Mat {
        match self {
            SoftMap::Dense(m) => m.clone(),
            SoftMap::TopT { n_x, t, indices, weights } => {
                let n_y = indices.len() / t;
                let mut m = Mat::zeros(n_y, *n_x);
                for y in 0..n_y {
                    for s in y * t..(y + 1) * t {
                        m[(y, indices[s])] += weights[s];
                    }
                }
                m
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let dense = self.to_dense();
        for y in 0..dense.rows() {
            let row = dense.row(y);
            if row.iter().any(|&w| !(w >= 0.0)) {
                return Err(Error::InvalidParameter(alloc::format!("soft map row {y} has a negative or NaN weight")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidParameter(alloc::format!("soft map row {y} sums to {sum}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PointMap {
    Hard { targets: Vec<usize>, n_x: usize },
    Soft(SoftMap),
}

impl PointMap {
    /// Hard map; every target must lie in `[0, n_x)`.
    pub fn hard(targets: Vec<usize>, n_x: usize) -> Result<Self> {
        if let Some(&bad) = targets.iter().find(|&&t| t >= n_x) {
            return Err(Error::InvalidParameter(alloc::format!("target {bad} out of range for {n_x} vertices")));
        }
        Ok(PointMap::Hard { targets, n_x })
    }

    /// Soft map; rows must be non-negative and sum to one.
    pub fn soft(map: SoftMap) -> Result<Self> {
        map.validate()?;
        Ok(PointMap::Soft(map))
    }

    pub fn identity(n: usize) -> Self {
        PointMap::Hard {
            targets: (0..n).collect(),
            n_x: n,
        }
    }

    pub fn n_y(&self) -> usize {
        match self {
            PointMap::Hard { targets, .. } => targets.len(),
            PointMap::Soft(s) => s.n_y(),
        }
    }

    pub fn n_x(&self) -> usize {
        match self {
            PointMap::Hard { n_x, .. } => *n_x,
            PointMap::Soft(s) => s.n_x(),
        }
    }

    pub fn as_hard(&self) -> Option<&[usize]> {
        match self {
            PointMap::Hard { targets, .. } => Some(targets),
            PointMap::Soft(_) => None,
        }
    }

    /// True for hard maps that hit every target at most once.
    pub fn is_partial_permutation(&self) -> bool {
        let Some(targets) = self.as_hard() else {
            return false;
        };
        let mut seen = alloc::vec![false; self.n_x()];
        targets.iter().all(|&t| !core::mem::replace(&mut seen[t], true))
    }

    /// `Π f` for an `n_X × c` matrix `f`.
    pub fn apply(&self, f: &Mat) -> Mat {
        assert_eq!(f.rows(), self.n_x(), "PointMap::apply: row count");
        match self {
            PointMap::Hard { targets, .. } => f.select_rows(targets),
            PointMap::Soft(SoftMap::Dense(m)) => m.matmul(f),
            PointMap::Soft(SoftMap::TopT { t, indices, weights, .. }) => {
                let n_y = indices.len() / t;
                let mut out = Mat::zeros(n_y, f.cols());
                for y in 0..n_y {
                    for s in y * t..(y + 1) * t {
                        let w = weights[s];
                        let src = f.row(indices[s]);
                        for (o, v) in out.row_mut(y).iter_mut().zip(src) {
                            *o += w * v;
                        }
                    }
                }
                out
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PointMapMode {
    /// Nearest feature row (squared Euclidean distance).
    HardNn,
    /// Row-wise softmax of `F_Y F_Xᵀ / τ`.
    Softmax,
    /// Softmax restricted to each row's `t` largest logits.
    SoftmaxTop(usize),
}

fn check_feature_dims(f_x: &Mat, f_y: &Mat) -> Result<()> {
    if f_x.cols() != f_y.cols() {
        return Err(Error::DimensionMismatch {
            context: "pointmap_from_features",
            expected: (f_y.rows(), f_x.cols()),
            found: f_y.shape(),
        });
    }
    Ok(())
}

/// Point map Y → X from per-vertex descriptors.
pub fn pointmap_from_features(f_x: &FeatureMatrix, f_y: &FeatureMatrix, mode: PointMapMode, tau: f64) -> Result<PointMap> {
    pointmap_from_feature_rows(f_x.features(), f_y.features(), mode, tau)
}

/// [`pointmap_from_features`] on raw `n × c` matrices.
pub fn pointmap_from_feature_rows(f_x: &Mat, f_y: &Mat, mode: PointMapMode, tau: f64) -> Result<PointMap> {
    check_feature_dims(f_x, f_y)?;
    if f_x.rows() == 0 {
        return Err(Error::InvalidParameter("empty source feature set".into()));
    }
    match mode {
        PointMapMode::HardNn => Ok(PointMap::Hard {
            targets: nearest_rows(f_y, f_x, NnBackend::BruteForce),
            n_x: f_x.rows(),
        }),
        PointMapMode::Softmax => {
            check_tau(tau)?;
            let mut m = Mat::zeros(f_y.rows(), f_x.rows());
            for y in 0..f_y.rows() {
                softmax_row(f_y.row(y), f_x, tau, m.row_mut(y));
            }
            Ok(PointMap::Soft(SoftMap::Dense(m)))
        }
        PointMapMode::SoftmaxTop(t) => {
            check_tau(tau)?;
            if t == 0 {
                return Err(Error::InvalidParameter("top-t soft map needs t ≥ 1".into()));
            }
            let t = t.min(f_x.rows());
            let mut indices = Vec::with_capacity(t * f_y.rows());
            let mut weights = Vec::with_capacity(t * f_y.rows());
            let mut logits: Vec<(f64, usize)> = Vec::with_capacity(f_x.rows());
            for y in 0..f_y.rows() {
                logits.clear();
                logits.extend((0..f_x.rows()).map(|x| (dot(f_y.row(y), f_x.row(x)) / tau, x)));
                logits.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                let top = logits[0].0;
                let exps: Vec<f64> = logits[..t].iter().map(|&(l, _)| libm::exp(l - top)).collect();
                let total: f64 = exps.iter().sum();
                for (&(_, x), e) in logits[..t].iter().zip(&exps) {
                    indices.push(x);
                    weights.push(e / total);
                }
            }
            Ok(PointMap::Soft(SoftMap::TopT {
                n_x: f_x.rows(),
                t,
                indices,
                weights,
            }))
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(alloc::format!("temperature must be positive, got {tau}")));
    }
    Ok(())
}

/// `out[x] = softmax_x(⟨q, F_x⟩ / τ)`.
fn softmax_row(q: &[f64], f_x: &Mat, tau: f64, out: &mut [f64]) {
    for (x, o) in out.iter_mut().enumerate() {
        *o = dot(q, f_x.row(x)) / tau;
    }
    let top = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for o in out.iter_mut() {
        *o = libm::exp(*o - top);
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

fn check_bases(pi: &PointMap, basis_x: &SpectralBasis, basis_y: &SpectralBasis) -> Result<()> {
    if pi.n_x() != basis_x.n() {
        return Err(Error::BasisMeshMismatch(alloc::format!(
            "point map targets {} vertices but the source basis has {}",
            pi.n_x(),
            basis_x.n()
        )));
    }
    if pi.n_y() != basis_y.n() {
        return Err(Error::BasisMeshMismatch(alloc::format!(
            "point map has {} rows but the target basis has {} vertices",
            pi.n_y(),
            basis_y.n()
        )));
    }
    Ok(())
}

/// `C = Φ_Y† Π Φ_X` using the full bases.
pub fn fmap_from_pointmap(pi: &PointMap, basis_x: &SpectralBasis, basis_y: &SpectralBasis) -> Result<FunctionalMap> {
    fmap_from_pointmap_truncated(pi, basis_x, basis_y, basis_x.k(), basis_y.k())
}

/// `C = Φ_Y† Π Φ_X` restricted to the leading `k_x` and `k_y` eigenfunctions.
pub fn fmap_from_pointmap_truncated(
    pi: &PointMap,
    basis_x: &SpectralBasis,
    basis_y: &SpectralBasis,
    k_x: usize,
    k_y: usize,
) -> Result<FunctionalMap> {
    check_bases(pi, basis_x, basis_y)?;
    for (k, b) in [(k_x, basis_x), (k_y, basis_y)] {
        if k > b.k() {
            return Err(Error::BasisTooSmall {
                requested: k,
                available: b.k(),
            });
        }
    }
    let pulled = pi.apply(&basis_x.phi().leading_columns(k_x));
    let c = basis_y.phi_dagger().top_left(k_y, basis_y.n()).matmul(&pulled);
    FunctionalMap::new(c, Provenance::ConvertedFromPointwise)
}

/// Hard map recovered from `C` by matching rows of `Φ_Y` against rows of
/// `Φ_X Cᵀ` (both truncated to the shape of `C`).
pub fn pointmap_from_fmap(c: &FunctionalMap, basis_x: &SpectralBasis, basis_y: &SpectralBasis) -> Result<PointMap> {
    pointmap_from_fmap_with(c, basis_x, basis_y, NnBackend::BruteForce)
}

pub fn pointmap_from_fmap_with(
    c: &FunctionalMap,
    basis_x: &SpectralBasis,
    basis_y: &SpectralBasis,
    backend: NnBackend,
) -> Result<PointMap> {
    let (k_y, k_x) = c.matrix().shape();
    if k_x > basis_x.k() || k_y > basis_y.k() {
        return Err(Error::DimensionMismatch {
            context: "pointmap_from_fmap",
            expected: (basis_y.k(), basis_x.k()),
            found: (k_y, k_x),
        });
    }
    let emb_x = basis_x.phi().leading_columns(k_x).matmul_tr(c.matrix());
    let emb_y = basis_y.phi().leading_columns(k_y);
    Ok(PointMap::Hard {
        targets: nearest_rows(&emb_y, &emb_x, backend),
        n_x: basis_x.n(),
    })
}

/// Spectral upsampling: alternate point-map recovery and conversion while
/// growing the map from `k_start` to `k_end` by `step`.
///
/// Returns the final `k_end × k_end` map and the hard point map it induces.
pub fn refine_spectral_upsampling(
    c0: &FunctionalMap,
    basis_x: &SpectralBasis,
    basis_y: &SpectralBasis,
    k_start: usize,
    k_end: usize,
    step: usize,
) -> Result<(FunctionalMap, PointMap)> {
    if step == 0 {
        return Err(Error::InvalidParameter("upsampling step must be positive".into()));
    }
    if k_start > k_end {
        return Err(Error::InvalidParameter(alloc::format!("k_start {k_start} exceeds k_end {k_end}")));
    }
    let available = basis_x.k().min(basis_y.k());
    if k_end > available {
        return Err(Error::BasisTooSmall {
            requested: k_end,
            available,
        });
    }
    if c0.matrix().shape() != (k_start, k_start) {
        return Err(Error::DimensionMismatch {
            context: "refine_spectral_upsampling",
            expected: (k_start, k_start),
            found: c0.matrix().shape(),
        });
    }
    let mut c = c0.clone();
    let mut k = k_start;
    while k < k_end {
        let pi = pointmap_from_fmap(&c, basis_x, basis_y)?;
        k = (k + step).min(k_end);
        c = fmap_from_pointmap_truncated(&pi, basis_x, basis_y, k, k)?;
    }
    let pi = pointmap_from_fmap(&c, basis_x, basis_y)?;
    Ok((c, pi))
}

/// `Φ† Softmax(F Fᵀ / τ) Φ` without forming the `n × n` soft map.
pub fn soft_self_map_fmap(features: &Mat, basis: &SpectralBasis, tau: f64) -> Result<Mat> {
    soft_pointmap_fmap(features, features, basis, basis, tau)
}

/// `Φ_Y† Softmax(F_Y F_Xᵀ / τ) Φ_X`, streaming one soft-map row at a time.
pub fn soft_pointmap_fmap(f_x: &Mat, f_y: &Mat, basis_x: &SpectralBasis, basis_y: &SpectralBasis, tau: f64) -> Result<Mat> {
    check_feature_dims(f_x, f_y)?;
    for (f, b) in [(f_x, basis_x), (f_y, basis_y)] {
        if f.rows() != b.n() {
            return Err(Error::DimensionMismatch {
                context: "soft_pointmap_fmap",
                expected: (b.n(), f.cols()),
                found: f.shape(),
            });
        }
    }
    check_tau(tau)?;
    let phi = basis_x.phi();
    let mut pulled = Mat::zeros(f_y.rows(), basis_x.k());
    let mut weights = alloc::vec![0.0; f_x.rows()];
    for y in 0..f_y.rows() {
        softmax_row(f_y.row(y), f_x, tau, &mut weights);
        let out = pulled.row_mut(y);
        for (x, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(phi.row(x)) {
                *o += w * v;
            }
        }
    }
    Ok(basis_y.phi_dagger().matmul(&pulled))
}
