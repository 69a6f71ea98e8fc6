//! Unsupervised functional map losses.
//!
//! The orthogonality term is the per-map form
//! `‖C_XYᵀ C_XY − I‖² + ‖C_YXᵀ C_YX − I‖²`: each map is compared against
//! itself.

use crate::conversion::soft_self_map_fmap;
use crate::descriptors::FeatureMatrix;
use crate::fmap::{FunctionalMap, LossWeights, Provenance};
use crate::linalg::Mat;
use crate::spectral::SpectralBasis;
use crate::{Error, Result};

/// Per-pair loss breakdown.
///
/// `total = w_bij·bij + w_orth·orth + w_couple·couple + w_contrast·(contrast_x + contrast_y)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossReport {
    pub bij: f64,
    pub orth: f64,
    pub couple: f64,
    pub contrast_x: f64,
    pub contrast_y: f64,
    pub total: f64,
}

impl LossReport {
    pub fn new(bij: f64, orth: f64, couple: f64, contrast_x: f64, contrast_y: f64, weights: &LossWeights) -> Self {
        let mut r = Self {
            bij,
            orth,
            couple,
            contrast_x,
            contrast_y,
            total: 0.0,
        };
        r.total = r.weighted_total(weights);
        r
    }

    pub fn weighted_total(&self, w: &LossWeights) -> f64 {
        w.bij * self.bij + w.orth * self.orth + w.couple * self.couple + w.contrast * (self.contrast_x + self.contrast_y)
    }

    pub fn contrast(&self) -> f64 {
        self.contrast_x + self.contrast_y
    }

    /// Component-wise mean of several reports (totals are averaged as well).
    pub fn mean(reports: &[LossReport]) -> LossReport {
        let n = reports.len().max(1) as f64;
        let mut m = LossReport::default();
        for r in reports {
            m.bij += r.bij / n;
            m.orth += r.orth / n;
            m.couple += r.couple / n;
            m.contrast_x += r.contrast_x / n;
            m.contrast_y += r.contrast_y / n;
            m.total += r.total / n;
        }
        m
    }
}

fn identity_defect(m: &Mat) -> Mat {
    let mut d = m.clone();
    for i in 0..d.rows().min(d.cols()) {
        d[(i, i)] -= 1.0;
    }
    d
}

fn check_square(a: &Mat, context: &'static str) -> Result<()> {
    if a.rows() != a.cols() {
        return Err(Error::DimensionMismatch {
            context,
            expected: (a.rows(), a.rows()),
            found: a.shape(),
        });
    }
    Ok(())
}

fn check_pair(c_xy: &Mat, c_yx: &Mat, context: &'static str) -> Result<()> {
    if c_xy.rows() != c_yx.cols() || c_xy.cols() != c_yx.rows() {
        return Err(Error::DimensionMismatch {
            context,
            expected: (c_xy.cols(), c_xy.rows()),
            found: c_yx.shape(),
        });
    }
    Ok(())
}

/// `‖C_XY C_YX − I‖²_F + ‖C_YX C_XY − I‖²_F`.
pub fn loss_bijectivity(c_xy: &FunctionalMap, c_yx: &FunctionalMap) -> Result<f64> {
    bijectivity(c_xy.matrix(), c_yx.matrix())
}

pub(crate) fn bijectivity(a: &Mat, b: &Mat) -> Result<f64> {
    check_pair(a, b, "loss_bijectivity")?;
    Ok(identity_defect(&a.matmul(b)).frobenius_norm_sq() + identity_defect(&b.matmul(a)).frobenius_norm_sq())
}

/// Gradients of the bijectivity loss with respect to `C_XY` and `C_YX`.
pub(crate) fn bijectivity_gradient(a: &Mat, b: &Mat) -> (Mat, Mat) {
    let e1 = identity_defect(&a.matmul(b));
    let e2 = identity_defect(&b.matmul(a));
    // d/dA: 2 E1 Bᵀ + 2 Bᵀ E2 ; d/dB: 2 Aᵀ E1 + 2 E2 Aᵀ
    let ga = &e1.matmul_tr(b) + &b.tr_matmul(&e2);
    let gb = &a.tr_matmul(&e1) + &e2.matmul_tr(a);
    (ga.scaled(2.0), gb.scaled(2.0))
}

/// `‖C_XYᵀ C_XY − I‖²_F + ‖C_YXᵀ C_YX − I‖²_F`.
pub fn loss_orthogonality(c_xy: &FunctionalMap, c_yx: &FunctionalMap) -> Result<f64> {
    orthogonality(c_xy.matrix(), c_yx.matrix())
}

pub(crate) fn orthogonality(a: &Mat, b: &Mat) -> Result<f64> {
    check_square(a, "loss_orthogonality")?;
    check_square(b, "loss_orthogonality")?;
    Ok(identity_defect(&a.tr_matmul(a)).frobenius_norm_sq() + identity_defect(&b.tr_matmul(b)).frobenius_norm_sq())
}

/// `∂/∂A ‖AᵀA − I‖² = 4 A (AᵀA − I)`.
pub(crate) fn orthogonality_gradient(a: &Mat) -> Mat {
    a.matmul(&identity_defect(&a.tr_matmul(a))).scaled(4.0)
}

/// `‖C − C^Π‖²_F` between a solved map and one converted from a point map.
pub fn loss_coupling(solved: &FunctionalMap, converted: &FunctionalMap) -> Result<f64> {
    if solved.provenance() != Provenance::Solved {
        return Err(Error::ProvenanceMismatch("first coupling argument must be a solved map"));
    }
    if converted.provenance() != Provenance::ConvertedFromPointwise {
        return Err(Error::ProvenanceMismatch("second coupling argument must be converted from a point map"));
    }
    coupling(solved.matrix(), converted.matrix())
}

pub(crate) fn coupling(a: &Mat, target: &Mat) -> Result<f64> {
    if a.shape() != target.shape() {
        return Err(Error::DimensionMismatch {
            context: "loss_coupling",
            expected: a.shape(),
            found: target.shape(),
        });
    }
    Ok((a - target).frobenius_norm_sq())
}

/// `‖Φ† Softmax(F Fᵀ / τ) Φ − I‖²_F`.
pub fn loss_contrastive(features: &FeatureMatrix, basis: &SpectralBasis, tau: f64) -> Result<f64> {
    let c = soft_self_map_fmap(features.features(), basis, tau)?;
    Ok(identity_defect(&c).frobenius_norm_sq())
}
