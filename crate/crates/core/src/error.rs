use alloc::boxed::Box;
use alloc::string::String;

use crate::adapt::AdaptOutcome;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),

    #[error("degenerate geometry: face {face} has area {area:e} (threshold {threshold:e})")]
    DegenerateGeometry { face: usize, area: f64, threshold: f64 },

    #[error("mesh is not edge-connected: {unreachable} vertices unreachable from {source_vertex}")]
    DisconnectedMesh { source_vertex: usize, unreachable: usize },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },

    #[error("requested {k} eigenpairs but the mesh has only {n} vertices")]
    KTooLarge { k: usize, n: usize },

    #[error("dimension mismatch in {context}: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        context: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("degenerate spectrum: need at least 2 nonzero eigenvalues, found {nonzero}")]
    DegenerateSpectrum { nonzero: usize },

    #[error("gamma {0} outside (0, 1]")]
    GammaOutOfRange(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("row system {row} is singular (condition estimate {condition:e})")]
    SingularSystem { row: usize, condition: f64 },

    #[error("functional map provenance mismatch: {0}")]
    ProvenanceMismatch(&'static str),

    #[error("loss became non-finite at step {step}")]
    NonFiniteLoss {
        step: usize,
        last_good: Box<AdaptOutcome>,
    },

    #[error("point map and basis disagree: {0}")]
    BasisMeshMismatch(String),

    #[error("basis has {available} functions but {requested} were requested")]
    BasisTooSmall { requested: usize, available: usize },

    #[error("random coefficient draw stayed rank deficient after {attempts} attempts (singular value ratio {ratio:e})")]
    RankDeficientDraw { attempts: usize, ratio: f64 },

    #[error("length mismatch: predicted map has {predicted} entries, ground truth has {ground_truth}")]
    LengthMismatch { predicted: usize, ground_truth: usize },
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ConvergenceFailure { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::SingularSystem { .. }
                | Error::NonFiniteLoss { .. }
                | Error::RankDeficientDraw { .. }
                | Error::DegenerateSpectrum { .. }
        )
    }
}
