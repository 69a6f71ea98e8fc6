#![allow(dead_code)]

use fmapkit_core::mesh::{build_laplacian, TriangleMesh};
use fmapkit_core::spectral::{compute_basis, SpectralBasis};
use fmapkit_core::Mat;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn to_na(m: &Mat) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_na(m: &DMatrix<f64>) -> Mat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn basis(mesh: &TriangleMesh, k: usize) -> SpectralBasis {
    compute_basis(&build_laplacian(mesh).unwrap(), k).unwrap()
}
