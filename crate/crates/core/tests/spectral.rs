#![allow(clippy::needless_range_loop)]

mod common;

use fmapkit_core::mesh::build_laplacian;
use fmapkit_core::shapes;
use fmapkit_core::spectral::{compute_basis, EIGEN_RESIDUAL_TOL};
use nalgebra::{DMatrix, SymmetricEigen};

/// Generalized eigenpairs of (W, M) from nalgebra's dense symmetric solver
/// applied to `M^{-1/2} W M^{-1/2}`.
fn oracle(mesh: &fmapkit_core::mesh::TriangleMesh) -> (Vec<f64>, DMatrix<f64>, Vec<f64>) {
    let lap = build_laplacian(mesh).unwrap();
    let w = lap.stiffness().to_dense();
    let m = lap.mass().to_vec();
    let n = m.len();
    let a = DMatrix::from_fn(n, n, |i, j| w[(i, j)] / (m[i] * m[j]).sqrt());
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let phi = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])] / m[i].sqrt());
    (values, phi, m)
}

#[test]
fn eigenpairs_match_dense_oracle() {
    for (mesh, k) in [(shapes::blob(), 30), (shapes::wavy_patch(), 30), (shapes::bumpy_torus(), 20)] {
        let basis = common::basis(&mesh, k);
        let (values, phi, m) = oracle(&mesh);
        let scale = values[values.len() - 1];
        for j in 0..k {
            let ours = basis.lambda()[j];
            assert!((ours - values[j]).abs() < 1e-9 * scale.max(1.0), "eigenvalue {j}: {ours} vs {}", values[j]);
        }
        for j in 1..k {
            let gap = (values[j] - values[j - 1]).min(values[j + 1] - values[j]);
            if gap < 1e-3 * values[j] {
                continue;
            }
            let overlap: f64 = (0..mesh.n()).map(|i| m[i] * basis.phi()[(i, j)] * phi[(i, j)]).sum();
            assert!((overlap.abs() - 1.0).abs() < 1e-7, "mode {j}: overlap {overlap}");
        }
    }
}

#[test]
fn basis_is_mass_orthonormal_with_small_residuals() {
    for mesh in [shapes::blob(), shapes::bumpy_torus(), shapes::wavy_patch()] {
        let lap = build_laplacian(&mesh).unwrap();
        let basis = compute_basis(&lap, 30).unwrap();
        let gram = basis.phi_dagger().matmul(basis.phi());
        assert!((&gram - &fmapkit_core::Mat::identity(30)).max_abs() < 1e-9);
        assert!(basis.max_residual(&lap) < EIGEN_RESIDUAL_TOL);
        assert_eq!(basis.lambda()[0], 0.0);
        assert!(basis.lambda().windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn sign_convention_and_determinism() {
    let mesh = shapes::blob();
    let a = common::basis(&mesh, 12);
    let b = common::basis(&mesh, 12);
    assert_eq!(a, b);
    for j in 0..12 {
        let col = a.phi().column(j);
        let big = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let first = col.iter().find(|v| v.abs() > 1e-8 * big).unwrap();
        assert!(*first > 0.0);
    }
}

#[test]
fn permuted_basis_is_a_basis_of_the_permuted_mesh() {
    let mesh = shapes::wavy_patch();
    let order = shapes::random_permutation(mesh.n(), 3);
    let permuted = mesh.permuted(&order).unwrap();
    let basis = common::basis(&mesh, 10).permuted(&order);
    let lap = build_laplacian(&permuted).unwrap();
    assert!(basis.max_residual(&lap) < EIGEN_RESIDUAL_TOL);
}
