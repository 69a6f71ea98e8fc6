//! Procedural meshes used by tests, the bundled data set and the synthetic
//! collections.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::{norm3, Point3, TriangleMesh};

fn build(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> TriangleMesh {
    TriangleMesh::new(vertices, faces).expect("generated mesh is valid")
}

/// Regular tetrahedron with unit circumradius direction vectors (±1,±1,±1).
pub fn tetrahedron() -> TriangleMesh {
    build(
        alloc::vec![[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]],
        alloc::vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
    )
}

/// Octahedron with vertices on the coordinate axes; vertices 4 and 5 are the
/// poles `(0,0,±1)` and every edge has length √2.
pub fn octahedron() -> TriangleMesh {
    build(
        alloc::vec![
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ],
        alloc::vec![
            [0, 1, 4],
            [1, 2, 4],
            [2, 3, 4],
            [3, 0, 4],
            [1, 0, 5],
            [2, 1, 5],
            [3, 2, 5],
            [0, 3, 5],
        ],
    )
}

/// Unit sphere from `subdivisions` rounds of icosahedron midpoint subdivision
/// (`10·4^s + 2` vertices).
pub fn icosphere(subdivisions: usize) -> TriangleMesh {
    let t = (1.0 + libm::sqrt(5.0)) / 2.0;
    let mut vertices: Vec<Point3> = alloc::vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let mut faces: Vec<[usize; 3]> = alloc::vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    let normalize = |p: Point3| {
        let r = norm3(p);
        [p[0] / r, p[1] / r, p[2] / r]
    };
    vertices.iter_mut().for_each(|p| *p = normalize(*p));

    for _ in 0..subdivisions {
        let mut midpoints: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point3>| {
            let key = if a < b { (a, b) } else { (b, a) };
            *midpoints.entry(key).or_insert_with(|| {
                let (pa, pb) = (vertices[a], vertices[b]);
                vertices.push(normalize([(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0, (pa[2] + pb[2]) / 2.0]));
                vertices.len() - 1
            })
        };
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    build(vertices, faces)
}

/// Flat `[0,1]²` grid with `nx × ny` cells split along one diagonal.
pub fn grid(nx: usize, ny: usize) -> TriangleMesh {
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([i as f64 / nx as f64, j as f64 / ny as f64, 0.0]);
        }
    }
    let mut faces = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    build(vertices, faces)
}

/// Torus with `nu × nv` vertices, major radius `major`, minor radius `minor`.
pub fn torus(nu: usize, nv: usize, major: f64, minor: f64) -> TriangleMesh {
    let tau = 2.0 * core::f64::consts::PI;
    let id = |i: usize, j: usize| (j % nv) * nu + (i % nu);
    let mut vertices = Vec::with_capacity(nu * nv);
    for j in 0..nv {
        let v = tau * j as f64 / nv as f64;
        for i in 0..nu {
            let u = tau * i as f64 / nu as f64;
            let r = major + minor * libm::cos(v);
            vertices.push([r * libm::cos(u), r * libm::sin(u), minor * libm::sin(v)]);
        }
    }
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for j in 0..nv {
        for i in 0..nu {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    build(vertices, faces)
}

/// Random low-frequency displacement field `p ↦ p + amplitude · Σ sin(ω·p + φ) d`.
///
/// Smooth and small for small `amplitude`, so the result is a near-isometric
/// deformation of the input.
pub fn smooth_deformation(mesh: &TriangleMesh, seed: u64, amplitude: f64) -> TriangleMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(Point3, f64, Point3)> = (0..4)
        .map(|_| {
            let freq = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let phase = rng.random_range(0.0..core::f64::consts::TAU);
            let dir = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            (freq, phase, dir)
        })
        .collect();
    mesh.map_positions(|p| {
        let mut q = p;
        for (freq, phase, dir) in &waves {
            let s = libm::sin(freq[0] * p[0] + freq[1] * p[1] + freq[2] * p[2] + phase);
            for c in 0..3 {
                q[c] += amplitude * s * dir[c];
            }
        }
        q
    })
    .expect("deformation keeps connectivity valid")
}

/// Asymmetric closed surface: an icosphere (subdivision 3, 642 vertices) with
/// a smooth radial bump field.
pub fn blob() -> TriangleMesh {
    let sphere = icosphere(3);
    sphere
        .map_positions(|p| {
            let r = 1.0
                + 0.25 * libm::sin(1.7 * p[0] + 0.4) * libm::cos(1.1 * p[1] - 0.3)
                + 0.15 * libm::sin(2.3 * p[2] + 0.9 * p[0] + 1.2)
                + 0.10 * libm::cos(3.1 * p[1] + 0.5 * p[2]);
            [1.3 * r * p[0], r * p[1], 0.8 * r * p[2]]
        })
        .expect("valid")
}

/// Asymmetric genus-one surface (32 × 16 torus with a smooth bump field).
pub fn bumpy_torus() -> TriangleMesh {
    torus(32, 16, 1.0, 0.35)
        .map_positions(|p| {
            let s = 1.0 + 0.2 * libm::sin(1.3 * p[0] + 0.7) + 0.12 * libm::cos(2.1 * p[1] - 0.4 * p[2]);
            [s * p[0], p[1] + 0.15 * libm::sin(1.9 * p[0]), p[2] * (1.0 + 0.3 * p[0])]
        })
        .expect("valid")
}

/// Open height-field patch (20 × 20 cells) with an asymmetric bump, so the
/// boundary handling of the Laplacian is exercised.
pub fn wavy_patch() -> TriangleMesh {
    grid(20, 20)
        .map_positions(|p| {
            let (x, y) = (p[0], p[1]);
            let h = 0.35 * libm::exp(-((x - 0.3) * (x - 0.3) + (y - 0.65) * (y - 0.65)) / 0.04)
                + 0.15 * libm::sin(4.0 * x + 1.0) * libm::cos(3.0 * y)
                + 0.1 * x * y;
            [1.2 * x, y, h]
        })
        .expect("valid")
}

/// Uniformly random permutation of `0..n`.
pub fn random_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertex_counts_and_topology() {
        assert_eq!(icosphere(2).n(), 162);
        assert_eq!(icosphere(3).euler_characteristic(), 2);
        assert_eq!(torus(8, 6, 1.0, 0.3).euler_characteristic(), 0);
        assert_eq!(grid(3, 2).n(), 12);
        assert_eq!(grid(3, 2).euler_characteristic(), 1);
        assert_eq!(blob().n(), 642);
        assert_eq!(bumpy_torus().n(), 512);
        assert_eq!(wavy_patch().n(), 441);
    }

    #[test]
    fn grid_has_unit_area() {
        assert!((grid(7, 5).total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn permutation_is_a_bijection() {
        let mut p = random_permutation(50, 9);
        p.sort();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }
}
