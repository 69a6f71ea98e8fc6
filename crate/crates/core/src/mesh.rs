//! Triangle meshes, the cotangent Laplacian and edge-graph geodesics.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::linalg::CsrMatrix;
use crate::{Error, Result};

/// Cotangents are clamped to this magnitude.
pub const COT_CLAMP: f64 = 1e4;

/// Faces smaller than this fraction of the mean face area are rejected.
pub const MIN_RELATIVE_FACE_AREA: f64 = 1e-12;

pub type Point3 = [f64; 3];

#[inline]
pub(crate) fn sub3(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn dot3(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross3(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn norm3(a: Point3) -> f64 {
    libm::sqrt(dot3(a, a))
}

/// A validated triangle mesh with 0-based face indices.
///
/// Every face index is in range, no face repeats a vertex and every vertex is
/// referenced by at least one face.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if faces.is_empty() {
            return Err(Error::DegenerateMesh("mesh has no faces".into()));
        }
        if let Some((i, p)) = vertices.iter().enumerate().find(|(_, p)| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::DegenerateMesh(format!("vertex {i} has non-finite coordinates {p:?}")));
        }
        let mut used = vec![false; n];
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                if v >= n {
                    return Err(Error::DegenerateMesh(format!(
                        "face {fi} references vertex {v} but the mesh has {n} vertices"
                    )));
                }
                used[v] = true;
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::DegenerateMesh(format!("face {fi} repeats a vertex: {f:?}")));
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::DegenerateMesh(format!("vertex {v} is not referenced by any face")));
        }
        Ok(Self { vertices, faces })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Unique undirected edges as `(min, max)` pairs, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .faces
            .iter()
            .flat_map(|f| [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])])
            .map(|(a, b)| if a < b { (a, b) } else { (b, a) })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.n() as i64 - self.edges().len() as i64 + self.faces.len() as i64
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.faces[face].map(|i| self.vertices[i]);
        0.5 * norm3(cross3(sub3(b, a), sub3(c, a)))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Relabels vertices so that new vertex `i` is old vertex `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<TriangleMesh> {
        let n = self.n();
        if order.len() != n {
            return Err(Error::DegenerateMesh(format!(
                "permutation has length {} for a mesh with {n} vertices",
                order.len()
            )));
        }
        let mut inverse = vec![usize::MAX; n];
        for (new, &old) in order.iter().enumerate() {
            if old >= n || inverse[old] != usize::MAX {
                return Err(Error::DegenerateMesh("vertex order is not a permutation".into()));
            }
            inverse[old] = new;
        }
        let vertices = order.iter().map(|&old| self.vertices[old]).collect();
        let faces = self.faces.iter().map(|f| f.map(|v| inverse[v])).collect();
        TriangleMesh::new(vertices, faces)
    }

    /// Applies `f` to every vertex position; connectivity is unchanged.
    pub fn map_positions(&self, f: impl Fn(Point3) -> Point3) -> Result<TriangleMesh> {
        TriangleMesh::new(self.vertices.iter().map(|&p| f(p)).collect(), self.faces.clone())
    }
}

/// Cotangent stiffness matrix `W` and diagonal lumped mass `M`.
///
/// `W` is symmetric positive semi-definite with zero row sums; the
/// Laplace–Beltrami operator is `L = M⁻¹ W`.
#[derive(Clone, Debug)]
pub struct LaplacianPair {
    stiffness: CsrMatrix,
    mass: Vec<f64>,
}

impl LaplacianPair {
    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    /// Diagonal of the lumped mass matrix.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn n(&self) -> usize {
        self.mass.len()
    }

    pub fn total_area(&self) -> f64 {
        self.mass.iter().sum()
    }
}

fn clamped_cot(u: Point3, v: Point3) -> f64 {
    let cross = norm3(cross3(u, v));
    let cot = dot3(u, v) / cross;
    if cot.is_nan() {
        0.0
    } else {
        cot.clamp(-COT_CLAMP, COT_CLAMP)
    }
}

/// Builds the cotangent stiffness matrix and barycentric lumped mass matrix.
///
/// Off-diagonal entries are `W_ij = -(cot α_ij + cot β_ij) / 2` summed over
/// the faces incident to edge `ij` (boundary edges have one term), and the
/// diagonal is minus the off-diagonal row sum. `M_ii` is a third of the area
/// of the faces around vertex `i`.
pub fn build_laplacian(mesh: &TriangleMesh) -> Result<LaplacianPair> {
    let n = mesh.n();
    let areas: Vec<f64> = (0..mesh.faces().len()).map(|f| mesh.face_area(f)).collect();
    let mean_area = areas.iter().sum::<f64>() / areas.len() as f64;
    let threshold = MIN_RELATIVE_FACE_AREA * mean_area;
    if let Some((face, &area)) = areas.iter().enumerate().find(|(_, &a)| !(a >= threshold) || a == 0.0) {
        return Err(Error::DegenerateGeometry { face, area, threshold });
    }

    let mut triplets = Vec::with_capacity(mesh.faces().len() * 9);
    let mut diagonal = vec![0.0; n];
    let mut mass = vec![0.0; n];
    let p = mesh.vertices();
    for (f, face) in mesh.faces().iter().enumerate() {
        for corner in 0..3 {
            let i = face[corner];
            let j = face[(corner + 1) % 3];
            let k = face[(corner + 2) % 3];
            // angle at i is opposite edge jk
            let w = 0.5 * clamped_cot(sub3(p[j], p[i]), sub3(p[k], p[i]));
            triplets.push((j, k, -w));
            triplets.push((k, j, -w));
            diagonal[j] += w;
            diagonal[k] += w;
            mass[i] += areas[f] / 3.0;
        }
    }
    triplets.extend(diagonal.iter().enumerate().map(|(i, &d)| (i, i, d)));
    Ok(LaplacianPair {
        stiffness: CsrMatrix::from_triplets(n, n, triplets),
        mass,
    })
}

#[derive(Copy, Clone, PartialEq)]
struct QueueEntry {
    dist: f64,
    vertex: usize,
}

impl Eq for QueueEntry {}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Edge graph of a mesh weighted by Euclidean edge length.
#[derive(Clone, Debug)]
pub struct EdgeGraph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    lengths: Vec<f64>,
}

impl EdgeGraph {
    pub fn new(mesh: &TriangleMesh) -> Self {
        let n = mesh.n();
        let edges = mesh.edges();
        let mut degree = vec![0usize; n];
        for &(a, b) in &edges {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0usize; offsets[n]];
        let mut lengths = vec![0.0; offsets[n]];
        let p = mesh.vertices();
        for &(a, b) in &edges {
            let len = norm3(sub3(p[a], p[b]));
            targets[fill[a]] = b;
            lengths[fill[a]] = len;
            fill[a] += 1;
            targets[fill[b]] = a;
            lengths[fill[b]] = len;
            fill[b] += 1;
        }
        Self {
            offsets,
            targets,
            lengths,
        }
    }

    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Dijkstra distances from `source`; unreachable vertices get `f64::INFINITY`.
    pub fn distances_from(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.n()];
        dist[source] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(QueueEntry { dist: 0.0, vertex: source });
        while let Some(QueueEntry { dist: d, vertex: v }) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for e in self.offsets[v]..self.offsets[v + 1] {
                let w = self.targets[e];
                let nd = d + self.lengths[e];
                if nd < dist[w] {
                    dist[w] = nd;
                    heap.push(QueueEntry { dist: nd, vertex: w });
                }
            }
        }
        dist
    }
}

/// Single-source shortest-path distances over the mesh edge graph.
///
/// Fails with [`Error::DisconnectedMesh`] when some vertex cannot be reached;
/// use [`EdgeGraph::distances_from`] to get the partial field instead.
pub fn geodesic_distances(mesh: &TriangleMesh, source: usize) -> Result<Vec<f64>> {
    if source >= mesh.n() {
        return Err(Error::InvalidParameter(format!(
            "source vertex {source} out of range for {} vertices",
            mesh.n()
        )));
    }
    let dist = EdgeGraph::new(mesh).distances_from(source);
    let unreachable = dist.iter().filter(|d| d.is_infinite()).count();
    if unreachable > 0 {
        return Err(Error::DisconnectedMesh {
            source_vertex: source,
            unreachable,
        });
    }
    Ok(dist)
}
