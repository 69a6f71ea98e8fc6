//! Exact nearest-neighbor search between row sets.
//!
//! Ties resolve to the smallest reference index on every backend, so both
//! backends return identical results.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::linalg::{squared_distance, Mat};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NnBackend {
    /// Exhaustive scan.
    #[default]
    BruteForce,
    /// k-d tree with exact backtracking.
    KdTree,
}

/// For every row of `query`, the index of the nearest row of `reference`
/// in squared Euclidean distance.
pub fn nearest_rows(query: &Mat, reference: &Mat, backend: NnBackend) -> Vec<usize> {
    assert_eq!(query.cols(), reference.cols(), "nearest_rows: dimension mismatch");
    assert!(reference.rows() > 0, "nearest_rows: empty reference set");
    match backend {
        NnBackend::BruteForce => (0..query.rows()).map(|q| brute_force(query.row(q), reference)).collect(),
        NnBackend::KdTree => {
            let tree = KdTree::build(reference);
            (0..query.rows()).map(|q| tree.nearest(query.row(q))).collect()
        }
    }
}

fn brute_force(q: &[f64], reference: &Mat) -> usize {
    let mut best = (f64::INFINITY, 0usize);
    for r in 0..reference.rows() {
        let d = squared_distance(q, reference.row(r));
        if d < best.0 {
            best = (d, r);
        }
    }
    best.1
}

const LEAF_SIZE: usize = 8;

enum Node {
    Leaf(Vec<usize>),
    Split {
        dim: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

pub struct KdTree<'a> {
    points: &'a Mat,
    root: Node,
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a Mat) -> Self {
        let indices: Vec<usize> = (0..points.rows()).collect();
        let root = Self::build_node(points, indices);
        Self { points, root }
    }

    fn build_node(points: &Mat, mut indices: Vec<usize>) -> Node {
        if indices.len() <= LEAF_SIZE {
            indices.sort_unstable();
            return Node::Leaf(indices);
        }
        let dims = points.cols();
        let spread = |d: usize| {
            let (lo, hi) = indices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = points[(i, d)];
                (lo.min(v), hi.max(v))
            });
            hi - lo
        };
        let dim = (0..dims)
            .max_by(|&a, &b| spread(a).total_cmp(&spread(b)).then(b.cmp(&a)))
            .unwrap_or(0);
        if spread(dim) == 0.0 {
            indices.sort_unstable();
            return Node::Leaf(indices);
        }
        let mid = indices.len() / 2;
        indices.select_nth_unstable_by(mid, |&a, &b| points[(a, dim)].total_cmp(&points[(b, dim)]));
        let value = points[(indices[mid], dim)];
        let right = indices.split_off(mid);
        Node::Split {
            dim,
            value,
            left: Box::new(Self::build_node(points, indices)),
            right: Box::new(Self::build_node(points, right)),
        }
    }

    pub fn nearest(&self, q: &[f64]) -> usize {
        let mut best = (f64::INFINITY, usize::MAX);
        self.search(&self.root, q, &mut best);
        best.1
    }

    fn search(&self, node: &Node, q: &[f64], best: &mut (f64, usize)) {
        match node {
            Node::Leaf(indices) => {
                for &i in indices {
                    let d = squared_distance(q, self.points.row(i));
                    if d < best.0 || (d == best.0 && i < best.1) {
                        *best = (d, i);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                // left holds coordinates ≤ value, right holds coordinates ≥ value
                let (near, far) = if q[*dim] < *value { (left, right) } else { (right, left) };
                self.search(near, q, best);
                let gap = q[*dim] - value;
                if gap * gap <= best.0 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kd_tree_matches_brute_force_with_duplicates() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // coarse coordinates force many exact ties
        let reference = Mat::from_fn(300, 3, |_, _| rng.random_range(0..4) as f64);
        let query = Mat::from_fn(200, 3, |_, _| rng.random_range(0..8) as f64 * 0.5);
        assert_eq!(
            nearest_rows(&query, &reference, NnBackend::BruteForce),
            nearest_rows(&query, &reference, NnBackend::KdTree)
        );
    }

    #[test]
    fn ties_pick_smallest_index() {
        let reference = Mat::from_vec(3, 1, alloc::vec![1.0, -1.0, 1.0]);
        let query = Mat::from_vec(1, 1, alloc::vec![0.0]);
        assert_eq!(nearest_rows(&query, &reference, NnBackend::BruteForce), alloc::vec![0]);
        assert_eq!(nearest_rows(&query, &reference, NnBackend::KdTree), alloc::vec![0]);
    }
}
