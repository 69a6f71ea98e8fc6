//! Geodesic error, PCK curves and AUC.
//!
//! Errors are edge-graph geodesic distances on X between predicted and
//! ground-truth targets, divided by `sqrt(total area of X)`. Vertices whose
//! prediction cannot reach the ground truth (disconnected meshes) are left
//! out of the mean and the curve and listed separately.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::conversion::PointMap;
use crate::mesh::{EdgeGraph, TriangleMesh};
use crate::{Error, Result};

pub const DEFAULT_PCK_POINTS: usize = 200;
pub const DEFAULT_PCK_MAX: f64 = 0.2;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    /// Normalized error per Y vertex; `INFINITY` where unreachable.
    pub per_vertex_error: Vec<f64>,
    pub mean_error: f64,
    /// `(threshold, fraction of vertices with error ≤ threshold)`.
    pub pck: Vec<(f64, f64)>,
    pub auc: f64,
    pub unreachable: Vec<usize>,
}

/// `DEFAULT_PCK_POINTS` thresholds evenly spaced over `[0, DEFAULT_PCK_MAX]`.
pub fn default_thresholds() -> Vec<f64> {
    (0..DEFAULT_PCK_POINTS)
        .map(|i| DEFAULT_PCK_MAX * i as f64 / (DEFAULT_PCK_POINTS - 1) as f64)
        .collect()
}

/// Scores a hard Y → X map against the ground-truth Y → X correspondence.
pub fn evaluate(predicted: &PointMap, ground_truth: &[usize], mesh_x: &TriangleMesh, thresholds: &[f64]) -> Result<EvalResult> {
    let Some(pred) = predicted.as_hard() else {
        return Err(Error::InvalidParameter("evaluation needs a hard point map".into()));
    };
    evaluate_indices(pred, ground_truth, mesh_x, thresholds)
}

/// [`evaluate`] on plain index arrays.
pub fn evaluate_indices(pred: &[usize], ground_truth: &[usize], mesh_x: &TriangleMesh, thresholds: &[f64]) -> Result<EvalResult> {
    if pred.len() != ground_truth.len() {
        return Err(Error::LengthMismatch {
            predicted: pred.len(),
            ground_truth: ground_truth.len(),
        });
    }
    let n_x = mesh_x.n();
    if let Some(&bad) = pred.iter().chain(ground_truth).find(|&&t| t >= n_x) {
        return Err(Error::InvalidParameter(alloc::format!("target {bad} out of range for {n_x} vertices")));
    }
    check_thresholds(thresholds)?;

    let scale = libm::sqrt(mesh_x.total_area());
    let graph = EdgeGraph::new(mesh_x);
    let mut fields: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut errors = Vec::with_capacity(pred.len());
    let mut unreachable = Vec::new();
    for (y, (&p, &g)) in pred.iter().zip(ground_truth).enumerate() {
        if p == g {
            errors.push(0.0);
            continue;
        }
        let field = fields.entry(g).or_insert_with(|| graph.distances_from(g));
        let d = field[p];
        if d.is_finite() {
            errors.push(d / scale);
        } else {
            errors.push(f64::INFINITY);
            unreachable.push(y);
        }
    }
    Ok(summarize(errors, unreachable, thresholds))
}

fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::InvalidParameter("no PCK thresholds".into()));
    }
    if thresholds.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::InvalidParameter("PCK thresholds must be finite and non-negative".into()));
    }
    if thresholds.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("PCK thresholds must be ascending".into()));
    }
    Ok(())
}

/// Builds the mean, PCK curve and AUC from per-vertex errors (`INFINITY`
/// entries listed in `unreachable` are skipped).
pub fn summarize(per_vertex_error: Vec<f64>, unreachable: Vec<usize>, thresholds: &[f64]) -> EvalResult {
    let mut reachable: Vec<f64> = per_vertex_error.iter().copied().filter(|e| e.is_finite()).collect();
    let count = reachable.len();
    let mean_error = if count == 0 {
        f64::NAN
    } else {
        reachable.iter().sum::<f64>() / count as f64
    };
    reachable.sort_by(f64::total_cmp);
    let pck: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|&t| {
            let below = reachable.partition_point(|&e| e <= t);
            let fraction = if count == 0 { 0.0 } else { below as f64 / count as f64 };
            (t, fraction)
        })
        .collect();
    let auc = area_under_curve(&pck);
    EvalResult {
        per_vertex_error,
        mean_error,
        pck,
        auc,
        unreachable,
    }
}

/// Trapezoidal area under the curve divided by its threshold range (the
/// single value itself for a degenerate range).
pub fn area_under_curve(pck: &[(f64, f64)]) -> f64 {
    let (Some(first), Some(last)) = (pck.first(), pck.last()) else {
        return 0.0;
    };
    let range = last.0 - first.0;
    if range <= 0.0 {
        return last.1;
    }
    let area: f64 = pck.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum();
    area / range
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn perfect_map() {
        let mesh = shapes::octahedron();
        let gt: Vec<usize> = (0..6).collect();
        let r = evaluate(&PointMap::identity(6), &gt, &mesh, &default_thresholds()).unwrap();
        assert_eq!(r.mean_error, 0.0);
        assert_eq!(r.auc, 1.0);
        assert!(r.pck.iter().all(|&(_, f)| f == 1.0));
    }

    #[test]
    fn single_edge_error() {
        let mesh = shapes::grid(3, 3);
        let gt: Vec<usize> = (0..mesh.n()).collect();
        let mut pred = gt.clone();
        pred[0] = 1;
        let r = evaluate_indices(&pred, &gt, &mesh, &[0.0, 1.0]).unwrap();
        // unit area, edge length 1/3
        let e = 1.0 / 3.0;
        assert!((r.mean_error - e / mesh.n() as f64).abs() < 1e-15);
    }

    #[test]
    fn auc_of_a_ramp() {
        let pck = [(0.0, 0.0), (1.0, 1.0)];
        assert!((area_under_curve(&pck) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn input_validation() {
        let mesh = shapes::octahedron();
        assert!(matches!(
            evaluate_indices(&[0, 1], &[0], &mesh, &[0.1]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(evaluate_indices(&[0], &[0], &mesh, &[0.2, 0.1]).is_err());
        assert!(evaluate_indices(&[7], &[0], &mesh, &[0.1]).is_err());
    }
}
