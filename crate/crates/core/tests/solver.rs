#![allow(clippy::needless_range_loop)]

mod common;

use fmapkit_core::adapt::PreparedPair;
use fmapkit_core::fmap::{
    fmap_param_gradients, mask_resolvent, mask_resolvent_gamma_derivative, mask_standard, solve_fmap, LossWeights, MaskKind,
    MaskMatrix, SolverParams,
};
use fmapkit_core::Mat;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn objective(c: &Mat, a_x: &Mat, a_y: &Mat, mask: &Mat, lambda: f64) -> f64 {
    let data = (&c.matmul(a_x) - a_y).frobenius_norm_sq();
    let reg: f64 = c.as_slice().iter().zip(mask.as_slice()).map(|(c, m)| m * c * c).sum();
    data + lambda * reg
}

/// Solves the full normal system of the vectorized problem:
/// `vec(C A_X) = (A_Xᵀ ⊗ I) vec(C)` with column-major `vec`.
fn vectorized_oracle(a_x: &Mat, a_y: &Mat, mask: &Mat, lambda: f64) -> Mat {
    let (k_x, c) = a_x.shape();
    let k_y = a_y.rows();
    let kron = DMatrix::from_fn(c * k_y, k_x * k_y, |r, s| {
        let (col_a, row_i) = (r / k_y, r % k_y);
        let (col_c, row_c) = (s / k_y, s % k_y);
        if row_i == row_c {
            a_x[(col_c, col_a)]
        } else {
            0.0
        }
    });
    let target = DMatrix::from_fn(c * k_y, 1, |r, _| a_y[(r % k_y, r / k_y)]);
    let d = DMatrix::from_fn(k_x * k_y, k_x * k_y, |r, s| if r == s { lambda * mask[(r % k_y, r / k_y)] } else { 0.0 });
    let lhs = kron.transpose() * &kron + d;
    let rhs = kron.transpose() * target;
    let x = lhs.lu().solve(&rhs).unwrap();
    Mat::from_fn(k_y, k_x, |i, j| x[(j * k_y + i, 0)])
}

fn random_spectrum(rng: &mut rand_chacha::ChaCha8Rng, k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k).map(|i| if i == 0 { 0.0 } else { rng.random_range(0.1..20.0) }).collect();
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn hand_example_three_by_five() {
    let mut rng = common::rng(7);
    let a_x = common::random_mat(&mut rng, 3, 5);
    let a_y = common::random_mat(&mut rng, 3, 5);
    let mask = Mat::from_fn(3, 3, |_, _| rng.random_range(0.0..1.0));
    let c = solve_fmap(&a_x, &a_y, &MaskMatrix::new(mask.clone()).unwrap(), 2.0).unwrap();
    let oracle = vectorized_oracle(&a_x, &a_y, &mask, 2.0);
    assert!((c.matrix() - &oracle).frobenius_norm() < 1e-9);
}

#[test]
fn row_solve_matches_vectorized_oracle() {
    let mut rng = common::rng(11);
    for _ in 0..50 {
        let k_x = rng.random_range(1..=5);
        let k_y = rng.random_range(1..=5);
        let c = rng.random_range(k_x..=k_x + 4);
        let a_x = common::random_mat(&mut rng, k_x, c);
        let a_y = common::random_mat(&mut rng, k_y, c);
        let lx = random_spectrum(&mut rng, k_x);
        let ly = random_spectrum(&mut rng, k_y);
        let gamma = rng.random_range(0.05..1.0);
        let lambda = rng.random_range(0.0..50.0);
        let mask = mask_resolvent(&lx, &ly, gamma).unwrap();
        let ours = solve_fmap(&a_x, &a_y, &mask, lambda).unwrap();
        let oracle = vectorized_oracle(&a_x, &a_y, mask.entries(), lambda);
        assert!((ours.matrix() - &oracle).frobenius_norm() < 1e-9);
    }
}

#[test]
fn solution_is_a_minimizer() {
    let mut rng = common::rng(3);
    let (k, c) = (5, 8);
    let a_x = common::random_mat(&mut rng, k, c);
    let a_y = common::random_mat(&mut rng, k, c);
    let mask = mask_standard(&random_spectrum(&mut rng, k), &random_spectrum(&mut rng, k)).unwrap();
    let sol = solve_fmap(&a_x, &a_y, &mask, 0.7).unwrap();
    let best = objective(sol.matrix(), &a_x, &a_y, mask.entries(), 0.7);
    for _ in 0..100 {
        let d = common::random_mat(&mut rng, k, k);
        let moved = sol.matrix() + &d.scaled(1e-4 / d.frobenius_norm());
        assert!(objective(&moved, &a_x, &a_y, mask.entries(), 0.7) >= best);
    }
}

#[test]
fn tiny_lambda_matches_unregularized() {
    let mut rng = common::rng(5);
    let a_x = common::random_mat(&mut rng, 4, 9);
    let a_y = common::random_mat(&mut rng, 4, 9);
    let mask = mask_resolvent(&random_spectrum(&mut rng, 4), &random_spectrum(&mut rng, 4), 0.5).unwrap();
    let zero = solve_fmap(&a_x, &a_y, &mask, 0.0).unwrap();
    let tiny = solve_fmap(&a_x, &a_y, &mask, 1e-12).unwrap();
    assert!((zero.matrix() - tiny.matrix()).frobenius_norm() < 1e-6);
}

fn central_difference(f: impl Fn([f64; 2]) -> f64, u: [f64; 2], i: usize) -> f64 {
    let h = 1e-5;
    let mut up = u;
    let mut dn = u;
    up[i] += h;
    dn[i] -= h;
    (f(up) - f(dn)) / (2.0 * h)
}

fn close(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= 1e-4 * numeric.abs().max(analytic.abs()).max(1e-6)
}

#[test]
fn single_map_gradient_matches_finite_differences() {
    let mut rng = common::rng(21);
    let (k, c) = (3, 4);
    let a_x = common::random_mat(&mut rng, k, c);
    let a_y = common::random_mat(&mut rng, k, c);
    let lx = random_spectrum(&mut rng, k);
    let ly = random_spectrum(&mut rng, k);
    let target = common::random_mat(&mut rng, k, k);
    let params = SolverParams::new(1.5, 0.35).unwrap();
    let loss = |u: [f64; 2]| {
        let p = params.with_unconstrained(u);
        let sol = solve_fmap(&a_x, &a_y, &p.mask(&lx, &ly).unwrap(), p.lambda()).unwrap();
        (sol.matrix() - &target).frobenius_norm_sq()
    };
    let sol = solve_fmap(&a_x, &a_y, &params.mask(&lx, &ly).unwrap(), params.lambda()).unwrap();
    let upstream = (sol.matrix() - &target).scaled(2.0);
    let g = fmap_param_gradients(&sol, &a_x, &a_y, &lx, &ly, &params, &upstream).unwrap().as_array();
    for i in 0..2 {
        let fd = central_difference(loss, params.unconstrained(), i);
        assert!(close(g[i], fd), "{i}: {} vs {fd}", g[i]);
    }
}

#[test]
fn total_loss_gradient_matches_finite_differences() {
    let mut rng = common::rng(99);
    for _ in 0..20 {
        let k = rng.random_range(2..=5);
        let c = k + rng.random_range(0..4);
        let pair = PreparedPair {
            a_x: common::random_mat(&mut rng, k, c),
            a_y: common::random_mat(&mut rng, k, c),
            lambda_x: random_spectrum(&mut rng, k),
            lambda_y: random_spectrum(&mut rng, k),
            c_pi_xy: common::random_mat(&mut rng, k, k),
            c_pi_yx: common::random_mat(&mut rng, k, k),
            contrast_x: 0.3,
            contrast_y: 0.1,
        };
        let mut params = SolverParams::new(rng.random_range(0.1..10.0), rng.random_range(0.1..0.9)).unwrap();
        params.weights = LossWeights::default();
        let (_, g) = pair.evaluate(&params, true).unwrap();
        let g = g.unwrap().as_array();
        let f = |u: [f64; 2]| pair.evaluate(&params.with_unconstrained(u), false).unwrap().0.total;
        for i in 0..2 {
            let fd = central_difference(f, params.unconstrained(), i);
            assert!(close(g[i], fd), "{i}: {} vs {fd}", g[i]);
        }
    }
}

#[test]
fn standard_mask_has_no_gamma_gradient() {
    let mut rng = common::rng(4);
    let a_x = common::random_mat(&mut rng, 3, 5);
    let a_y = common::random_mat(&mut rng, 3, 5);
    let lx = random_spectrum(&mut rng, 3);
    let ly = random_spectrum(&mut rng, 3);
    let mut params = SolverParams::new(2.0, 0.5).unwrap();
    params.mask_kind = MaskKind::StandardLaplacian;
    let sol = solve_fmap(&a_x, &a_y, &params.mask(&lx, &ly).unwrap(), 2.0).unwrap();
    let g = fmap_param_gradients(&sol, &a_x, &a_y, &lx, &ly, &params, &Mat::identity(3)).unwrap();
    assert_eq!(g.d_gamma_logit, 0.0);
    assert!(g.d_log_lambda != 0.0);
}

#[test]
fn mask_gamma_derivative_matches_finite_differences() {
    let lx = [0.0, 0.3, 2.0, 7.5];
    let ly = [0.0, 0.5, 1.0, 9.0];
    for gamma in [0.2, 0.5, 0.8] {
        let d = mask_resolvent_gamma_derivative(&lx, &ly, gamma).unwrap();
        let h = 1e-6;
        let up = mask_resolvent(&lx, &ly, gamma + h).unwrap();
        let dn = mask_resolvent(&lx, &ly, gamma - h).unwrap();
        let fd = (up.entries() - dn.entries()).scaled(0.5 / h);
        assert!((&d - &fd).max_abs() < 1e-7);
    }
}

#[test]
fn resolvent_funnel_structure() {
    let mut rng = common::rng(8);
    let k: usize = 30;
    let lx: Vec<f64> = (0..k).map(|i| i as f64 * 1.7).collect();
    let ly: Vec<f64> = lx.iter().map(|l| l * (1.0 + 0.01 * rng.random_range(-1.0..1.0))).collect();
    for gamma in [0.25, 0.5, 1.0] {
        let m = mask_resolvent(&lx, &ly, gamma).unwrap();
        let (mut band, mut nb, mut rest, mut nr) = (0.0, 0, 0.0, 0);
        for i in 0..k {
            for j in 0..k {
                if i.abs_diff(j) <= 1 {
                    band += m.entries()[(i, j)];
                    nb += 1;
                } else {
                    rest += m.entries()[(i, j)];
                    nr += 1;
                }
            }
        }
        assert!(band / (nb as f64) < 0.5 * rest / nr as f64, "gamma {gamma}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn masks_vanish_exactly_on_equal_eigenvalues(
        a in 0.0..1e3f64,
        b in 0.0..1e3f64,
        equal in any::<bool>(),
        gamma in 0.01..=1.0f64,
    ) {
        let b = if equal { a } else { b };
        let r = mask_resolvent(&[a], &[b], gamma).unwrap().entries()[(0, 0)];
        let s = mask_standard(&[a], &[b]).unwrap().entries()[(0, 0)];
        prop_assert!((0.0..=1.25).contains(&r));
        prop_assert_eq!(r == 0.0, a == b);
        prop_assert_eq!(s == 0.0, a == b);
    }
}
