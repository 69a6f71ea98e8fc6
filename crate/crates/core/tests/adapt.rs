use fmapkit_core::adapt::{adapt_prepared, AdaptOptions, PreparedPair};
use fmapkit_core::fmap::{solve_fmap, LossWeights, SolverParams};
use fmapkit_core::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GAMMA_STAR: f64 = 0.3;
const LAMBDA_STAR: f64 = 100.0;

fn spectrum(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    (0..k).map(|i| if i == 0 { 0.0 } else { (i as f64).powf(1.1) * (1.0 + 0.03 * rng.random_range(-1.0..1.0)) }).collect()
}

/// Pair whose coupling targets are the solver output at (λ*, γ*).
fn planted_pair(seed: u64, k: usize, c: usize) -> PreparedPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a_x = Mat::from_fn(k, c, |_, _| rng.random_range(-3.0..3.0));
    let mix = Mat::from_fn(k, k, |i, j| if i == j { 1.0 } else { 0.3 * rng.random_range(-1.0..1.0) });
    let a_y = mix.matmul(&a_x);
    let lambda_x = spectrum(&mut rng, k);
    let lambda_y = spectrum(&mut rng, k);
    let star = SolverParams::new(LAMBDA_STAR, GAMMA_STAR).unwrap();
    let c_xy = solve_fmap(&a_x, &a_y, &star.mask(&lambda_x, &lambda_y).unwrap(), LAMBDA_STAR).unwrap();
    let c_yx = solve_fmap(&a_y, &a_x, &star.mask(&lambda_y, &lambda_x).unwrap(), LAMBDA_STAR).unwrap();
    PreparedPair {
        a_x,
        a_y,
        lambda_x,
        lambda_y,
        c_pi_xy: c_xy.into_matrix(),
        c_pi_yx: c_yx.into_matrix(),
        contrast_x: 0.0,
        contrast_y: 0.0,
    }
}

#[test]
fn planted_gamma_is_recovered() {
    let pairs = [planted_pair(1, 8, 12), planted_pair(2, 8, 12)];
    let mut p0 = SolverParams::default();
    p0.weights = LossWeights { bij: 0.0, orth: 0.0, couple: 1.0, contrast: 0.0 };
    let options = AdaptOptions { steps: 200, ..AdaptOptions::default() };
    let out = adapt_prepared(&pairs, &p0, &options).unwrap();
    let last = out.trace.last().unwrap();
    eprintln!("steps {} lambda {} gamma {} loss {} -> {} stalled {}", out.trace.len(), last.lambda, last.gamma, out.trace[0].report.total, last.report.total, out.stalled);
    assert!((out.params.gamma() - GAMMA_STAR).abs() < 0.15);
}
