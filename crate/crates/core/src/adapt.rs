//! Self-adaptive choice of the solver parameters `(λ, γ)`.
//!
//! The features are fixed; only `λ` and `γ` move. The objective is the mean
//! total loss over a collection of shape pairs, where each pair is solved in
//! both directions (`C_XY` and `C_YX`) with one shared `(λ, γ)`. The coupling
//! term compares each solved map with the map induced by the soft feature
//! correspondence in the same direction and sums both directions.
//!
//! The default optimizer is gradient descent in `(ln λ, logit γ)` with
//! Armijo backtracking, which makes every accepted step strictly decrease the
//! objective. Adam is available with the same acceptance rule.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::conversion::soft_pointmap_fmap;
use crate::descriptors::FeatureMatrix;
use crate::fmap::{fmap_param_gradients, solve_fmap, ParamGradient, SolverParams};
use crate::linalg::Mat;
use crate::losses::{bijectivity, bijectivity_gradient, coupling, loss_contrastive, orthogonality, orthogonality_gradient, LossReport};
use crate::spectral::SpectralBasis;
use crate::{Error, Result};

/// Per-pair quantities that stay fixed while `(λ, γ)` change.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedPair {
    pub a_x: Mat,
    pub a_y: Mat,
    pub lambda_x: Vec<f64>,
    pub lambda_y: Vec<f64>,
    /// Map induced by the soft Y → X feature correspondence (`k × k`).
    pub c_pi_xy: Mat,
    /// Map induced by the soft X → Y feature correspondence.
    pub c_pi_yx: Mat,
    pub contrast_x: f64,
    pub contrast_y: f64,
}

impl PreparedPair {
    /// Coefficients, spectra and coupling targets of one pair at basis size
    /// `k` and temperature `tau`.
    pub fn from_features(
        f_x: &FeatureMatrix,
        f_y: &FeatureMatrix,
        basis_x: &SpectralBasis,
        basis_y: &SpectralBasis,
        k: usize,
        tau: f64,
    ) -> Result<Self> {
        let bx = basis_x.truncated(k)?;
        let by = basis_y.truncated(k)?;
        let c_pi_xy = soft_pointmap_fmap(f_x.features(), f_y.features(), &bx, &by, tau)?;
        let c_pi_yx = soft_pointmap_fmap(f_y.features(), f_x.features(), &by, &bx, tau)?;
        Ok(Self {
            a_x: f_x.coefficients_truncated(k)?,
            a_y: f_y.coefficients_truncated(k)?,
            lambda_x: bx.lambda().to_vec(),
            lambda_y: by.lambda().to_vec(),
            c_pi_xy,
            c_pi_yx,
            contrast_x: loss_contrastive(f_x, &bx, tau)?,
            contrast_y: loss_contrastive(f_y, &by, tau)?,
        })
    }

    /// Loss breakdown of this pair at `params`, with the parameter gradient
    /// of the weighted total when `with_gradient` is set.
    pub fn evaluate(&self, params: &SolverParams, with_gradient: bool) -> Result<(LossReport, Option<ParamGradient>)> {
        let lambda = params.lambda();
        let mask_xy = params.mask(&self.lambda_x, &self.lambda_y)?;
        let mask_yx = params.mask(&self.lambda_y, &self.lambda_x)?;
        let c_xy = solve_fmap(&self.a_x, &self.a_y, &mask_xy, lambda)?;
        let c_yx = solve_fmap(&self.a_y, &self.a_x, &mask_yx, lambda)?;
        let (a, b) = (c_xy.matrix(), c_yx.matrix());

        let bij = bijectivity(a, b)?;
        let orth = orthogonality(a, b)?;
        let couple = coupling(a, &self.c_pi_xy)? + coupling(b, &self.c_pi_yx)?;
        let w = &params.weights;
        let report = LossReport::new(bij, orth, couple, self.contrast_x, self.contrast_y, w);
        if !with_gradient {
            return Ok((report, None));
        }

        let (ga, gb) = bijectivity_gradient(a, b);
        let up_xy = &(&ga.scaled(w.bij) + &orthogonality_gradient(a).scaled(w.orth)) + &(a - &self.c_pi_xy).scaled(2.0 * w.couple);
        let up_yx = &(&gb.scaled(w.bij) + &orthogonality_gradient(b).scaled(w.orth)) + &(b - &self.c_pi_yx).scaled(2.0 * w.couple);
        let g_xy = fmap_param_gradients(&c_xy, &self.a_x, &self.a_y, &self.lambda_x, &self.lambda_y, params, &up_xy)?;
        let g_yx = fmap_param_gradients(&c_yx, &self.a_y, &self.a_x, &self.lambda_y, &self.lambda_x, params, &up_yx)?;
        Ok((report, Some(g_xy + g_yx)))
    }
}

/// Mean loss report and mean gradient over a collection.
pub fn evaluate_collection(pairs: &[PreparedPair], params: &SolverParams, with_gradient: bool) -> Result<(LossReport, Option<ParamGradient>)> {
    if pairs.is_empty() {
        return Err(Error::InvalidParameter("adaptation needs at least one pair".into()));
    }
    let mut reports = Vec::with_capacity(pairs.len());
    let mut grad = ParamGradient::default();
    for pair in pairs {
        let (r, g) = pair.evaluate(params, with_gradient)?;
        reports.push(r);
        if let Some(g) = g {
            grad = grad + g;
        }
    }
    let scale = 1.0 / pairs.len() as f64;
    let grad = with_gradient.then_some(ParamGradient {
        d_log_lambda: grad.d_log_lambda * scale,
        d_gamma_logit: grad.d_gamma_logit * scale,
    });
    Ok((LossReport::mean(&reports), grad))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Optimizer {
    GradientDescent,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptOptions {
    pub steps: usize,
    /// Initial trial step of every line search (the learning rate for Adam).
    pub step_size: f64,
    pub optimizer: Optimizer,
    pub armijo: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
}

impl Default for AdaptOptions {
    fn default() -> Self {
        Self {
            steps: 50,
            step_size: 1.0,
            optimizer: Optimizer::GradientDescent,
            armijo: 1e-4,
            shrink: 0.5,
            max_backtracks: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceEntry {
    pub step: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub report: LossReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptOutcome {
    pub params: SolverParams,
    /// Initial evaluation followed by one entry per accepted step.
    pub trace: Vec<TraceEntry>,
    /// Set when the line search found no decrease before `steps` ran out.
    pub stalled: bool,
}

fn entry(step: usize, params: &SolverParams, report: LossReport) -> TraceEntry {
    TraceEntry {
        step,
        lambda: params.lambda(),
        gamma: params.gamma(),
        report,
    }
}

/// Optimizes `(λ, γ)` on precomputed pairs.
pub fn adapt_prepared(pairs: &[PreparedPair], params0: &SolverParams, options: &AdaptOptions) -> Result<AdaptOutcome> {
    params0.validate()?;
    if !(options.step_size > 0.0) || !(options.shrink > 0.0 && options.shrink < 1.0) {
        return Err(Error::InvalidParameter("step size must be positive and shrink factor in (0, 1)".into()));
    }
    let mut outcome = AdaptOutcome {
        params: params0.clone(),
        trace: Vec::new(),
        stalled: false,
    };
    let (report, grad) = evaluate_collection(pairs, params0, true)?;
    let mut grad = grad.expect("gradient requested").as_array();
    if !report.total.is_finite() || !grad.iter().all(|g| g.is_finite()) {
        return Err(Error::NonFiniteLoss {
            step: 0,
            last_good: Box::new(outcome),
        });
    }
    outcome.trace.push(entry(0, params0, report));
    let mut loss = report.total;
    let mut u = params0.unconstrained();
    let mut moments = ([0.0; 2], [0.0; 2]);

    for step in 1..=options.steps {
        let direction = match options.optimizer {
            Optimizer::GradientDescent => [-grad[0], -grad[1]],
            Optimizer::Adam { beta1, beta2, epsilon } => {
                let (m, v) = &mut moments;
                let mut d = [0.0; 2];
                for i in 0..2 {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
                    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    let m_hat = m[i] / (1.0 - libm::pow(beta1, step as f64));
                    let v_hat = v[i] / (1.0 - libm::pow(beta2, step as f64));
                    d[i] = -m_hat / (libm::sqrt(v_hat) + epsilon);
                }
                // fall back to steepest descent when the moment direction is not a descent direction
                if d[0] * grad[0] + d[1] * grad[1] < 0.0 {
                    d
                } else {
                    [-grad[0], -grad[1]]
                }
            }
        };
        let slope = direction[0] * grad[0] + direction[1] * grad[1];
        if !(slope < 0.0) {
            outcome.stalled = true;
            break;
        }

        let mut t = options.step_size;
        let mut accepted = None;
        for _ in 0..=options.max_backtracks {
            let trial_u = [u[0] + t * direction[0], u[1] + t * direction[1]];
            let trial = params0.with_unconstrained(trial_u);
            match evaluate_collection(pairs, &trial, false) {
                Ok((r, _)) if r.total.is_finite() && r.total < loss && r.total <= loss + options.armijo * t * slope => {
                    accepted = Some((trial_u, trial));
                    break;
                }
                Ok(_) => {}
                Err(e) if e.is_numerical() => {}
                Err(e) => return Err(e),
            }
            t *= options.shrink;
        }
        let Some((new_u, new_params)) = accepted else {
            outcome.stalled = true;
            break;
        };

        let (report, g) = evaluate_collection(pairs, &new_params, true)?;
        let g = g.expect("gradient requested").as_array();
        if !report.total.is_finite() || !g.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteLoss {
                step,
                last_good: Box::new(outcome),
            });
        }
        u = new_u;
        loss = report.total;
        grad = g;
        outcome.params = new_params;
        outcome.trace.push(entry(step, &outcome.params, report));
    }
    Ok(outcome)
}

/// Gradient descent with backtracking on the mean total loss of `pairs`,
/// each given as `(F_X, F_Y, basis_X, basis_Y)`.
///
/// Uses `params0.k` eigenfunctions and temperature `params0.tau`.
pub fn adapt_params(
    pairs: &[(FeatureMatrix, FeatureMatrix, SpectralBasis, SpectralBasis)],
    params0: &SolverParams,
    steps: usize,
    step_size: f64,
) -> Result<AdaptOutcome> {
    let prepared = pairs
        .iter()
        .map(|(fx, fy, bx, by)| PreparedPair::from_features(fx, fy, bx, by, params0.k, params0.tau))
        .collect::<Result<Vec<_>>>()?;
    let options = AdaptOptions {
        steps,
        step_size,
        ..AdaptOptions::default()
    };
    adapt_prepared(&prepared, params0, &options)
}
