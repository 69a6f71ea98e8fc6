//! TOML configuration. Every field is optional; omitted fields take the
//! defaults of the solver and loss modules.

use std::path::Path;

use fmapkit_core::adapt::{AdaptOptions, Optimizer};
use fmapkit_core::descriptors::{self, FeatureMatrix, DEFAULT_WKS_ENERGIES, DEFAULT_WKS_VARIANCE};
use fmapkit_core::eval::{DEFAULT_PCK_MAX, DEFAULT_PCK_POINTS};
use fmapkit_core::fmap::{LossWeights, MaskKind, SolverParams, DEFAULT_GAMMA, DEFAULT_LAMBDA, DEFAULT_TAU};
use fmapkit_core::spectral::{SpectralBasis, DEFAULT_K};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Basis size of the solver.
    pub k: usize,
    pub descriptor: DescriptorConfig,
    pub solver: SolverConfig,
    pub weights: WeightsConfig,
    pub adapt: AdaptConfig,
    pub refine: RefineConfig,
    pub eval: EvalConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            descriptor: DescriptorConfig::default(),
            solver: SolverConfig::default(),
            weights: WeightsConfig::default(),
            adapt: AdaptConfig::default(),
            refine: RefineConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptorKind {
    Wks,
    Hks,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescriptorConfig {
    pub kind: DescriptorKind,
    /// Number of energies (WKS) or times (HKS).
    pub count: usize,
    /// WKS bandwidth multiplier.
    pub variance: f64,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self {
            kind: DescriptorKind::Wks,
            count: DEFAULT_WKS_ENERGIES,
            variance: DEFAULT_WKS_VARIANCE,
        }
    }
}

impl DescriptorConfig {
    pub fn compute(&self, basis: &SpectralBasis) -> Result<FeatureMatrix> {
        Ok(match self.kind {
            DescriptorKind::Wks => descriptors::wks(basis, self.count, self.variance)?,
            DescriptorKind::Hks => descriptors::hks(basis, self.count)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MaskChoice {
    Standard,
    Resolvent,
}

impl From<MaskChoice> for MaskKind {
    fn from(m: MaskChoice) -> Self {
        match m {
            MaskChoice::Standard => MaskKind::StandardLaplacian,
            MaskChoice::Resolvent => MaskKind::Resolvent,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub mask: MaskChoice,
    pub lambda: f64,
    pub gamma: f64,
    pub tau: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mask: MaskChoice::Resolvent,
            lambda: DEFAULT_LAMBDA,
            gamma: DEFAULT_GAMMA,
            tau: DEFAULT_TAU,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsConfig {
    pub bij: f64,
    pub orth: f64,
    pub couple: f64,
    pub contrast: f64,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        let w = LossWeights::default();
        Self {
            bij: w.bij,
            orth: w.orth,
            couple: w.couple,
            contrast: w.contrast,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerChoice {
    Gd,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptConfig {
    pub steps: usize,
    pub step_size: f64,
    pub optimizer: OptimizerChoice,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        let d = AdaptOptions::default();
        Self {
            steps: d.steps,
            step_size: d.step_size,
            optimizer: OptimizerChoice::Gd,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    pub enabled: bool,
    /// Final basis size of the upsampling loop.
    pub k_end: usize,
    pub step: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            k_end: 50,
            step: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub pck_points: usize,
    pub pck_max: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            pck_points: DEFAULT_PCK_POINTS,
            pck_max: DEFAULT_PCK_MAX,
        }
    }
}

impl EvalConfig {
    pub fn thresholds(&self) -> Vec<f64> {
        if self.pck_points == 1 {
            return vec![self.pck_max];
        }
        (0..self.pck_points)
            .map(|i| self.pck_max * i as f64 / (self.pck_points - 1) as f64)
            .collect()
    }
}

impl Config {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.k < 2 {
            return fail("k must be at least 2");
        }
        if self.descriptor.count == 0 {
            return fail("descriptor.count must be positive");
        }
        if !(self.descriptor.variance > 0.0) {
            return fail("descriptor.variance must be positive");
        }
        if self.refine.enabled && (self.refine.k_end < self.k || self.refine.step == 0) {
            return fail("refine.k_end must be at least k and refine.step positive");
        }
        if self.eval.pck_points == 0 || !(self.eval.pck_max > 0.0 && self.eval.pck_max.is_finite()) {
            return fail("eval.pck_points and eval.pck_max must be positive");
        }
        if !(self.adapt.step_size > 0.0) {
            return fail("adapt.step_size must be positive");
        }
        self.solver_params()?;
        Ok(())
    }

    /// Largest basis size any stage needs.
    pub fn basis_k(&self) -> usize {
        if self.refine.enabled {
            self.k.max(self.refine.k_end)
        } else {
            self.k
        }
    }

    pub fn solver_params(&self) -> Result<SolverParams> {
        let mut p = SolverParams::new(self.solver.lambda, self.solver.gamma).map_err(|e| Error::Config(e.to_string()))?;
        p.k = self.k;
        p.tau = self.solver.tau;
        p.mask_kind = self.solver.mask.into();
        p.weights = LossWeights {
            bij: self.weights.bij,
            orth: self.weights.orth,
            couple: self.weights.couple,
            contrast: self.weights.contrast,
        };
        p.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(p)
    }

    pub fn adapt_options(&self) -> AdaptOptions {
        AdaptOptions {
            steps: self.adapt.steps,
            step_size: self.adapt.step_size,
            optimizer: match self.adapt.optimizer {
                OptimizerChoice::Gd => Optimizer::GradientDescent,
                OptimizerChoice::Adam => Optimizer::adam(),
            },
            ..AdaptOptions::default()
        }
    }
}
