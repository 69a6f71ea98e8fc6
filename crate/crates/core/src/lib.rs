//! Spectral non-rigid shape matching on triangle meshes.
//!
//! The crate is `no_std` (it needs `alloc`) and contains the whole numerical
//! pipeline:
//!
//! 1. [`mesh`]: triangle meshes, cotangent stiffness and lumped mass
//!    matrices, edge-graph geodesics.
//! 2. [`spectral`]: truncated Laplace–Beltrami eigenbases computed with a
//!    shift-invert subspace iteration.
//! 3. [`descriptors`]: heat and wave kernel signatures.
//! 4. [`fmap`]: the mask-regularized functional map solver, its parameter
//!    gradients, and [`adapt`] for the self-adaptive (λ, γ) optimization.
//! 5. [`conversion`]: point-wise ⇄ functional map conversion and spectral
//!    upsampling refinement.
//! 6. [`losses`]: the unsupervised loss terms.
//! 7. [`theory`]: exhaustive/constructive checks of the map-relation results.
//! 8. [`eval`]: geodesic error, PCK and AUC.
//!
//! File IO, caching and the command-line tool live in the `fmapkit` crate.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod adapt;
pub mod conversion;
pub mod descriptors;
mod error;
pub mod eval;
pub mod fmap;
pub mod linalg;
pub mod losses;
pub mod mesh;
pub mod nn;
pub mod shapes;
pub mod spectral;
pub mod theory;

pub use error::{Error, Result};
pub use linalg::Mat;
