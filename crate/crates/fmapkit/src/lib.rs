//! File formats, a spectral basis cache, configuration and the batch
//! pipeline behind the `fmapkit` command-line tool.
//!
//! All numerics live in [`fmapkit_core`]; this crate only reads and writes
//! files and wires the stages together.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
pub mod cli;
pub mod config;
mod error;
pub mod formats;
pub mod mesh_io;
pub mod pipeline;
pub mod report;

pub use error::{Error, Result};
pub use fmapkit_core as core;
