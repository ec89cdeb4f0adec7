//! Divergence-guided signed distance fields from unoriented point samples.
//!
//! A sine-activated MLP is fitted to surface samples with manifold, eikonal,
//! off-surface and divergence (Laplacian) penalties. The crate covers the
//! whole pipeline: initialization, losses with exact second-order parameter
//! gradients, training, level-set extraction, and evaluation metrics.

// Negated float comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod extract;
pub mod field;
pub mod geometry;
pub mod init;
pub mod io;
pub mod kdtree;
pub mod losses;
mod mc_tables;
pub mod metrics;
pub mod siren;
pub mod train;

pub use error::{Error, Result};
pub use field::{AnalyticField, ImplicitField, JetBatch, SampleRole};
pub use siren::{Architecture, ParamGrad, SirenParams};
