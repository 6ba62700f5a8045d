//! Stochastic Gauss-type quadrature on integration meshes, and a Deep Ritz
//! trainer built on top of it.
//!
//! - [`geometry`]: master elements, affine maps, uniform meshes of `[0,1]^d`.
//! - [`quadrature`]: master-element rules and global mesh rules.
//! - [`net`]: the cutoff tanh network with exact spatial and parameter gradients.
//! - [`drm`]: manufactured problems, the Adam variant, training and H¹ errors.
//! - [`stats`]: variance studies, gradient covariance metrics, log-binning.
//! - [`cli`]: the `stochquad` experiment driver.

#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod drm;
pub mod error;
pub mod geometry;
pub mod net;
pub mod numeric;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
