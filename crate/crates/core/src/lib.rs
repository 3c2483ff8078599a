//! Pseudospectral simulation and numerical verification for the generalized
//! Ostrovsky equation
//!
//! ```text
//! u_t - beta u_xxx - gamma dx^{-1} u + (u^{k+1})_x / (k+1) = 0,   beta < 0, gamma >= 0,
//! ```
//!
//! on a periodic domain, together with its `gamma = 0` generalized KdV limit.
//!
//! * [`spectral`] grids, fields, the phase symbol and every Fourier multiplier.
//! * [`norms`] Sobolev, `X_s`, mixed Lebesgue and discrete Bourgain norms.
//! * [`solver`] integrating-factor RK4 evolution, solitons and a Duhamel-Picard oracle.
//! * [`limit`] the weak-rotation limit sweep and its Gronwall diagnostics.
//! * [`kernel`] oscillatory quadrature of the dyadic dispersive kernel.
//! * [`estimates`] Monte-Carlo ratio probes for the linear and multilinear estimates.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod estimates;
pub mod kernel;
pub mod limit;
pub mod norms;
pub mod numfmt;
pub mod quadrature;
pub mod snapshot;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use spectral::{Field, Grid, MultiplierSpec, PhaseSymbol};
