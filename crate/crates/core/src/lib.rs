//! Functional measures built from transition kernels, and four routes to the
//! perturbed fundamental solution of `d_t f = A f - V f`: time-sliced
//! propagation, the Dyson series, Volterra marching and pinned-path Monte Carlo.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dyson;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod oracles;
pub mod potential;
pub mod propagate;
pub mod transport;
pub mod volterra;
pub mod wiener_mc;

pub use error::{Error, Result};
pub use grid::{Field, ScalarKind, SpatialGrid};
pub use kernel::{lagrangian_to_kernel, SignConvention, SymbolTerm, TransitionKernel};
pub use potential::Potential;
pub use transport::{apply_kernel, Transport, TransportMethod};
