//! Resonance fluorescence of a driven two-level atom under homodyne detection
//! and Wiseman–Milburn feedback.
//!
//! The crate is organised bottom-up:
//!
//! * [`algebra`]: 2×2 operators, Bloch vectors and density matrices.
//! * [`linalg`]: the small real 3×3 linear algebra the Bloch picture needs.
//! * [`dynamics`]: model parameters, the feedback-modified Liouvillian, its
//!   Bloch drift `dx/dt = -A x + b` and the stationary state.
//! * [`spectrum`]: the incoherent homodyne spectrum `S_k(μ)` through the
//!   Bloch resolvent, plus an independent quadrature evaluation.
//! * [`trajectories`]: Euler–Maruyama integration of the stochastic master
//!   equation, simulated photocurrents and Monte Carlo spectrum estimates.
//! * [`optimize`]: multi-start Nelder–Mead over the control parameters.
//! * [`scenario`] and [`records`]: the on-disk formats used by the CLI.

// `!(a <= b)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod optimize;
pub mod records;
pub mod rng;
pub mod scenario;
pub mod spectrum;
pub mod tolerance;
pub mod trajectories;

pub use algebra::{BlochVector, DensityMatrix, Operator2};
pub use dynamics::{BlochAffine, ModelParams};
pub use error::{Error, Result};
pub use spectrum::{Channel, SpectrumSeries};
