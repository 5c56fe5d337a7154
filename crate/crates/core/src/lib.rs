//! Multiparameter Garsia–Rodemich–Rumsey machinery.
//!
//! The crate covers rectangular (joint) increments of sampled fields, both
//! sides of the multiparameter GRR inequality, exact Gaussian simulation of
//! fractional Brownian fields and of the stochastic heat equation with
//! additive space-time white noise, and Monte Carlo harnesses that probe
//! joint Hölder continuity with square-root-logarithm moduli.
//!
//! Module map:
//!
//! * [`field_grid`]: grids, point pairs, inclusion–exclusion increments.
//! * [`modulus`]: Young functions Ψ, moduli p and the log-modulated moduli.
//! * [`bounds`]: the functional B, the GRR right-hand side, the joint
//!   Kolmogorov constant and the chain construction behind the inequality.
//! * [`gaussian`]: covariance models, increment variances and exact sampling.
//! * [`heat`]: closed-form heat-kernel integrals for the mild solution.
//! * [`experiments`]: sup ratios, per-path certificates, refinement sweeps.
//! * [`cli`]: the `grr` batch command line.
// NaN must fail the range checks, so `!(x > 0.0)` is used on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod field_grid;
pub mod gaussian;
pub mod heat;
mod linalg;
pub mod modulus;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod snapshot;
pub mod special;

pub use error::{Error, Result};
pub use field_grid::{CornerSign, GridField, PointPair};
pub use modulus::{LogForm, LogModulatedModulus, ModulusFunction, YoungFunction};
