//! Short-step interior-point solver for second-order cone programs.
//!
//! The crate provides
//!
//! - [`jordan`]: arrowhead matrices, Jordan products and spectral quantities
//!   for products of Lorentz cones,
//! - [`socp`]: standard-form instances, residuals and centrality,
//! - [`newton`]: the unreduced Newton system with its `kappa`/`zeta`
//!   diagnostics,
//! - [`ipm`]: the exact short-step method,
//! - [`quantum`]: the same method with Newton steps perturbed by a vector
//!   tomography error model, plus the quantum running-time estimate,
//! - [`portfolio`]: Markowitz data handling and the reduction to SOCP,
//! - [`experiment`]: seeded experiment suites, power-law fits and plot data.
//!
//! Suite trials run on rayon when the `parallel` feature is enabled (the
//! default) and sequentially otherwise; both paths produce identical reports.

// `!(a >= b)` is used on purpose so that NaN falls into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod ipm;
pub mod jordan;
pub mod newton;
pub mod portfolio;
pub mod quantum;
pub mod socp;

pub use error::{Error, Result};
pub use ipm::{IpmConfig, IterationDiagnostics, RunReport, RunStatus, StepRule};
pub use jordan::{BlockVector, ConeStructure};
pub use quantum::{NoiseMode, NoiseModel};
pub use socp::{IpmState, SocpInstance};
