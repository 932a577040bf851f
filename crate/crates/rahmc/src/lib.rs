//! Repelling-attracting Hamiltonian Monte Carlo.
//!
//! This crate implements an MCMC toolkit built around conformal (dissipative
//! and amplifying) Hamiltonian dynamics. A proposal is generated in two
//! stages: a *repelling* stage with negative friction drives the trajectory
//! away from the mode it starts in, and an *attracting* stage with positive
//! friction settles it near another mode. The composed map is an involution
//! after a momentum flip and preserves phase-space volume, so the usual
//! Metropolis filter yields a valid sampler for multimodal targets. Plain
//! HMC is the `gamma = 0` special case and is provided as a baseline.
//!
//! Modules:
//! - [`model`]: target distributions (log-density + gradient) and exact
//!   samplers where available.
//! - [`dynamics`]: leapfrog and conformal-leapfrog integrators, the
//!   repelling/attracting flows, and numeric Jacobian machinery.
//! - [`samplers`]: Metropolis-filtered transition kernels and chain
//!   execution.
//! - [`tuning`]: Nesterov dual-averaging adaptation of the step size and
//!   friction coefficient.
//! - [`diagnostics`]: Sinkhorn distance, autocorrelation, effective sample
//!   size, mode occupancy, and energy-drift statistics.
//! - [`verify`]: numerical certification of the dynamical properties the
//!   sampler relies on (involution, volume preservation, integrator order,
//!   energy rates, mode-transition bounds).
//! - [`cli`]: config-driven experiment harness behind the `rahmc` binary.

pub mod cli;
pub mod diagnostics;
pub mod dynamics;
mod error;
pub mod model;
pub mod samplers;
pub mod tuning;
pub mod verify;

pub use error::{Error, Result};
