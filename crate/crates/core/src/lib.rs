//! Learn the Hamiltonian of an ODE system from sparse trajectory samples.
//!
//! The vector field of a canonical Hamiltonian system, `f = J ∇H`, is
//! parameterized by a small multilayer perceptron `H_θ` and fitted by
//! minimizing one-step interpolation residuals of mono-implicit Runge–Kutta
//! (MIRK) methods. Because a MIRK step becomes explicit once both endpoint
//! states are known data, high-order interpolation conditions come at the
//! cost of a handful of vector-field evaluations per sample — no nonlinear
//! solves in the training loop.
//!
//! Module map:
//! - [`hamiltonians`]: benchmark systems (double pendulum, FPUT chain) with
//!   exact energies and gradients for data generation and evaluation.
//! - [`integrators`]: MIRK tableaus of orders 2–6, injected/forward stepping,
//!   an adaptive Dormand–Prince reference solver, and empirical
//!   convergence-order estimation.
//! - [`model`]: the MLP Hamiltonian with exact input gradients and exact
//!   parameter gradients of gradient-based losses (second-order backprop).
//! - [`training`]: full-batch L-BFGS with a strong-Wolfe line search.
//! - [`metrics`]: rollout of learned fields plus interpolation,
//!   extrapolation, and mean-subtracted energy errors.
//! - [`config`] / [`cli`]: JSON-driven experiment pipeline
//!   (generate → train → evaluate → orders).

pub mod cli;
pub mod config;
pub mod error;
pub mod hamiltonians;
pub mod integrators;
pub mod metrics;
pub mod model;
pub mod training;

pub use error::{Error, Result};
