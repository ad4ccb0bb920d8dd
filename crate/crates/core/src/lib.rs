//! Finite-state mean-field jump processes and their large-time behaviour.
//!
//! The library covers the full analysis pipeline for a system of `N`
//! exchangeable particles on a finite state space whose per-particle
//! transition rates depend on the empirical measure:
//!
//! - [`model`]: state spaces, transition digraphs, rate expressions, the
//!   simplex lattice `M_1^N(Z)`, and a small catalog of built-in models.
//! - [`dynamics`]: the limiting mean-field ODE, its fixed points and basins.
//! - [`action`]: finite-horizon large-deviation costs (local Lagrangian,
//!   path actions, terminal costs by path optimisation).
//! - [`quasipotential`]: time-free minimum action `V` and the constrained
//!   attractor-to-attractor costs `Ṽ(K_i, K_j)` by lattice shortest paths,
//!   with an exact Hamilton-Jacobi oracle for two-state models.
//! - [`hierarchy`]: W-graph combinatorics, the stationary rate function,
//!   the relaxation constant Λ, and the cycle hierarchy with the annealing
//!   constants `A_k`, `c_k`, `c*`.
//! - [`spectral`]: exact generators on the lattice, invariant measures,
//!   reversibility checks, second eigenvalues, total-variation mixing curves.
//! - [`simulate`]: exact event-driven Monte Carlo, hitting-time experiments,
//!   and the particle-injection annealing process.

pub mod action;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod hierarchy;
pub mod model;
pub mod numerics;
pub mod quasipotential;
pub mod rng;
pub mod simulate;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{LatticeMeasure, Model, RateMatrix, SimplexPoint, StateSpace, TransitionGraph};
