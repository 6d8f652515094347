//! Topological entropy of optical Hamiltonian flows estimated as the exponential growth
//! rate of phase-space averages of restricted determinants of the tangent cocycle.
//!
//! Modules, bottom-up:
//!
//! * [`symplin`]: symplectic linear algebra (restricted determinants, expansion, angles,
//!   polar decomposition, maximally expanded Lagrangian subspaces);
//! * [`hamflow`]: Hamiltonian systems, symplectic stepping, tangent propagation with
//!   renormalized volume accumulation, energy-shell sampling;
//! * [`cocycle`]: cocycle checks, opticity, twist probe, quotient construction and auditors;
//! * [`entropy`]: growth series, slope regression and `ε` extrapolation;
//! * [`cli`]: the experiment runner behind the `optent` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod cocycle;
pub mod entropy;
pub mod error;
pub mod hamflow;
pub mod symplin;

pub use error::{Error, Result};
