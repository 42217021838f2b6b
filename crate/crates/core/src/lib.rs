//! Topological-interaction particle laboratory.
//!
//! The crate is split along the four pieces of the model:
//!
//! * [`topo`]: ranks on the torus, the interaction kernel `K`, Riemann-sum
//!   normalization and the rank-based transition probabilities.
//! * [`particle`]: exact event-driven simulation of the `N`-particle velocity
//!   adoption process, initial laws and a master-equation oracle for tiny
//!   frozen systems.
//! * [`kinetic`]: a splitting solver for the limit kinetic equation on the
//!   1-torus.
//! * [`coupling`]: the coupled particle/reference process, `D_N` and the
//!   error-term diagnostics.
//!
//! Interchangeable pieces (kernels, initial densities, velocity laws and
//! reference models) are trait objects looked up by name in registries, so
//! experiment configurations select them at runtime.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupling;
pub mod error;
pub mod kinetic;
pub mod particle;
pub mod registry;
pub mod rng;
pub mod stats;
pub mod topo;

pub use error::{Error, Result};
