//! Splitting solver for the limit kinetic equation on the 1-torus,
//!
//! `(d_t + v d_x) f = -f + rho(x) \int K(M_rho(B_{|x-y|}(x))) f(y, v) dy`.

mod collision;
mod grid;
pub mod io;
mod mass;
mod solver;

pub use collision::{CollisionOperator, Gain};
pub use grid::{GridDensity, PhaseGrid};
pub use mass::MassFunction;
pub use solver::{transport, KineticSolution, KineticSolver, MassLog, StepReport};
