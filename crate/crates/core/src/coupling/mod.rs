//! Coupling of the particle system with its kinetic limit, and `D_N`.

mod check;
mod estimators;
mod reference;
mod simulator;
mod trials;

pub use check::{z_marginal_exactness_check, VelocityComparison, ZMarginalReport};
pub use estimators::{d_n, lln_diagnostic, tv_estimate};
pub use reference::{
    reference_registry, solve_reference, torus_disk_area, HomogeneousReference, KineticReference, ReferenceFrame,
    ReferenceModel, ReferenceSpec,
};
pub use simulator::{
    lambda, CoupledParams, CoupledRecord, CoupledRun, CoupledSimulator, CoupledState, CouplingDiagnostics, ErrorTerms,
    EventKind, EventOutcome,
};
pub use trials::{run_trials, TrialResult, TrialSetup};
