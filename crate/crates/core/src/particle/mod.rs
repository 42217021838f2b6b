//! The N-particle jump process.

mod export;
pub mod initial;
mod marginal;
mod master;
mod process;

pub use export::{write_events_csv, write_snapshots_csv};
pub use initial::{
    density_registry, sample_initial, sample_initial_with, velocity_registry, BumpsDensity, CosineDensity,
    DensitySpec, DiscreteVelocity, InitialLaw, InitialLawSpec, SpatialDensity, UniformDensity, UniformVelocity,
    VelocityLaw, VelocitySpec,
};
pub use marginal::{empirical_marginal, Histogram, HistogramSpec};
pub use master::{generator_matrix, label_state, master_equation_law, MasterLaw, MAX_STATES};
pub use process::{simulate, simulate_with, JumpEvent, ProcessParams, Snapshot, Trajectory};
