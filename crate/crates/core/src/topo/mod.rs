//! Ranks, kernels and transition probabilities.

mod config;
mod kernel;
mod normalization;
mod rank;

pub use config::{
    circle_distance, distance_key, torus_distance, wrap_unit, Configuration, DISTANCE_QUANTUM,
};
pub use kernel::{
    check_kernel, kernel_from_spec, Kernel, KernelCheck, KernelRegistry, KernelSpec, Linear,
    Tabulated, TruncatedLinear, Uniform, GRONWALL_FACTOR,
};
pub use normalization::{
    alpha, alpha_bound, riemann_error, riemann_sum, transition_probs, transition_probs_direct,
    RankWeights,
};
pub use rank::{empirical_mass, rank, RankTable};
