//! Independent coupled trials on a worker pool, reproducible per trial.

use rayon::prelude::*;

use super::reference::ReferenceModel;
use super::simulator::{CoupledParams, CoupledRecord, CoupledSimulator, CouplingDiagnostics};
use crate::particle::{sample_initial_with, InitialLaw};
use crate::rng::stream_rng;
use crate::Result;

#[derive(Debug, Clone)]
pub struct TrialSetup {
    pub law: InitialLaw,
    pub dim: usize,
    pub n: usize,
    pub params: CoupledParams,
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub trial: usize,
    pub records: Vec<CoupledRecord>,
    pub diagnostics: CouplingDiagnostics,
}

/// Trial `k` draws its initial sample and its dynamics from stream `k` of `seed`,
/// so results do not depend on how trials are scheduled.
pub fn run_trials(setup: &TrialSetup, model: &dyn ReferenceModel, trials: usize, seed: u64) -> Result<Vec<TrialResult>> {
    CoupledSimulator::new(setup.params.kernel.clone(), model, setup.n)?;
    (0..trials)
        .into_par_iter()
        .map_init(
            || CoupledSimulator::new(setup.params.kernel.clone(), model, setup.n).expect("validated above"),
            |sim, trial| {
                let mut rng = stream_rng(seed, trial as u64);
                let initial = sample_initial_with(&setup.law, setup.n, setup.dim, &mut rng)?;
                let run = sim.run(&setup.params, &initial, &mut rng)?;
                Ok(TrialResult {
                    trial,
                    records: run.records,
                    diagnostics: run.diagnostics,
                })
            },
        )
        .collect()
}
