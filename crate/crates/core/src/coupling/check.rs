//! Statistical comparison of the coupled `Z` component with the standalone process.

use std::collections::BTreeMap;

use statrs::distribution::{ContinuousCDF, Normal};

use super::reference::ReferenceModel;
use super::simulator::{CoupledParams, CoupledSimulator, EventKind};
use super::trials::TrialSetup;
use crate::particle::{sample_initial_with, simulate_with, ProcessParams};
use crate::rng::{derive_seed, stream_rng};
use crate::stats::{chi_square_homogeneity, ks_two_sample, ks_two_sample_p, ChiSquareTest};
use crate::Result;

/// Velocity samples with at most this many distinct values are compared by chi-square.
const CATEGORICAL_LIMIT: usize = 64;

/// Velocities within one trial are correlated, so only one particle per trial is compared.
/// By exchangeability its law is the one-particle marginal.
const TAGGED: usize = 0;

#[derive(Debug, Clone)]
pub struct VelocityComparison {
    pub t: f64,
    /// `"chi-square"` or `"ks"`.
    pub test: &'static str,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone)]
pub struct ZMarginalReport {
    pub coupled_events: u64,
    pub standalone_events: u64,
    /// Two-sided normal approximation for the difference of two Poisson counts.
    pub event_count_p: f64,
    pub rank_test: ChiSquareTest,
    pub velocity: Vec<VelocityComparison>,
    /// `joint + z_only` equals the number of `Z` jumps in every trial.
    pub counts_consistent: bool,
    pub significance: f64,
}

impl ZMarginalReport {
    pub fn passed(&self) -> bool {
        self.counts_consistent
            && self.event_count_p > self.significance
            && self.rank_test.p_value > self.significance
            && self.velocity.iter().all(|v| v.p_value > self.significance)
    }
}

fn compare_velocities(t: f64, a: &[f64], b: &[f64]) -> VelocityComparison {
    let mut levels: BTreeMap<u64, usize> = BTreeMap::new();
    for v in a.iter().chain(b) {
        let next = levels.len();
        levels.entry(v.to_bits()).or_insert(next);
        if levels.len() > CATEGORICAL_LIMIT {
            break;
        }
    }
    if levels.len() <= CATEGORICAL_LIMIT {
        let mut ca = vec![0u64; levels.len()];
        let mut cb = vec![0u64; levels.len()];
        for v in a {
            ca[levels[&v.to_bits()]] += 1;
        }
        for v in b {
            cb[levels[&v.to_bits()]] += 1;
        }
        let test = chi_square_homogeneity(&ca, &cb);
        VelocityComparison {
            t,
            test: "chi-square",
            statistic: test.statistic,
            p_value: test.p_value,
        }
    } else {
        let d = ks_two_sample(a, b);
        VelocityComparison {
            t,
            test: "ks",
            statistic: d,
            p_value: ks_two_sample_p(d, a.len(), b.len()),
        }
    }
}

/// Runs `trials` coupled and `trials` standalone trajectories and tests that the
/// coupled `Z` component has the standalone law: event counts, partner ranks,
/// and the first velocity component of a tagged particle at each of `times`.
pub fn z_marginal_exactness_check(
    setup: &TrialSetup,
    model: &dyn ReferenceModel,
    trials: usize,
    seed: u64,
    times: &[f64],
    significance: f64,
) -> Result<ZMarginalReport> {
    let n = setup.n;
    let horizon = setup.params.horizon;
    let mut params: CoupledParams = setup.params.clone();
    params.record_times = times.to_vec();
    params.keep_states = true;
    params.keep_events = true;
    params.diagnostic_stride = 0;
    params.histogram = None;

    let mut coupled_ranks = vec![0u64; n];
    let mut standalone_ranks = vec![0u64; n];
    let mut coupled_v: Vec<Vec<f64>> = vec![Vec::new(); times.len()];
    let mut standalone_v: Vec<Vec<f64>> = vec![Vec::new(); times.len()];
    let (mut coupled_events, mut standalone_events) = (0u64, 0u64);
    let mut counts_consistent = true;

    let mut sim = CoupledSimulator::new(setup.params.kernel.clone(), model, n)?;
    let coupled_seed = derive_seed(seed, 1);
    for trial in 0..trials {
        let mut rng = stream_rng(coupled_seed, trial as u64);
        let initial = sample_initial_with(&setup.law, n, setup.dim, &mut rng)?;
        let run = sim.run(&params, &initial, &mut rng)?;
        let d = &run.diagnostics;
        counts_consistent &= d.joint + d.z_only == run.events.len() as u64;
        counts_consistent &= run.events.iter().filter(|e| e.kind != EventKind::Joint).count() as u64 == d.z_only;
        coupled_events += run.events.len() as u64;
        for e in &run.events {
            coupled_ranks[e.rank] += 1;
        }
        for (k, rec) in run.records.iter().enumerate() {
            if let Some(z) = &rec.z_state {
                coupled_v[k].push(z.velocity(TAGGED)[0]);
            }
        }
    }

    let mut pp = ProcessParams::new(setup.params.kernel.clone(), n, horizon, 0);
    pp.dim = setup.dim;
    pp.snapshot_times = times.to_vec();
    let standalone_seed = derive_seed(seed, 2);
    for trial in 0..trials {
        let mut rng = stream_rng(standalone_seed, trial as u64);
        let initial = sample_initial_with(&setup.law, n, setup.dim, &mut rng)?;
        let traj = simulate_with(&pp, &initial, &mut rng)?;
        standalone_events += traj.events.len() as u64;
        for e in &traj.events {
            standalone_ranks[e.rank] += 1;
        }
        for (k, &t) in times.iter().enumerate() {
            let state = traj.snapshot_at(t)?;
            standalone_v[k].push(state.velocity(TAGGED)[0]);
        }
    }

    let diff = coupled_events as f64 - standalone_events as f64;
    let sd = ((coupled_events + standalone_events) as f64).sqrt().max(1.0);
    let normal = Normal::standard();
    let event_count_p = 2.0 * (1.0 - normal.cdf((diff / sd).abs()));

    let velocity = times
        .iter()
        .enumerate()
        .map(|(k, &t)| compare_velocities(t, &coupled_v[k], &standalone_v[k]))
        .collect();

    Ok(ZMarginalReport {
        coupled_events,
        standalone_events,
        event_count_p,
        rank_test: chi_square_homogeneity(&coupled_ranks[1..], &standalone_ranks[1..]),
        velocity,
        counts_consistent,
        significance,
    })
}
