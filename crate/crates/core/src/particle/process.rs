//! Exact event-driven simulation of the velocity-adoption jump process.
//!
//! A global exponential clock of rate `N` rings; at each ring a focal
//! particle `i` is chosen uniformly and a partner `j` with probability
//! `pi^N_{ij}` computed on the current positions; then `v_i <- v_j`.
//! Between rings particles stream freely on the torus.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::rng::{stream_rng, SimRng};
use crate::topo::{distance_key, torus_distance, Configuration, Kernel, RankWeights};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct ProcessParams {
    pub kernel: Arc<dyn Kernel>,
    pub n: usize,
    pub dim: usize,
    pub horizon: f64,
    pub seed: u64,
    /// Skip free transport so that ranks stay constant (test mode).
    pub frozen_positions: bool,
    /// Times at which the full state is recorded; each must lie in `[0, horizon]`.
    pub snapshot_times: Vec<f64>,
}

impl ProcessParams {
    pub fn new(kernel: Arc<dyn Kernel>, n: usize, horizon: f64, seed: u64) -> Self {
        ProcessParams {
            kernel,
            n,
            dim: 1,
            horizon,
            seed,
            frozen_positions: false,
            snapshot_times: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::domain("the process needs n >= 2"));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::domain(format!("horizon must be finite and >= 0, got {}", self.horizon)));
        }
        if let Some(&t) = self.snapshot_times.iter().find(|&&t| !(0.0..=self.horizon).contains(&t)) {
            return Err(Error::domain(format!("snapshot time {t} outside [0, {}]", self.horizon)));
        }
        if self.snapshot_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::domain("snapshot times must be sorted"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub focal: usize,
    pub partner: usize,
    /// Rank of the partner with respect to the focal particle at the event.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub state: Configuration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub horizon: f64,
    pub events: Vec<JumpEvent>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: Configuration,
}

impl Trajectory {
    pub fn snapshot_at(&self, t: f64) -> Result<&Configuration> {
        if (t - self.horizon).abs() <= 1e-12 {
            return Ok(&self.final_state);
        }
        self.snapshots
            .iter()
            .find(|s| (s.time - t).abs() <= 1e-12)
            .map(|s| &s.state)
            .ok_or_else(|| Error::domain(format!("no snapshot recorded at t = {t}")))
    }
}

/// Finds the particle of a given rank without a full sort.
#[derive(Debug, Default)]
pub(crate) struct PartnerSelector {
    keys: Vec<(u64, u32)>,
}

impl PartnerSelector {
    /// Particle with 1-based rank `rank` around `focal`, ties broken by index.
    pub(crate) fn partner_of_rank(&mut self, config: &Configuration, focal: usize, rank: usize) -> usize {
        let center = config.position(focal);
        self.keys.clear();
        self.keys.extend(
            (0..config.len())
                .filter(|&j| j != focal)
                .map(|j| (distance_key(torus_distance(center, config.position(j))), j as u32)),
        );
        let (_, nth, _) = self.keys.select_nth_unstable(rank - 1);
        nth.1 as usize
    }
}

pub fn simulate(params: &ProcessParams, initial: &Configuration) -> Result<Trajectory> {
    simulate_with(params, initial, &mut stream_rng(params.seed, 0))
}

/// Same as [`simulate`] but drawing from a caller-provided stream.
pub fn simulate_with(params: &ProcessParams, initial: &Configuration, rng: &mut SimRng) -> Result<Trajectory> {
    params.validate()?;
    if initial.len() != params.n || initial.dim() != params.dim {
        return Err(Error::domain(format!(
            "initial configuration has n = {}, d = {}; params say n = {}, d = {}",
            initial.len(),
            initial.dim(),
            params.n,
            params.dim
        )));
    }
    let n = params.n;
    let weights = RankWeights::new(params.kernel.as_ref(), n)?;
    let clock = Exp::new(n as f64).expect("positive rate");
    let mut selector = PartnerSelector::default();
    let mut state = initial.clone();
    let mut events = Vec::with_capacity((2.0 * n as f64 * params.horizon) as usize + 16);
    let mut snapshots = Vec::with_capacity(params.snapshot_times.len());
    let mut pending = params.snapshot_times.iter().copied().peekable();
    let mut t = 0.0;

    loop {
        let t_next = t + clock.sample(rng);
        while let Some(&s) = pending.peek() {
            if s >= t_next {
                break;
            }
            let mut snap = state.clone();
            if !params.frozen_positions {
                snap.advance(s - t);
            }
            snapshots.push(Snapshot { time: s, state: snap });
            pending.next();
        }
        if t_next > params.horizon {
            if !params.frozen_positions {
                state.advance(params.horizon - t);
            }
            break;
        }
        if !params.frozen_positions {
            state.advance(t_next - t);
        }
        t = t_next;

        let focal = rng.random_range(0..n);
        let rank = weights.sample_rank(rng.random());
        let partner = selector.partner_of_rank(&state, focal, rank);
        state.adopt_velocity(focal, partner);
        events.push(JumpEvent {
            time: t,
            focal,
            partner,
            rank,
        });
    }

    Ok(Trajectory {
        horizon: params.horizon,
        events,
        snapshots,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo::{Linear, RankTable, Uniform};

    #[test]
    fn selector_agrees_with_rank_table() {
        let c = Configuration::line(&[0.0, 0.1, 0.3, 0.7, 0.55, 0.95], &[0.0; 6]).unwrap();
        let mut sel = PartnerSelector::default();
        for focal in 0..6 {
            let table = RankTable::build(&c, focal).unwrap();
            for r in 1..6 {
                assert_eq!(sel.partner_of_rank(&c, focal, r), table.particle_at(r));
            }
        }
    }

    #[test]
    fn two_particles_reach_consensus_on_first_jump() {
        let c = Configuration::line(&[0.1, 0.6], &[1.0, -1.0]).unwrap();
        let params = ProcessParams::new(Arc::new(Uniform), 2, 5.0, 11);
        let traj = simulate(&params, &c).unwrap();
        let first = traj.events[0];
        assert_eq!(first.partner, 1 - first.focal);
        assert_eq!(first.rank, 1);
        let v = traj.final_state.velocities();
        assert_eq!(v[0], v[1]);
    }

    #[test]
    fn mean_first_event_time_is_one_half_for_two_particles() {
        let c = Configuration::line(&[0.1, 0.6], &[1.0, -1.0]).unwrap();
        let trials = 20_000;
        let mut sum = 0.0;
        let mut rng = stream_rng(5, 1);
        for _ in 0..trials {
            let params = ProcessParams::new(Arc::new(Uniform), 2, 50.0, 0);
            sum += simulate_with(&params, &c, &mut rng).unwrap().events[0].time;
        }
        let mean = sum / trials as f64;
        // sd of Exp(2) is 1/2
        assert!((mean - 0.5).abs() < 4.0 * 0.5 / (trials as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn deterministic_and_snapshot_consistent() {
        let c = Configuration::line(&[0.0, 0.2, 0.45, 0.8], &[0.3, -0.1, 0.7, 0.2]).unwrap();
        let mut params = ProcessParams::new(Arc::new(Linear), 4, 2.0, 77);
        params.snapshot_times = vec![0.0, 0.5, 1.0];
        let a = simulate(&params, &c).unwrap();
        let b = simulate(&params, &c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.snapshots.len(), 3);
        assert_eq!(a.snapshot_at(0.0).unwrap(), &c);
        assert!(a.snapshot_at(0.25).is_err());
        for w in a.events.windows(2) {
            assert!(w[1].time > w[0].time);
        }
    }

    #[test]
    fn frozen_positions_do_not_move() {
        let c = Configuration::line(&[0.0, 0.2, 0.45], &[0.3, -0.1, 0.7]).unwrap();
        let mut params = ProcessParams::new(Arc::new(Linear), 3, 3.0, 1);
        params.frozen_positions = true;
        let traj = simulate(&params, &c).unwrap();
        assert_eq!(traj.final_state.positions(), c.positions());
    }

    #[test]
    fn parameter_validation() {
        let c = Configuration::line(&[0.0, 0.2, 0.45], &[0.0; 3]).unwrap();
        let mut p = ProcessParams::new(Arc::new(Linear), 4, 1.0, 0);
        assert!(simulate(&p, &c).is_err());
        p.n = 3;
        p.horizon = -1.0;
        assert!(simulate(&p, &c).is_err());
        p.horizon = 1.0;
        p.snapshot_times = vec![2.0];
        assert!(simulate(&p, &c).is_err());
    }
}
