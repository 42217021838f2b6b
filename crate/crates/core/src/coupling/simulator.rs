//! The coupled process on the product of the particle world `Z` and the
//! reference world `Sigma`.
//!
//! At each ring of the rate-`N` clock a focal `i` is drawn uniformly and its
//! `Z` partner `j*` from `pi^N_{i,.}`. With probability
//! `lambda_{i,j*} / pi^N_{i,j*}` both worlds jump together (`v_i <- v_j*`,
//! `w_i <- w_j*`). Otherwise only `Z` copies `v_j*`, while `Sigma` jumps by
//! its residual law: a residual atom `(pi^rho - lambda)` or, for the missing
//! mass `1 - sum pi^rho`, a draw from the reference velocity law.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::estimators::{d_n, lln_diagnostic, tv_estimate};
use super::reference::{ReferenceFrame, ReferenceModel};
use crate::particle::HistogramSpec;
use crate::topo::{torus_distance, Configuration, Kernel, RankTable, RankWeights};
use crate::{Error, Result};

/// `lambda = min(pi^N, pi^rho)`.
#[inline]
pub fn lambda(pi_n: f64, pi_rho: f64) -> f64 {
    pi_n.min(pi_rho)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    pub z: Configuration,
    pub sigma: Configuration,
    /// `coupled[i]` iff `z_i == sigma_i` (absorbing once false).
    pub coupled: Vec<bool>,
    pub t: f64,
}

impl CoupledState {
    /// Delta coupling: both worlds start from the same sample.
    pub fn delta(initial: Configuration) -> Self {
        let n = initial.len();
        CoupledState {
            sigma: initial.clone(),
            z: initial,
            coupled: vec![true; n],
            t: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn decoupled(&self) -> usize {
        self.coupled.iter().filter(|c| !**c).count()
    }

    fn advance(&mut self, dt: f64) {
        self.z.advance(dt);
        self.sigma.advance(dt);
        self.t += dt;
    }

    /// Checks that flagged pairs are bitwise equal.
    pub fn check_flags(&self) -> Result<()> {
        for (i, &c) in self.coupled.iter().enumerate() {
            if c && (self.z.position(i) != self.sigma.position(i) || self.z.velocity(i) != self.sigma.velocity(i)) {
                return Err(Error::InvariantViolation(format!("pair {i} flagged coupled but differs")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Joint,
    /// `Z` jumped alone; `Sigma` took a residual atom.
    ResidualAtom,
    /// `Z` jumped alone; `Sigma` drew from the reference velocity law.
    TopUp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventOutcome {
    pub time: f64,
    pub focal: usize,
    pub partner: usize,
    pub rank: usize,
    pub kind: EventKind,
    /// `sum_j pi^rho_{i,j}` at this event.
    pub rho_row_sum: f64,
}

/// Mass discrepancies of the proof's decomposition, averaged over sampled events.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorTerms {
    pub samples: usize,
    /// `mean_j |M_X(B^x) - M_X(B^y)|`
    pub t1: f64,
    /// `mean_j |M_X(B^y) - M_Y(B^y)|`
    pub t2: f64,
    /// `mean_j |M_Y(B^y) - M_rho(B^y)|`
    pub t3: f64,
    /// `sum_j |pi^N - pi^rho|`
    pub a2: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CouplingDiagnostics {
    pub events: u64,
    pub joint: u64,
    pub z_only: u64,
    /// One-sided events where `Sigma` took a residual atom.
    pub sigma_only: u64,
    /// One-sided events where `Sigma` drew from the reference law.
    pub top_up: u64,
    /// Events with `sum_j pi^rho > 1` (residual atoms rescaled).
    pub rescaled: u64,
    /// `sum over events of |1 - sum_j pi^rho|`.
    pub row_sum_defect: f64,
    pub terms: ErrorTerms,
}

impl CouplingDiagnostics {
    /// Mean `|1 - m_i|` over the events so far.
    pub fn rescale_magnitude(&self) -> f64 {
        if self.events == 0 {
            0.0
        } else {
            self.row_sum_defect / self.events as f64
        }
    }

    fn record(&mut self, o: &EventOutcome) {
        self.events += 1;
        match o.kind {
            EventKind::Joint => self.joint += 1,
            EventKind::ResidualAtom => {
                self.z_only += 1;
                self.sigma_only += 1;
            }
            EventKind::TopUp => {
                self.z_only += 1;
                self.top_up += 1;
            }
        }
        self.row_sum_defect += (1.0 - o.rho_row_sum).abs();
        if o.rho_row_sum > 1.0 + 1e-12 {
            self.rescaled += 1;
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoupledParams {
    pub kernel: Arc<dyn Kernel>,
    pub horizon: f64,
    /// Sorted times at which a [`CoupledRecord`] is taken.
    pub record_times: Vec<f64>,
    /// Error terms are evaluated every `diagnostic_stride` events (0 disables).
    pub diagnostic_stride: usize,
    /// Binning for `tv_estimate` (d = 1 only).
    pub histogram: Option<HistogramSpec>,
    /// Keep the `Z` configuration in each record.
    pub keep_states: bool,
    /// Keep every event outcome.
    pub keep_events: bool,
}

impl CoupledParams {
    pub fn new(kernel: Arc<dyn Kernel>, horizon: f64) -> Self {
        CoupledParams {
            kernel,
            horizon,
            record_times: vec![horizon],
            diagnostic_stride: 0,
            histogram: None,
            keep_states: false,
            keep_events: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledRecord {
    pub t: f64,
    pub d_n: f64,
    pub tv_estimate: Option<f64>,
    pub joint: u64,
    pub z_only: u64,
    pub sigma_only: u64,
    pub lln_diag: f64,
    pub rescale_mag: f64,
    pub z_state: Option<Configuration>,
}

#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub records: Vec<CoupledRecord>,
    pub diagnostics: CouplingDiagnostics,
    pub events: Vec<EventOutcome>,
    pub final_state: CoupledState,
}

/// Reusable per-trajectory machinery; one per worker.
pub struct CoupledSimulator<'m> {
    kernel: Arc<dyn Kernel>,
    model: &'m dyn ReferenceModel,
    weights: RankWeights,
    z_table: RankTable,
    pi_n: Vec<f64>,
    pi_rho: Vec<f64>,
    lam: Vec<f64>,
}

impl<'m> CoupledSimulator<'m> {
    pub fn new(kernel: Arc<dyn Kernel>, model: &'m dyn ReferenceModel, n: usize) -> Result<Self> {
        Ok(CoupledSimulator {
            weights: RankWeights::new(kernel.as_ref(), n)?,
            kernel,
            model,
            z_table: RankTable::default(),
            pi_n: vec![0.0; n],
            pi_rho: vec![0.0; n],
            lam: vec![0.0; n],
        })
    }

    pub fn weights(&self) -> &RankWeights {
        &self.weights
    }

    /// Fills `pi^rho_{i,.}` (zero at `i`) from Sigma positions; returns the row sum.
    fn fill_pi_rho(&mut self, sigma: &Configuration, i: usize, frame: &dyn ReferenceFrame) -> f64 {
        let alpha = self.weights.alpha();
        let yi = sigma.position(i);
        let mut sum = 0.0;
        for j in 0..sigma.len() {
            self.pi_rho[j] = if j == i {
                0.0
            } else {
                let r = torus_distance(yi, sigma.position(j));
                alpha * self.kernel.value(frame.ball_mass(yi, r))
            };
            sum += self.pi_rho[j];
        }
        sum
    }

    /// One ring of the clock at the current `state.t`.
    pub fn event(&mut self, state: &mut CoupledState, rng: &mut crate::rng::SimRng) -> Result<EventOutcome> {
        let n = state.len();
        let frame = self.model.frame(state.t)?;
        let i = rng.random_range(0..n);

        self.z_table.rebuild(&state.z, i)?;
        for j in 0..n {
            let r = self.z_table.rank_of(j);
            self.pi_n[j] = if r == 0 { 0.0 } else { self.weights.weight(r) };
        }
        let m = self.fill_pi_rho(&state.sigma, i, frame.as_ref());
        let mut big_lambda = 0.0;
        for j in 0..n {
            self.lam[j] = lambda(self.pi_n[j], self.pi_rho[j]);
            big_lambda += self.lam[j];
        }
        let m_resid = m - big_lambda;
        if m_resid < -1e-12 {
            return Err(Error::InvariantViolation(format!("negative residual mass {m_resid}")));
        }

        let rank = self.weights.sample_rank(rng.random());
        let j = self.z_table.particle_at(rank);
        let p_joint = self.lam[j] / self.pi_n[j];
        let kind = if rng.random::<f64>() < p_joint {
            state.z.adopt_velocity(i, j);
            state.sigma.adopt_velocity(i, j);
            EventKind::Joint
        } else {
            state.z.adopt_velocity(i, j);
            let free = 1.0 - big_lambda;
            // residual atoms carry m_resid of the free mass; the rest (if any) is top-up
            let p_atom = if m >= 1.0 - 1e-12 || free <= 0.0 {
                1.0
            } else {
                (m_resid / free).clamp(0.0, 1.0)
            };
            if m_resid > 0.0 && rng.random::<f64>() < p_atom {
                let target = rng.random::<f64>() * m_resid;
                let mut acc = 0.0;
                let mut pick = None;
                for h in 0..n {
                    let w = (self.pi_rho[h] - self.lam[h]).max(0.0);
                    if w > 0.0 {
                        acc += w;
                        pick = Some(h);
                        if acc > target {
                            break;
                        }
                    }
                }
                let h = pick.ok_or_else(|| Error::InvariantViolation("empty residual atom law".into()))?;
                state.sigma.adopt_velocity(i, h);
                EventKind::ResidualAtom
            } else {
                let w = frame.draw_velocity(self.kernel.as_ref(), state.sigma.position(i), rng)?;
                state.sigma.set_velocity(i, &w);
                EventKind::TopUp
            }
        };
        if state.coupled[i] && state.z.velocity(i) != state.sigma.velocity(i) {
            state.coupled[i] = false;
        }
        Ok(EventOutcome {
            time: state.t,
            focal: i,
            partner: j,
            rank,
            kind,
            rho_row_sum: m,
        })
    }

    /// The T1/T2/T3/A2 analogues for focal `i` at the current state.
    pub fn error_terms(&mut self, state: &CoupledState, i: usize) -> Result<ErrorTerms> {
        let n = state.len();
        let frame = self.model.frame(state.t)?;
        self.fill_pi_rho(&state.sigma, i, frame.as_ref());
        let y_table = RankTable::build(&state.sigma, i)?;
        self.z_table.rebuild(&state.z, i)?;
        let yi = state.sigma.position(i);
        // Z positions sorted by distance from y_i, for M_X over y-balls
        let mut x_from_y: Vec<u64> = (0..n)
            .filter(|&h| h != i)
            .map(|h| crate::topo::distance_key(torus_distance(yi, state.z.position(h))))
            .collect();
        x_from_y.sort_unstable();
        let m = (n - 1) as f64;
        let (mut t1, mut t2, mut t3, mut a2) = (0.0, 0.0, 0.0, 0.0);
        for j in (0..n).filter(|&j| j != i) {
            let mx_bx = self.z_table.ball_mass_through(j);
            let ry = torus_distance(yi, state.sigma.position(j));
            let key = crate::topo::distance_key(ry);
            let mx_by = x_from_y.partition_point(|&k| k <= key) as f64 / m;
            let my_by = y_table.ball_mass_through(j);
            let mrho = frame.ball_mass(yi, ry);
            t1 += (mx_bx - mx_by).abs();
            t2 += (mx_by - my_by).abs();
            t3 += (my_by - mrho).abs();
            a2 += (self.weights.weight(self.z_table.rank_of(j)) - self.pi_rho[j]).abs();
        }
        Ok(ErrorTerms {
            samples: 1,
            t1: t1 / m,
            t2: t2 / m,
            t3: t3 / m,
            a2,
        })
    }

    fn record(
        &self,
        params: &CoupledParams,
        state: &CoupledState,
        diag: &CouplingDiagnostics,
        t: f64,
    ) -> Result<CoupledRecord> {
        let frame = self.model.frame(t)?;
        let tv = match params.histogram {
            Some(spec) if state.z.dim() == 1 => Some(tv_estimate(&state.z, frame.as_ref(), spec)?),
            _ => None,
        };
        Ok(CoupledRecord {
            t,
            d_n: d_n(state),
            tv_estimate: tv,
            joint: diag.joint,
            z_only: diag.z_only,
            sigma_only: diag.sigma_only,
            lln_diag: lln_diagnostic(&state.sigma, frame.as_ref(), &[0])?,
            rescale_mag: diag.rescale_magnitude(),
            z_state: params.keep_states.then(|| state.z.clone()),
        })
    }

    /// Runs the coupled process from the delta coupling of `initial`.
    pub fn run(
        &mut self,
        params: &CoupledParams,
        initial: &Configuration,
        rng: &mut crate::rng::SimRng,
    ) -> Result<CoupledRun> {
        let n = initial.len();
        if n != self.weights.n() {
            return Err(Error::domain("simulator was built for a different n"));
        }
        if initial.dim() != self.model.dim() {
            return Err(Error::domain("configuration and reference model disagree on d"));
        }
        if !(params.horizon >= 0.0) || params.horizon > self.model.horizon() + 1e-12 {
            return Err(Error::domain(format!(
                "horizon {} outside the reference horizon {}",
                params.horizon,
                self.model.horizon()
            )));
        }
        if params.record_times.windows(2).any(|w| w[1] < w[0])
            || params.record_times.iter().any(|&t| !(0.0..=params.horizon).contains(&t))
        {
            return Err(Error::domain("record times must be sorted and inside the horizon"));
        }
        let clock = Exp::new(n as f64).expect("positive rate");
        let mut state = CoupledState::delta(initial.clone());
        let mut diag = CouplingDiagnostics::default();
        let mut records = Vec::with_capacity(params.record_times.len());
        let mut events = Vec::new();
        let mut pending = params.record_times.iter().copied().peekable();

        loop {
            let t_next = state.t + clock.sample(rng);
            while let Some(&s) = pending.peek() {
                if s >= t_next {
                    break;
                }
                let mut probe = state.clone();
                probe.advance(s - state.t);
                probe.t = s;
                records.push(self.record(params, &probe, &diag, s)?);
                pending.next();
            }
            if t_next > params.horizon {
                let dt = params.horizon - state.t;
                state.advance(dt);
                state.t = params.horizon;
                break;
            }
            state.advance(t_next - state.t);
            state.t = t_next;
            let outcome = self.event(&mut state, rng)?;
            diag.record(&outcome);
            if params.diagnostic_stride > 0 && diag.events % params.diagnostic_stride as u64 == 0 {
                let e = self.error_terms(&state, outcome.focal)?;
                let s = &mut diag.terms;
                s.samples += 1;
                s.t1 += e.t1;
                s.t2 += e.t2;
                s.t3 += e.t3;
                s.a2 += e.a2;
            }
            if params.keep_events {
                events.push(outcome);
            }
        }
        if diag.terms.samples > 0 {
            let k = diag.terms.samples as f64;
            diag.terms.t1 /= k;
            diag.terms.t2 /= k;
            diag.terms.t3 /= k;
            diag.terms.a2 /= k;
        }
        Ok(CoupledRun {
            records,
            diagnostics: diag,
            events,
            final_state: state,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::reference::HomogeneousReference;
    use crate::particle::{DiscreteVelocity, UniformVelocity};
    use crate::rng::stream_rng;
    use crate::topo::{Linear, Uniform};

    fn homogeneous(dim: usize) -> HomogeneousReference {
        HomogeneousReference::new(dim, 5.0, Arc::new(UniformVelocity::new(1.0).unwrap())).unwrap()
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda(0.4, 0.25), 0.25);
        assert_eq!(lambda(0.3, 0.3), 0.3);
    }

    #[test]
    fn lattice_configuration_has_lambda_equal_pi_n() {
        // y_j = j / (2(n-1)) around y_0 = 0: empirical and uniform ball masses agree
        let n = 9;
        let pos: Vec<f64> = (0..n).map(|j| j as f64 / (2.0 * (n - 1) as f64)).collect();
        let c = Configuration::line(&pos, &[0.0; 9]).unwrap();
        let model = homogeneous(1);
        let mut sim = CoupledSimulator::new(Arc::new(Linear), &model, n).unwrap();
        let frame = model.frame(0.0).unwrap();
        let m = sim.fill_pi_rho(&c, 0, frame.as_ref());
        let table = RankTable::build(&c, 0).unwrap();
        for j in 1..n {
            let pn = sim.weights.weight(table.rank_of(j));
            assert_eq!(lambda(pn, sim.pi_rho[j]), pn);
            assert_eq!(sim.pi_rho[j], pn);
        }
        assert!((m - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_kernel_couples_every_event() {
        let model = homogeneous(1);
        let n = 20;
        let mut rng = stream_rng(2, 0);
        let pos: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let vel: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let c = Configuration::line(&pos, &vel).unwrap();
        let mut sim = CoupledSimulator::new(Arc::new(Uniform), &model, n).unwrap();
        let run = sim.run(&CoupledParams::new(Arc::new(Uniform), 2.0), &c, &mut rng).unwrap();
        assert!(run.diagnostics.events > 0);
        assert_eq!(run.diagnostics.joint, run.diagnostics.events);
        assert_eq!(run.records[0].d_n, 0.0);
    }

    #[test]
    fn two_antipodal_particles_stay_coupled() {
        let model = homogeneous(1);
        let c = Configuration::line(&[0.0, 0.5], &[0.3, 0.3]).unwrap();
        let mut sim = CoupledSimulator::new(Arc::new(Uniform), &model, 2).unwrap();
        let mut rng = stream_rng(8, 0);
        let run = sim.run(&CoupledParams::new(Arc::new(Uniform), 3.0), &c, &mut rng).unwrap();
        assert_eq!(run.diagnostics.joint, run.diagnostics.events);
        assert_eq!(run.final_state.decoupled(), 0);
    }

    #[test]
    fn flags_are_absorbing_and_counts_add_up() {
        let model = HomogeneousReference::new(
            2,
            5.0,
            Arc::new(DiscreteVelocity::new(vec![-0.5, 0.1, 0.4], vec![]).unwrap()),
        )
        .unwrap();
        let n = 40;
        let mut rng = stream_rng(4, 0);
        let pos: Vec<f64> = (0..2 * n).map(|_| rng.random()).collect();
        let vel: Vec<f64> = (0..2 * n).map(|_| [-0.5, 0.1, 0.4][rng.random_range(0..3)]).collect();
        let c = Configuration::new(2, pos, vel).unwrap();
        let mut sim = CoupledSimulator::new(Arc::new(Linear), &model, n).unwrap();
        let mut state = CoupledState::delta(c);
        let mut diag = CouplingDiagnostics::default();
        let mut was = state.coupled.clone();
        for _ in 0..2000 {
            state.advance(0.001);
            let o = sim.event(&mut state, &mut rng).unwrap();
            diag.record(&o);
            for (a, b) in was.iter().zip(&state.coupled) {
                assert!(*a || !*b, "a decoupled pair was recoupled");
            }
            state.check_flags().unwrap();
            was = state.coupled.clone();
        }
        assert_eq!(diag.joint + diag.z_only, diag.events);
        assert_eq!(diag.sigma_only + diag.top_up, diag.z_only);
        assert!(diag.z_only > 0);
    }

    #[test]
    fn records_are_monotone_and_deterministic() {
        let model = homogeneous(1);
        let n = 64;
        let mut rng = stream_rng(6, 0);
        let pos: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let vel: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let c = Configuration::line(&pos, &vel).unwrap();
        let mut params = CoupledParams::new(Arc::new(Linear), 4.0);
        params.record_times = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        params.diagnostic_stride = 7;
        params.histogram = Some(HistogramSpec::new(4, 4, 1.0).unwrap());
        let mut sim = CoupledSimulator::new(Arc::new(Linear), &model, n).unwrap();
        let a = sim.run(&params, &c, &mut stream_rng(1, 1)).unwrap();
        let b = sim.run(&params, &c, &mut stream_rng(1, 1)).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.records[0].d_n, 0.0);
        assert!(a.records.windows(2).all(|w| w[1].d_n >= w[0].d_n));
        assert!(a.diagnostics.terms.samples > 0);
        assert!(a.diagnostics.terms.t3 > 0.0);
        let last = a.records.last().unwrap();
        assert!(last.tv_estimate.unwrap() <= 1.0);
        assert!(last.d_n > 0.0, "{:?} {:?}", a.diagnostics, last);
    }
}
