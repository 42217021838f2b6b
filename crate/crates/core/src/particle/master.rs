//! Brute-force forward equation for tiny frozen systems.
//!
//! With positions frozen the partner law `pi^N` is a constant matrix, and the
//! velocity labels form a finite Markov chain: from state `s`, relabel
//! `i <- label(j)` at rate `(1/N) * N * pi_{ij} = pi_{ij}`. Its law at time `t`
//! is `p0 exp(tQ)`, computed here by uniformization.

use crate::topo::{transition_probs, Configuration, Kernel};
use crate::{Error, Result};

use super::process::ProcessParams;

/// Largest state space handled (`4^4`).
pub const MAX_STATES: usize = 256;

/// Law over velocity-label states. State index is `sum_i label_i * a^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MasterLaw {
    pub n: usize,
    pub alphabet: usize,
    pub probs: Vec<f64>,
}

impl MasterLaw {
    pub fn state_index(&self, labels: &[usize]) -> usize {
        encode(labels, self.alphabet)
    }

    pub fn labels_of(&self, state: usize) -> Vec<usize> {
        decode(state, self.n, self.alphabet)
    }

    pub fn prob(&self, labels: &[usize]) -> f64 {
        self.probs[self.state_index(labels)]
    }

    /// `(1/2) sum |p - q|` against another law on the same state space.
    pub fn tv_distance(&self, other: &[f64]) -> f64 {
        0.5 * self.probs.iter().zip(other).map(|(p, q)| (p - q).abs()).sum::<f64>()
    }
}

fn encode(labels: &[usize], alphabet: usize) -> usize {
    labels.iter().rev().fold(0, |acc, &l| acc * alphabet + l)
}

fn decode(mut state: usize, n: usize, alphabet: usize) -> Vec<usize> {
    (0..n)
        .map(|_| {
            let l = state % alphabet;
            state /= alphabet;
            l
        })
        .collect()
}

/// Index of each particle's velocity in `alphabet` (exact match, d = 1).
pub fn label_state(config: &Configuration, alphabet: &[f64]) -> Result<Vec<usize>> {
    if config.dim() != 1 {
        return Err(Error::domain("velocity labels are defined for d = 1 only"));
    }
    config
        .velocities()
        .iter()
        .map(|v| {
            alphabet
                .iter()
                .position(|a| a == v)
                .ok_or_else(|| Error::domain(format!("velocity {v} is not in the alphabet")))
        })
        .collect()
}

fn state_count(n: usize, alphabet: usize) -> Result<usize> {
    let states = (alphabet as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if n > 4 || alphabet > 4 || states > MAX_STATES as u128 {
        return Err(Error::StateSpaceTooLarge {
            states: states.min(usize::MAX as u128) as usize,
            limit: MAX_STATES,
        });
    }
    Ok(states as usize)
}

/// Dense generator `Q` (row-major, rows sum to zero) of the label chain.
pub fn generator_matrix(kernel: &dyn Kernel, positions: &Configuration, alphabet: usize) -> Result<Vec<f64>> {
    let n = positions.len();
    let states = state_count(n, alphabet)?;
    let pi: Vec<Vec<f64>> = (0..n)
        .map(|i| transition_probs(positions, kernel, i))
        .collect::<Result<_>>()?;
    let mut q = vec![0.0; states * states];
    for s in 0..states {
        let labels = decode(s, n, alphabet);
        let mut out = 0.0;
        for i in 0..n {
            for j in 0..n {
                if j == i || labels[j] == labels[i] || pi[i][j] == 0.0 {
                    continue;
                }
                let mut next = labels.clone();
                next[i] = labels[j];
                q[s * states + encode(&next, alphabet)] += pi[i][j];
                out += pi[i][j];
            }
        }
        q[s * states + s] = -out;
    }
    Ok(q)
}

/// Exact law of the label chain at time `t`, starting from `initial_labels`.
pub fn master_equation_law(
    params: &ProcessParams,
    positions: &Configuration,
    initial_labels: &[usize],
    alphabet: usize,
    t: f64,
) -> Result<MasterLaw> {
    if !params.frozen_positions {
        return Err(Error::domain("the master-equation oracle needs frozen positions"));
    }
    params.validate()?;
    let n = positions.len();
    if n != params.n || initial_labels.len() != n {
        return Err(Error::domain("label vector, positions and params disagree on n"));
    }
    if initial_labels.iter().any(|&l| l >= alphabet) {
        return Err(Error::domain("label outside the alphabet"));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("time must be finite and >= 0, got {t}")));
    }
    let q = generator_matrix(params.kernel.as_ref(), positions, alphabet)?;
    let states = alphabet.pow(n as u32);
    let mut p = vec![0.0; states];
    p[encode(initial_labels, alphabet)] = 1.0;
    let probs = uniformize(&q, states, p, t);
    Ok(MasterLaw { n, alphabet, probs })
}

/// `p exp(tQ)` for a row vector `p`.
fn uniformize(q: &[f64], states: usize, mut p: Vec<f64>, t: f64) -> Vec<f64> {
    let rate = (0..states).map(|s| -q[s * states + s]).fold(0.0, f64::max);
    if rate == 0.0 || t == 0.0 {
        return p;
    }
    // P = I + Q / rate is stochastic
    let mut step = q.to_vec();
    for x in step.iter_mut() {
        *x /= rate;
    }
    for s in 0..states {
        step[s * states + s] += 1.0;
    }
    // keep rate * h small so that e^{-rate h} never underflows
    let pieces = (rate * t / 8.0).ceil().max(1.0) as usize;
    let h = t / pieces as f64;
    for _ in 0..pieces {
        p = uniformize_piece(&step, states, &p, rate * h);
    }
    p
}

fn uniformize_piece(step: &[f64], states: usize, p: &[f64], lt: f64) -> Vec<f64> {
    let mut term = p.to_vec();
    let mut weight = (-lt).exp();
    let mut acc: Vec<f64> = term.iter().map(|x| weight * x).collect();
    let mut covered = weight;
    let mut k = 0u32;
    while 1.0 - covered > 1e-17 && k < 500 {
        k += 1;
        let mut next = vec![0.0; states];
        for (s, &ps) in term.iter().enumerate() {
            if ps == 0.0 {
                continue;
            }
            let row = &step[s * states..(s + 1) * states];
            for (x, &r) in next.iter_mut().zip(row) {
                *x += ps * r;
            }
        }
        term = next;
        weight *= lt / k as f64;
        covered += weight;
        for (a, x) in acc.iter_mut().zip(&term) {
            *a += weight * x;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo::{Linear, Uniform};
    use std::sync::Arc;

    fn frozen(kernel: Arc<dyn Kernel>, n: usize) -> ProcessParams {
        let mut p = ProcessParams::new(kernel, n, 1.0, 0);
        p.frozen_positions = true;
        p
    }

    #[test]
    fn encoding_round_trip() {
        for s in 0..81 {
            assert_eq!(encode(&decode(s, 4, 3), 3), s);
        }
        assert_eq!(encode(&[1, 0, 0], 3), 1);
        assert_eq!(encode(&[0, 1, 0], 3), 3);
    }

    #[test]
    fn time_zero_is_the_initial_delta() {
        let c = Configuration::line(&[0.0, 0.2, 0.5], &[0.0; 3]).unwrap();
        let law = master_equation_law(&frozen(Arc::new(Linear), 3), &c, &[0, 1, 2], 3, 0.0).unwrap();
        assert_eq!(law.prob(&[0, 1, 2]), 1.0);
        assert_eq!(law.probs.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn two_particles_survive_with_exp_minus_two_t() {
        let c = Configuration::line(&[0.1, 0.6], &[0.0; 2]).unwrap();
        for t in [0.1, 0.5, 1.0, 3.0] {
            let law = master_equation_law(&frozen(Arc::new(Uniform), 2), &c, &[0, 1], 2, t).unwrap();
            assert!((law.prob(&[0, 1]) - (-2.0 * t).exp()).abs() < 1e-14);
            assert!((law.prob(&[0, 0]) - law.prob(&[1, 1])).abs() < 1e-15);
            assert_eq!(law.prob(&[1, 0]), 0.0);
        }
    }

    #[test]
    fn consensus_states_have_no_outflow() {
        let c = Configuration::line(&[0.0, 0.2, 0.45, 0.7], &[0.0; 4]).unwrap();
        let q = generator_matrix(&Linear, &c, 3).unwrap();
        let states = 81;
        for l in 0..3 {
            let s = encode(&[l; 4], 3);
            assert!(q[s * states..(s + 1) * states].iter().all(|&x| x == 0.0));
        }
        for s in 0..states {
            let row: f64 = q[s * states..(s + 1) * states].iter().sum();
            assert!(row.abs() < 1e-14);
        }
    }

    #[test]
    fn refuses_large_state_spaces() {
        let c = Configuration::line(&[0.0, 0.1, 0.2, 0.3, 0.4], &[0.0; 5]).unwrap();
        let r = master_equation_law(&frozen(Arc::new(Uniform), 5), &c, &[0; 5], 2, 1.0);
        assert!(matches!(r, Err(Error::StateSpaceTooLarge { .. })));
        let c = Configuration::line(&[0.0, 0.1, 0.2], &[0.0; 3]).unwrap();
        let r = master_equation_law(&frozen(Arc::new(Uniform), 3), &c, &[0; 3], 5, 1.0);
        assert!(matches!(r, Err(Error::StateSpaceTooLarge { .. })));
    }

    #[test]
    fn requires_frozen_positions() {
        let c = Configuration::line(&[0.0, 0.1, 0.2], &[0.0; 3]).unwrap();
        let p = ProcessParams::new(Arc::new(Uniform), 3, 1.0, 0);
        assert!(master_equation_law(&p, &c, &[0, 1, 2], 3, 1.0).is_err());
    }

    #[test]
    fn long_horizon_stays_normalized() {
        let c = Configuration::line(&[0.0, 0.2, 0.45, 0.7], &[0.0; 4]).unwrap();
        let law = master_equation_law(&frozen(Arc::new(Linear), 4), &c, &[0, 1, 2, 3], 4, 200.0).unwrap();
        assert!((law.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let consensus: f64 = (0..4).map(|l| law.prob(&[l; 4])).sum();
        assert!(consensus > 1.0 - 1e-9);
    }
}
