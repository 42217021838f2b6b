//! Estimators of the distance between the particle and reference worlds.

use super::reference::ReferenceFrame;
use super::simulator::CoupledState;
use crate::particle::{Histogram, HistogramSpec};
use crate::topo::{torus_distance, Configuration, RankTable};
use crate::{Error, Result};

/// Fraction of decoupled pairs, `(1/n) sum_i d(z_i, sigma_i)`.
pub fn d_n(state: &CoupledState) -> f64 {
    state.decoupled() as f64 / state.len() as f64
}

/// Half the L1 distance between the pooled particle histogram and the binned reference law.
pub fn tv_estimate(particles: &Configuration, frame: &dyn ReferenceFrame, spec: HistogramSpec) -> Result<f64> {
    let empirical = Histogram::of_configuration(particles, spec)?;
    empirical.tv_distance(&frame.histogram(spec)?)
}

/// `mean_{focal, j} |M_Y(B_{|y_f - y_j|}(y_f)) - M_rho(same ball)|` over the given focal indices.
pub fn lln_diagnostic(sigma: &Configuration, frame: &dyn ReferenceFrame, focals: &[usize]) -> Result<f64> {
    if focals.is_empty() {
        return Err(Error::domain("lln diagnostic needs at least one focal index"));
    }
    let n = sigma.len();
    let mut table = RankTable::default();
    let mut total = 0.0;
    for &f in focals {
        table.rebuild(sigma, f)?;
        let yf = sigma.position(f);
        let mut acc = 0.0;
        for j in (0..n).filter(|&j| j != f) {
            let r = torus_distance(yf, sigma.position(j));
            acc += (table.ball_mass_through(j) - frame.ball_mass(yf, r)).abs();
        }
        total += acc / (n - 1) as f64;
    }
    Ok(total / focals.len() as f64)
}
