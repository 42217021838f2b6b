//! Pooled one-particle histograms on `[0,1) x [-v_max, v_max]` (d = 1).

use serde::{Deserialize, Serialize};

use super::initial::InitialLaw;
use super::process::Trajectory;
use crate::topo::Configuration;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub x_bins: usize,
    pub v_bins: usize,
    pub v_max: f64,
}

impl HistogramSpec {
    pub fn new(x_bins: usize, v_bins: usize, v_max: f64) -> Result<Self> {
        let s = HistogramSpec { x_bins, v_bins, v_max };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_bins == 0 || self.v_bins == 0 || !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return Err(Error::domain("histogram needs positive bin counts and v_max"));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.x_bins * self.v_bins
    }

    pub fn x_bin(&self, x: f64) -> usize {
        ((x * self.x_bins as f64) as usize).min(self.x_bins - 1)
    }

    /// Bin of `v`, `None` outside `[-v_max, v_max]`.
    pub fn v_bin(&self, v: f64) -> Option<usize> {
        if v.abs() > self.v_max {
            return None;
        }
        let u = (v + self.v_max) / (2.0 * self.v_max);
        Some(((u * self.v_bins as f64) as usize).min(self.v_bins - 1))
    }

    /// `[lo, hi)` bounds of velocity bin `k`.
    pub fn v_edges(&self, k: usize) -> (f64, f64) {
        let w = 2.0 * self.v_max / self.v_bins as f64;
        (-self.v_max + k as f64 * w, -self.v_max + (k + 1) as f64 * w)
    }
}

/// Cell probabilities, `mass[x * v_bins + v]`, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub spec: HistogramSpec,
    pub mass: Vec<f64>,
}

impl Histogram {
    pub fn from_masses(spec: HistogramSpec, mass: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if mass.len() != spec.cells() {
            return Err(Error::domain("mass vector does not match the histogram spec"));
        }
        Ok(Histogram { spec, mass })
    }

    pub fn of_configuration(config: &Configuration, spec: HistogramSpec) -> Result<Self> {
        spec.validate()?;
        if config.dim() != 1 {
            return Err(Error::domain("histograms are defined for d = 1 only"));
        }
        let mut mass = vec![0.0; spec.cells()];
        let w = 1.0 / config.len() as f64;
        for (&x, &v) in config.positions().iter().zip(config.velocities()) {
            let kv = spec
                .v_bin(v)
                .ok_or_else(|| Error::domain(format!("velocity {v} outside [-{0}, {0}]", spec.v_max)))?;
            mass[spec.x_bin(x) * spec.v_bins + kv] += w;
        }
        Ok(Histogram { spec, mass })
    }

    /// `f_0` integrated over each cell.
    pub fn of_law(law: &InitialLaw, spec: HistogramSpec) -> Result<Self> {
        spec.validate()?;
        let vp: Vec<f64> = (0..spec.v_bins)
            .map(|k| {
                let (lo, hi) = spec.v_edges(k);
                let hi = if k + 1 == spec.v_bins { f64::INFINITY } else { hi };
                let lo = if k == 0 { f64::NEG_INFINITY } else { lo };
                law.velocity.probability(lo, hi)
            })
            .collect();
        let mut mass = Vec::with_capacity(spec.cells());
        for ix in 0..spec.x_bins {
            let a = ix as f64 / spec.x_bins as f64;
            let b = (ix + 1) as f64 / spec.x_bins as f64;
            let px = law.density.cdf(b) - law.density.cdf(a);
            mass.extend(vp.iter().map(|p| px * p));
        }
        Ok(Histogram { spec, mass })
    }

    pub fn tv_distance(&self, other: &Histogram) -> Result<f64> {
        if self.spec != other.spec {
            return Err(Error::domain("histograms use different binnings"));
        }
        Ok(0.5 * self.mass.iter().zip(&other.mass).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }

    pub fn velocity_marginal(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.spec.v_bins];
        for row in self.mass.chunks(self.spec.v_bins) {
            for (gv, m) in g.iter_mut().zip(row) {
                *gv += m;
            }
        }
        g
    }

    pub fn position_marginal(&self) -> Vec<f64> {
        self.mass.chunks(self.spec.v_bins).map(|r| r.iter().sum()).collect()
    }
}

/// Pooled histogram of all particles at time `t`.
pub fn empirical_marginal(trajectory: &Trajectory, t: f64, spec: HistogramSpec) -> Result<Histogram> {
    if t > trajectory.horizon + 1e-12 {
        return Err(Error::domain(format!("t = {t} beyond the horizon {}", trajectory.horizon)));
    }
    Histogram::of_configuration(trajectory.snapshot_at(t)?, spec)
}
