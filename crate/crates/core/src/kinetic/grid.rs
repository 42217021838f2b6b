//! Phase-space grid on `[0,1) x [-v_max, v_max]` and cell-averaged densities.

use serde::{Deserialize, Serialize};

use crate::particle::InitialLaw;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub nx: usize,
    pub nv: usize,
    pub v_max: f64,
}

impl PhaseGrid {
    pub fn new(nx: usize, nv: usize, v_max: f64) -> Result<Self> {
        let g = PhaseGrid { nx, nv, v_max };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.nv == 0 || !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return Err(Error::domain(format!(
                "grid needs nx >= 2, nv >= 1 and a positive v_max (got {}, {}, {})",
                self.nx, self.nv, self.v_max
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        1.0 / self.nx as f64
    }

    #[inline]
    pub fn dv(&self) -> f64 {
        2.0 * self.v_max / self.nv as f64
    }

    pub fn x_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    pub fn v_center(&self, k: usize) -> f64 {
        -self.v_max + (k as f64 + 0.5) * self.dv()
    }

    /// Index of the velocity cell containing `v` (clamped to the grid).
    pub fn v_index(&self, v: f64) -> usize {
        let u = (v + self.v_max) / self.dv();
        (u.max(0.0) as usize).min(self.nv - 1)
    }

    pub fn x_index(&self, x: f64) -> usize {
        ((x * self.nx as f64) as usize).min(self.nx - 1)
    }

    pub fn cells(&self) -> usize {
        self.nx * self.nv
    }
}

/// Cell averages `f[x * nv + v]` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    pub grid: PhaseGrid,
    pub t: f64,
    pub values: Vec<f64>,
}

impl GridDensity {
    pub fn new(grid: PhaseGrid, t: f64, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.cells() {
            return Err(Error::domain(format!(
                "expected {} values for a {}x{} grid, got {}",
                grid.cells(),
                grid.nx,
                grid.nv,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::domain(format!("grid density must be finite and nonnegative, found {v}")));
        }
        Ok(GridDensity { grid, t, values })
    }

    /// Cell averages of the product law `rho_0 (x) g_0` at `t = 0`.
    pub fn from_law(law: &InitialLaw, grid: PhaseGrid) -> Result<Self> {
        grid.validate()?;
        let (dx, dv) = (grid.dx(), grid.dv());
        let vmass: Vec<f64> = (0..grid.nv)
            .map(|k| {
                let lo = if k == 0 { f64::NEG_INFINITY } else { -grid.v_max + k as f64 * dv };
                let hi = if k + 1 == grid.nv { f64::INFINITY } else { -grid.v_max + (k + 1) as f64 * dv };
                law.velocity.probability(lo, hi)
            })
            .collect();
        if law.velocity.speed_bound() > grid.v_max {
            return Err(Error::domain(format!(
                "velocity support reaches {} beyond v_max = {}",
                law.velocity.speed_bound(),
                grid.v_max
            )));
        }
        let mut values = Vec::with_capacity(grid.cells());
        for i in 0..grid.nx {
            let xm = law.density.cdf((i + 1) as f64 * dx) - law.density.cdf(i as f64 * dx);
            values.extend(vmass.iter().map(|vm| xm * vm / (dx * dv)));
        }
        let mut f = GridDensity { grid, t: 0.0, values };
        f.renormalize();
        Ok(f)
    }

    /// `f[x][v] = g[v]` for every x, with `g` given as cell probabilities.
    pub fn homogeneous(grid: PhaseGrid, velocity_mass: &[f64]) -> Result<Self> {
        if velocity_mass.len() != grid.nv {
            return Err(Error::domain("velocity mass vector does not match nv"));
        }
        let total: f64 = velocity_mass.iter().sum();
        let dv = grid.dv();
        let row: Vec<f64> = velocity_mass.iter().map(|m| m / (total * dv)).collect();
        let values = (0..grid.nx).flat_map(|_| row.iter().copied()).collect();
        GridDensity::new(grid, 0.0, values)
    }

    #[inline]
    pub fn at(&self, x: usize, v: usize) -> f64 {
        self.values[x * self.grid.nv + v]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.values[x * self.grid.nv..(x + 1) * self.grid.nv]
    }

    /// `rho[x] = sum_v f[x][v] dv`.
    pub fn density(&self) -> Vec<f64> {
        let dv = self.grid.dv();
        self.values.chunks(self.grid.nv).map(|r| r.iter().sum::<f64>() * dv).collect()
    }

    /// `sum f dx dv`.
    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx() * self.grid.dv()
    }

    /// Probability of each velocity cell, `sum_x f[x][v] dx dv`.
    pub fn velocity_mass(&self) -> Vec<f64> {
        let w = self.grid.dx() * self.grid.dv();
        let mut g = vec![0.0; self.grid.nv];
        for r in self.values.chunks(self.grid.nv) {
            for (gv, f) in g.iter_mut().zip(r) {
                *gv += f * w;
            }
        }
        g
    }

    pub fn l1_distance(&self, other: &GridDensity) -> Result<f64> {
        self.same_grid(other)?;
        let w = self.grid.dx() * self.grid.dv();
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum::<f64>() * w)
    }

    pub fn max_abs_diff(&self, other: &GridDensity) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Scale to unit mass; returns the factor applied.
    pub fn renormalize(&mut self) -> f64 {
        let factor = 1.0 / self.total_mass();
        for v in &mut self.values {
            *v *= factor;
        }
        factor
    }

    fn same_grid(&self, other: &GridDensity) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::domain("grid densities live on different grids"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particle::{DensitySpec, InitialLawSpec, VelocitySpec};

    #[test]
    fn uniform_law_has_unit_density() {
        let law = InitialLaw::from_spec(&InitialLawSpec {
            density: DensitySpec::named("uniform"),
            velocity: VelocitySpec::with_speed("uniform", 1.0),
        })
        .unwrap();
        let f = GridDensity::from_law(&law, PhaseGrid::new(16, 8, 1.0).unwrap()).unwrap();
        for r in f.density() {
            assert!((r - 1.0).abs() < 1e-14);
        }
        assert!((f.total_mass() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn product_law_bins_rho() {
        let law = InitialLaw::from_spec(&InitialLawSpec {
            density: DensitySpec::cosine(0.5),
            velocity: VelocitySpec::discrete(&[-0.75, -0.25, 0.25, 0.75], &[]),
        })
        .unwrap();
        let grid = PhaseGrid::new(32, 4, 1.0).unwrap();
        let f = GridDensity::from_law(&law, grid).unwrap();
        for (i, r) in f.density().iter().enumerate() {
            let exact = (law.density.cdf((i + 1) as f64 / 32.0) - law.density.cdf(i as f64 / 32.0)) * 32.0;
            assert!((r - exact).abs() < 1e-13);
        }
        for m in f.velocity_mass() {
            assert!((m - 0.25).abs() < 1e-14);
        }
        assert_eq!(grid.v_center(0), -0.75);
        assert_eq!(grid.v_index(0.75), 3);
    }

    #[test]
    fn random_nonnegative_normalizes() {
        use rand::Rng;
        let grid = PhaseGrid::new(20, 6, 2.0).unwrap();
        let mut rng = crate::rng::stream_rng(1, 0);
        let values = (0..grid.cells()).map(|_| rng.random::<f64>()).collect();
        let mut f = GridDensity::new(grid, 0.0, values).unwrap();
        f.renormalize();
        let s: f64 = f.density().iter().sum::<f64>() * grid.dx();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let grid = PhaseGrid::new(4, 2, 1.0).unwrap();
        assert!(GridDensity::new(grid, 0.0, vec![1.0; 7]).is_err());
        assert!(GridDensity::new(grid, 0.0, vec![-1.0; 8]).is_err());
        assert!(PhaseGrid::new(1, 2, 1.0).is_err());
    }
}
