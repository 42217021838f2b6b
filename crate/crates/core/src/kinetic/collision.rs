//! The collision (velocity-adoption) operator of the kinetic equation.
//!
//! For a focal cell `x` the gain is
//! `G[x][v] = rho[x] dx sum_y K(m(x, |x - y|)) f[y][v]`,
//! where `m` is the exact ball mass of the cell-constant `rho` evaluated at
//! cell-center distances. Summed over `y` with weights `rho[y]`, the kernel
//! factor reproduces `\int K(M_rho(B_{|x-y|}(x))) rho(y) dy = 1` up to a
//! trapezoid error in the radius; that defect is the coarea residual.

use std::sync::Arc;

use rayon::prelude::*;

use super::grid::GridDensity;
use super::mass::MassFunction;
use crate::topo::Kernel;

#[derive(Debug, Clone)]
pub struct CollisionOperator {
    kernel: Arc<dyn Kernel>,
    weight_scale: f64,
}

/// Gain term together with the per-cell kernel sums `S[x]`.
#[derive(Debug, Clone)]
pub struct Gain {
    pub values: Vec<f64>,
    /// `S[x] = dx sum_y W[x][y] rho[y]`, which should be 1.
    pub kernel_sums: Vec<f64>,
}

#[inline]
fn circular_offset(i: usize, j: usize, nx: usize) -> usize {
    let d = i.abs_diff(j);
    d.min(nx - d)
}

impl CollisionOperator {
    pub fn new(kernel: Arc<dyn Kernel>) -> Self {
        CollisionOperator {
            kernel,
            weight_scale: 1.0,
        }
    }

    /// Multiplies every quadrature weight; anything but 1 breaks the coarea identity.
    pub fn with_weight_scale(mut self, scale: f64) -> Self {
        self.weight_scale = scale;
        self
    }

    pub fn kernel(&self) -> &Arc<dyn Kernel> {
        &self.kernel
    }

    pub fn weight_scale(&self) -> f64 {
        self.weight_scale
    }

    /// `W[i][k] = K(m(x_i, k dx))` for `k = 0..=nx/2`.
    fn row_weights(&self, mass: &MassFunction, i: usize, buf: &mut Vec<f64>) {
        mass.radius_profile(i, buf);
        for w in buf.iter_mut() {
            *w = self.weight_scale * self.kernel.value(*w);
        }
    }

    pub fn gain(&self, f: &GridDensity) -> Gain {
        let grid = f.grid;
        let (nx, nv, dx) = (grid.nx, grid.nv, grid.dx());
        let rho = f.density();
        let mass = MassFunction::new(&rho);
        let rows: Vec<(Vec<f64>, f64)> = (0..nx)
            .into_par_iter()
            .map_init(Vec::new, |buf, i| {
                self.row_weights(&mass, i, buf);
                let mut acc = vec![0.0; nv];
                let mut s = 0.0;
                for j in 0..nx {
                    let w = buf[circular_offset(i, j, nx)];
                    if w == 0.0 {
                        continue;
                    }
                    s += w * rho[j];
                    for (a, fv) in acc.iter_mut().zip(f.row(j)) {
                        *a += w * fv;
                    }
                }
                for a in acc.iter_mut() {
                    *a *= rho[i] * dx;
                }
                (acc, s * dx)
            })
            .collect();
        let mut values = Vec::with_capacity(grid.cells());
        let mut kernel_sums = Vec::with_capacity(nx);
        for (row, s) in rows {
            values.extend(row);
            kernel_sums.push(s);
        }
        Gain { values, kernel_sums }
    }

    /// Signed `S[x] - 1` per cell (no gain assembly).
    pub fn coarea_residuals(&self, f: &GridDensity) -> Vec<f64> {
        let nx = f.grid.nx;
        let dx = f.grid.dx();
        let rho = f.density();
        let mass = MassFunction::new(&rho);
        (0..nx)
            .into_par_iter()
            .map_init(Vec::new, |buf, i| {
                self.row_weights(&mass, i, buf);
                let s: f64 = (0..nx).map(|j| buf[circular_offset(i, j, nx)] * rho[j]).sum();
                s * dx - 1.0
            })
            .collect()
    }

    /// `|S[x] - 1|` per cell.
    pub fn coarea_check(&self, f: &GridDensity) -> Vec<f64> {
        self.coarea_residuals(f).into_iter().map(f64::abs).collect()
    }

    /// Kernel factor `W(x, y) = K(M_rho(B_{|x-y|}(x)))` for a continuous focal point
    /// against every cell center `y`.
    pub fn point_weights(&self, mass: &MassFunction, x: f64, out: &mut Vec<f64>) {
        let nx = mass.nx();
        let dx = 1.0 / nx as f64;
        out.clear();
        out.extend((0..nx).map(|j| {
            let y = (j as f64 + 0.5) * dx;
            let d = (x - y).abs();
            let r = d.min(1.0 - d);
            self.weight_scale * self.kernel.value(mass.ball_mass(x, r))
        }));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetic::PhaseGrid;
    use crate::topo::{Linear, Uniform};

    fn cosine_f(nx: usize, nv: usize) -> GridDensity {
        let grid = PhaseGrid::new(nx, nv, 1.0).unwrap();
        let dv = grid.dv();
        let mut values = Vec::new();
        for i in 0..nx {
            let x = grid.x_center(i);
            let rho = 1.0 + 0.5 * (std::f64::consts::TAU * x).cos();
            for k in 0..nv {
                let g = if k % 2 == 0 { 0.7 } else { 0.3 };
                values.push(rho * g * 2.0 / (nv as f64 * dv));
            }
        }
        let mut f = GridDensity::new(grid, 0.0, values).unwrap();
        f.renormalize();
        f
    }

    #[test]
    fn uniform_kernel_gain_is_rho_times_g() {
        let f = cosine_f(32, 4);
        let op = CollisionOperator::new(Arc::new(Uniform));
        let g = op.gain(&f);
        let rho = f.density();
        let dx = f.grid.dx();
        for i in 0..32 {
            for v in 0..4 {
                let gv: f64 = (0..32).map(|j| f.at(j, v) * dx).sum();
                assert!((g.values[i * 4 + v] - rho[i] * gv).abs() < 1e-13);
            }
        }
        for r in op.coarea_check(&f) {
            assert!(r < 1e-10);
        }
    }

    #[test]
    fn homogeneous_state_is_a_gain_fixed_point() {
        let grid = PhaseGrid::new(64, 4, 1.0).unwrap();
        let f = GridDensity::homogeneous(grid, &[0.1, 0.2, 0.3, 0.4]).unwrap();
        let g = CollisionOperator::new(Arc::new(Linear)).gain(&f);
        for (a, b) in g.values.iter().zip(&f.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn collision_neutrality_matches_residual() {
        let f = cosine_f(64, 4);
        let op = CollisionOperator::new(Arc::new(Linear));
        let g = op.gain(&f);
        let res = op.coarea_residuals(&f);
        let rho = f.density();
        let dv = f.grid.dv();
        for i in 0..64 {
            let net: f64 = (0..4).map(|v| (g.values[i * 4 + v] - f.at(i, v)) * dv).sum();
            assert!((net - rho[i] * res[i]).abs() < 1e-12, "cell {i}");
            assert!((g.kernel_sums[i] - 1.0 - res[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn residual_shrinks_under_refinement() {
        let op = CollisionOperator::new(Arc::new(Linear));
        let coarse = op.coarea_check(&cosine_f(128, 2)).into_iter().fold(0.0, f64::max);
        let fine = op.coarea_check(&cosine_f(256, 2)).into_iter().fold(0.0, f64::max);
        assert!(coarse < 5e-3);
        assert!(fine <= coarse / 2.0, "{coarse} -> {fine}");
    }

    #[test]
    fn four_cell_concentrated_density() {
        // all mass in cell 0: the kernel row of cell 0 sees only itself at radius 0
        let grid = PhaseGrid::new(4, 2, 1.0).unwrap();
        let f = GridDensity::new(grid, 0.0, vec![2.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let g = CollisionOperator::new(Arc::new(Linear)).gain(&f);
        // rho_0 = 4, m(x_0, 0) = 0, K(0) = 2: G = 4 * 0.25 * 2 * 2 = 4
        assert!((g.values[0] - 4.0).abs() < 1e-14);
        assert!((g.values[1] - 4.0).abs() < 1e-14);
        assert!(g.values[2..].iter().all(|&v| v == 0.0));
    }
}
