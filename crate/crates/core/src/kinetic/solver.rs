//! Strang splitting: half transport, explicit collision, half transport.

use super::collision::CollisionOperator;
use super::grid::GridDensity;
use crate::{Error, Result};

/// Shifts closer than this to a whole number of cells are treated as exact.
const SHIFT_SNAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// `mass_after_collision - mass_before`, measured before renormalization.
    pub mass_drift: f64,
    /// Multiplicative correction applied afterwards.
    pub renormalization: f64,
}

/// Aggregated mass bookkeeping over a solve.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MassLog {
    pub steps: usize,
    pub max_step_drift: f64,
    /// Sum of signed per-step drifts.
    pub cumulative_drift: f64,
}

impl MassLog {
    fn record(&mut self, r: &StepReport) {
        self.steps += 1;
        self.max_step_drift = self.max_step_drift.max(r.mass_drift.abs());
        self.cumulative_drift += r.mass_drift;
    }
}

#[derive(Debug, Clone)]
pub struct KineticSolver {
    op: CollisionOperator,
    dt: f64,
}

/// Frames of a solve at increasing times, for interpolation in `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticSolution {
    pub frames: Vec<GridDensity>,
    pub log: MassLog,
}

/// Semi-Lagrangian periodic shift of each velocity column by `v * tau`.
pub fn transport(f: &GridDensity, tau: f64) -> GridDensity {
    let grid = f.grid;
    let (nx, nv) = (grid.nx, grid.nv);
    let mut out = vec![0.0; grid.cells()];
    for k in 0..nv {
        let cells = grid.v_center(k) * tau / grid.dx();
        let mut p = cells.floor();
        let mut theta = cells - p;
        if theta < SHIFT_SNAP {
            theta = 0.0;
        } else if 1.0 - theta < SHIFT_SNAP {
            theta = 0.0;
            p += 1.0;
        }
        let p = (p as i64).rem_euclid(nx as i64) as usize;
        for i in 0..nx {
            let a = (i + nx - p) % nx;
            let b = (a + nx - 1) % nx;
            out[i * nv + k] = if theta == 0.0 {
                f.values[a * nv + k]
            } else {
                (1.0 - theta) * f.values[a * nv + k] + theta * f.values[b * nv + k]
            };
        }
    }
    GridDensity {
        grid,
        t: f.t,
        values: out,
    }
}

impl KineticSolver {
    pub fn new(op: CollisionOperator, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt <= 1.0) {
            return Err(Error::domain(format!("kinetic step must lie in (0, 1], got {dt}")));
        }
        Ok(KineticSolver { op, dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn operator(&self) -> &CollisionOperator {
        &self.op
    }

    /// `f <- (1 - h) f + h G[f]`.
    pub fn collide(&self, f: &GridDensity, h: f64) -> Result<GridDensity> {
        let gain = self.op.gain(f);
        let mut values = Vec::with_capacity(f.values.len());
        for (fv, gv) in f.values.iter().zip(&gain.values) {
            let v = (1.0 - h) * fv + h * gv;
            if v < -1e-12 {
                return Err(Error::SolverInstability(format!("collision produced {v} at t = {}", f.t)));
            }
            values.push(v.max(0.0));
        }
        Ok(GridDensity {
            grid: f.grid,
            t: f.t,
            values,
        })
    }

    /// One splitting step of length `h <= 1`.
    pub fn step_by(&self, f: &GridDensity, h: f64) -> Result<(GridDensity, StepReport)> {
        if !(h > 0.0 && h <= 1.0) {
            return Err(Error::domain(format!("step length must lie in (0, 1], got {h}")));
        }
        let before = f.total_mass();
        let half = transport(f, 0.5 * h);
        let mut mid = self.collide(&half, h)?;
        let mass_drift = mid.total_mass() - before;
        let renormalization = mid.renormalize();
        let mut next = transport(&mid, 0.5 * h);
        next.t = f.t + h;
        Ok((
            next,
            StepReport {
                mass_drift,
                renormalization,
            },
        ))
    }

    pub fn step(&self, f: &GridDensity) -> Result<(GridDensity, StepReport)> {
        self.step_by(f, self.dt)
    }

    /// Advance from `f.t` to exactly `target`, shortening the last step.
    fn march(&self, f: GridDensity, target: f64, log: &mut MassLog) -> Result<GridDensity> {
        let mut f = f;
        let start = f.t;
        let steps = ((target - start) / self.dt - 1e-9).ceil().max(0.0) as usize;
        for k in 0..steps {
            let h = if k + 1 == steps { target - f.t } else { self.dt };
            let (next, report) = self.step_by(&f, h)?;
            log.record(&report);
            f = next;
            f.t = if k + 1 == steps { target } else { start + (k + 1) as f64 * self.dt };
        }
        Ok(f)
    }

    /// Snapshots at the requested (sorted) times in `[f0.t, horizon]`.
    pub fn solve(&self, f0: &GridDensity, horizon: f64, snapshot_times: &[f64]) -> Result<Vec<GridDensity>> {
        Ok(self.solve_logged(f0, horizon, snapshot_times)?.frames)
    }

    pub fn solve_logged(&self, f0: &GridDensity, horizon: f64, snapshot_times: &[f64]) -> Result<KineticSolution> {
        if !(horizon >= f0.t) {
            return Err(Error::domain(format!("horizon {horizon} precedes the initial time {}", f0.t)));
        }
        if snapshot_times.windows(2).any(|w| w[1] < w[0])
            || snapshot_times.iter().any(|&t| t < f0.t || t > horizon)
        {
            return Err(Error::domain("snapshot times must be sorted and inside the horizon"));
        }
        let mut log = MassLog::default();
        let mut frames = Vec::with_capacity(snapshot_times.len());
        let mut f = f0.clone();
        for &t in snapshot_times {
            f = self.march(f, t, &mut log)?;
            frames.push(f.clone());
        }
        Ok(KineticSolution { frames, log })
    }

    /// Every step stored from `f0.t` through `horizon`.
    pub fn solve_trajectory(&self, f0: &GridDensity, horizon: f64) -> Result<KineticSolution> {
        if !(horizon >= f0.t) {
            return Err(Error::domain(format!("horizon {horizon} precedes the initial time {}", f0.t)));
        }
        let steps = ((horizon - f0.t) / self.dt - 1e-9).ceil().max(0.0) as usize;
        let times: Vec<f64> = std::iter::once(f0.t)
            .chain((1..=steps).map(|k| (f0.t + k as f64 * self.dt).min(horizon)))
            .collect();
        self.solve_logged(f0, horizon, &times)
    }
}

impl KineticSolution {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.frames.iter().map(|f| f.t)
    }

    pub fn start(&self) -> f64 {
        self.frames.first().map_or(0.0, |f| f.t)
    }

    pub fn end(&self) -> f64 {
        self.frames.last().map_or(0.0, |f| f.t)
    }

    /// Frames `a`, `a + 1` and weight `theta` with `t = (1 - theta) t_a + theta t_{a+1}`.
    pub fn bracket(&self, t: f64) -> Result<(usize, f64)> {
        let n = self.frames.len();
        if n == 0 || t < self.start() - 1e-12 || t > self.end() + 1e-12 {
            return Err(Error::MissingSnapshot(t));
        }
        if n == 1 {
            return Ok((0, 0.0));
        }
        let b = self.frames.partition_point(|f| f.t <= t).clamp(1, n - 1);
        let (ta, tb) = (self.frames[b - 1].t, self.frames[b].t);
        Ok((b - 1, ((t - ta) / (tb - ta)).clamp(0.0, 1.0)))
    }

    /// Linear-in-time interpolation between stored frames.
    pub fn at(&self, t: f64) -> Result<GridDensity> {
        let (a, theta) = self.bracket(t)?;
        let fa = &self.frames[a];
        if theta == 0.0 {
            return Ok(GridDensity { t, ..fa.clone() });
        }
        let fb = &self.frames[a + 1];
        let values = fa.values.iter().zip(&fb.values).map(|(x, y)| (1.0 - theta) * x + theta * y).collect();
        Ok(GridDensity {
            grid: fa.grid,
            t,
            values,
        })
    }

    pub fn last(&self) -> Option<&GridDensity> {
        self.frames.last()
    }
}
