//! Reference (limit) dynamics seen by the Sigma world of the coupling.
//!
//! A [`ReferenceModel`] supplies, at any time in its horizon, a frame with
//! the continuum ball mass `M_rho(B_r(y))` and a sampler for the velocity
//! law `g_hat_y(u) ∝ \int K(M_rho(B_{|y - y'|}(y))) f(y', u) dy'` of the
//! nonlinear one-particle process.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::kinetic::{CollisionOperator, GridDensity, KineticSolution, KineticSolver, MassFunction, PhaseGrid};
use crate::particle::{Histogram, HistogramSpec, InitialLaw, UniformDensity, VelocityLaw};
use crate::registry::{Registry, StrategySpec};
use crate::rng::SimRng;
use crate::topo::Kernel;
use crate::{Error, Result};

pub trait ReferenceFrame {
    fn time(&self) -> f64;
    fn dim(&self) -> usize;
    /// `M_rho` of the closed torus ball of radius `r` around `center`.
    fn ball_mass(&self, center: &[f64], r: f64) -> f64;
    /// One draw from `g_hat` at `center`; kinetic frames return velocity-grid centers.
    fn draw_velocity(&self, kernel: &dyn Kernel, center: &[f64], rng: &mut SimRng) -> Result<Vec<f64>>;
    /// The one-particle law binned like a particle histogram (d = 1).
    fn histogram(&self, spec: HistogramSpec) -> Result<Histogram>;
}

pub trait ReferenceModel: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;
    fn dim(&self) -> usize;
    fn horizon(&self) -> f64;
    fn frame(&self, t: f64) -> Result<Box<dyn ReferenceFrame + '_>>;
}

/// Area of the closed disk of radius `r` on the unit 2-torus.
pub fn torus_disk_area(r: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else if r <= 0.5 {
        PI * r * r
    } else if r < std::f64::consts::FRAC_1_SQRT_2 {
        let cap = r * r * (0.5 / r).acos() - 0.5 * (r * r - 0.25).sqrt();
        PI * r * r - 4.0 * cap
    } else {
        1.0
    }
}

/// Spatially uniform `rho` with a time-independent velocity law: an exact
/// stationary solution on `T^d`, d in {1, 2}.
#[derive(Debug, Clone)]
pub struct HomogeneousReference {
    dim: usize,
    horizon: f64,
    velocity: Arc<dyn VelocityLaw>,
}

impl HomogeneousReference {
    pub fn new(dim: usize, horizon: f64, velocity: Arc<dyn VelocityLaw>) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::domain(format!("dimension must be 1 or 2, got {dim}")));
        }
        Ok(HomogeneousReference { dim, horizon, velocity })
    }
}

struct HomogeneousFrame<'a> {
    model: &'a HomogeneousReference,
    t: f64,
}

impl ReferenceFrame for HomogeneousFrame<'_> {
    fn time(&self) -> f64 {
        self.t
    }

    fn dim(&self) -> usize {
        self.model.dim
    }

    fn ball_mass(&self, _center: &[f64], r: f64) -> f64 {
        if self.model.dim == 1 {
            (2.0 * r).clamp(0.0, 1.0)
        } else {
            torus_disk_area(r)
        }
    }

    fn draw_velocity(&self, _kernel: &dyn Kernel, _center: &[f64], rng: &mut SimRng) -> Result<Vec<f64>> {
        // the coarea identity is exact for uniform rho, so g_hat = g
        Ok((0..self.model.dim).map(|_| self.model.velocity.sample(rng)).collect())
    }

    fn histogram(&self, spec: HistogramSpec) -> Result<Histogram> {
        if self.model.dim != 1 {
            return Err(Error::domain("reference histograms are defined for d = 1 only"));
        }
        let law = InitialLaw {
            density: Arc::new(UniformDensity),
            velocity: self.model.velocity.clone(),
        };
        Histogram::of_law(&law, spec)
    }
}

impl ReferenceModel for HomogeneousReference {
    fn name(&self) -> &'static str {
        "homogeneous"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn frame(&self, t: f64) -> Result<Box<dyn ReferenceFrame + '_>> {
        if !(0.0..=self.horizon + 1e-12).contains(&t) {
            return Err(Error::MissingSnapshot(t));
        }
        Ok(Box::new(HomogeneousFrame { model: self, t }))
    }
}

/// Numerical solution of the kinetic equation (d = 1), interpolated linearly in time.
#[derive(Debug, Clone)]
pub struct KineticReference {
    solution: Arc<KineticSolution>,
    masses: Vec<MassFunction>,
}

impl KineticReference {
    pub fn new(solution: Arc<KineticSolution>) -> Result<Self> {
        if solution.frames.is_empty() {
            return Err(Error::domain("kinetic reference needs at least one frame"));
        }
        let masses = solution.frames.iter().map(|f| MassFunction::new(&f.density())).collect();
        Ok(KineticReference { solution, masses })
    }

    pub fn solution(&self) -> &KineticSolution {
        &self.solution
    }

    pub fn grid(&self) -> PhaseGrid {
        self.solution.frames[0].grid
    }
}

struct KineticFrame<'a> {
    model: &'a KineticReference,
    t: f64,
    a: usize,
    theta: f64,
}

impl KineticFrame<'_> {
    fn frames(&self) -> (&GridDensity, &GridDensity) {
        let fr = &self.model.solution.frames;
        let b = if self.theta > 0.0 { self.a + 1 } else { self.a };
        (&fr[self.a], &fr[b])
    }

    fn mass_at(&self, x: f64, r: f64) -> f64 {
        let ma = self.model.masses[self.a].ball_mass(x, r);
        if self.theta == 0.0 {
            ma
        } else {
            let mb = self.model.masses[self.a + 1].ball_mass(x, r);
            (1.0 - self.theta) * ma + self.theta * mb
        }
    }
}

impl ReferenceFrame for KineticFrame<'_> {
    fn time(&self) -> f64 {
        self.t
    }

    fn dim(&self) -> usize {
        1
    }

    fn ball_mass(&self, center: &[f64], r: f64) -> f64 {
        self.mass_at(center[0], r)
    }

    fn draw_velocity(&self, kernel: &dyn Kernel, center: &[f64], rng: &mut SimRng) -> Result<Vec<f64>> {
        let grid = self.model.grid();
        let (fa, fb) = self.frames();
        let x = center[0];
        let mut g = vec![0.0; grid.nv];
        for j in 0..grid.nx {
            let d = (x - grid.x_center(j)).abs();
            let w = kernel.value(self.mass_at(x, d.min(1.0 - d)));
            if w == 0.0 {
                continue;
            }
            for (k, gk) in g.iter_mut().enumerate() {
                let f = (1.0 - self.theta) * fa.at(j, k) + self.theta * fb.at(j, k);
                *gk += w * f;
            }
        }
        let pick = WeightedIndex::new(&g)
            .map_err(|e| Error::InvariantViolation(format!("reference velocity law at x = {x}: {e}")))?;
        Ok(vec![grid.v_center(pick.sample(rng))])
    }

    fn histogram(&self, spec: HistogramSpec) -> Result<Histogram> {
        spec.validate()?;
        let grid = self.model.grid();
        let (fa, fb) = self.frames();
        let w = grid.dx() * grid.dv();
        let mut mass = vec![0.0; spec.cells()];
        for i in 0..grid.nx {
            let bx = spec.x_bin(grid.x_center(i));
            for k in 0..grid.nv {
                let bv = spec.v_bin(grid.v_center(k)).ok_or_else(|| {
                    Error::domain(format!("velocity grid exceeds histogram range {}", spec.v_max))
                })?;
                mass[bx * spec.v_bins + bv] += w * ((1.0 - self.theta) * fa.at(i, k) + self.theta * fb.at(i, k));
            }
        }
        Histogram::from_masses(spec, mass)
    }
}

impl ReferenceModel for KineticReference {
    fn name(&self) -> &'static str {
        "kinetic"
    }

    fn dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> f64 {
        self.solution.end()
    }

    fn frame(&self, t: f64) -> Result<Box<dyn ReferenceFrame + '_>> {
        let (a, theta) = self.solution.bracket(t)?;
        Ok(Box::new(KineticFrame { model: self, t, a, theta }))
    }
}

/// Everything a reference builder may need; `form` selects the model.
#[derive(Debug, Clone)]
pub struct ReferenceSpec {
    pub form: String,
    pub kernel: Arc<dyn Kernel>,
    pub law: InitialLaw,
    pub dim: usize,
    pub horizon: f64,
    pub grid: PhaseGrid,
    pub dt: f64,
    /// Reused instead of solving when present (kinetic form).
    pub solution: Option<Arc<KineticSolution>>,
}

impl StrategySpec for ReferenceSpec {
    fn form(&self) -> &str {
        &self.form
    }
}

pub fn reference_registry() -> Registry<ReferenceSpec, dyn ReferenceModel> {
    let mut reg: Registry<ReferenceSpec, dyn ReferenceModel> = Registry::new("reference model");
    reg.register("kinetic", |s| {
        if s.dim != 1 {
            return Err(Error::domain("the kinetic reference is one-dimensional"));
        }
        let solution = match &s.solution {
            Some(sol) => sol.clone(),
            None => Arc::new(solve_reference(s)?),
        };
        Ok(Arc::new(KineticReference::new(solution)?))
    })
    .register("homogeneous", |s| {
        if s.law.density.name() != "uniform" {
            return Err(Error::domain("the homogeneous reference needs a uniform spatial density"));
        }
        Ok(Arc::new(HomogeneousReference::new(s.dim, s.horizon, s.law.velocity.clone())?))
    });
    reg
}

/// Kinetic solution with every step stored, as used by the kinetic reference.
pub fn solve_reference(spec: &ReferenceSpec) -> Result<KineticSolution> {
    let f0 = GridDensity::from_law(&spec.law, spec.grid)?;
    let solver = KineticSolver::new(CollisionOperator::new(spec.kernel.clone()), spec.dt)?;
    solver.solve_trajectory(&f0, spec.horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particle::{DensitySpec, InitialLawSpec, VelocitySpec};
    use crate::rng::stream_rng;
    use crate::topo::Linear;

    fn spec(form: &str, density: DensitySpec) -> ReferenceSpec {
        ReferenceSpec {
            form: form.into(),
            kernel: Arc::new(Linear),
            law: InitialLaw::from_spec(&InitialLawSpec {
                density,
                velocity: VelocitySpec::discrete(&[-0.75, -0.25, 0.25, 0.75], &[]),
            })
            .unwrap(),
            dim: 1,
            horizon: 0.25,
            grid: PhaseGrid::new(64, 4, 1.0).unwrap(),
            dt: 1.0 / 16.0,
            solution: None,
        }
    }

    #[test]
    fn disk_area_is_continuous_and_monotone() {
        let mut prev = 0.0;
        for k in 1..=1000 {
            let r = k as f64 * 0.75 / 1000.0;
            let a = torus_disk_area(r);
            assert!(a >= prev - 1e-15 && a <= 1.0);
            prev = a;
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((torus_disk_area(s - 1e-9) - 1.0).abs() < 1e-6);
        assert!((torus_disk_area(0.5) - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn disk_area_matches_monte_carlo() {
        use rand::Rng;
        let mut rng = stream_rng(3, 0);
        let r = 0.6;
        let n = 200_000;
        let hits = (0..n)
            .filter(|_| {
                let (x, y): (f64, f64) = (rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                (x * x + y * y).sqrt() <= r
            })
            .count();
        let p = hits as f64 / n as f64;
        assert!((p - torus_disk_area(r)).abs() < 4.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn registry_builds_both_models() {
        let reg = reference_registry();
        let k = reg.build(&spec("kinetic", DensitySpec::cosine(0.5))).unwrap();
        assert_eq!(k.horizon(), 0.25);
        let frame = k.frame(0.1).unwrap();
        assert!((frame.ball_mass(&[0.3], 0.5) - 1.0).abs() < 1e-10);
        assert!(frame.ball_mass(&[0.3], 0.1) > 0.0);
        assert!(k.frame(0.3).is_err());
        assert!(reg.build(&spec("homogeneous", DensitySpec::cosine(0.5))).is_err());
        let h = reg.build(&spec("homogeneous", DensitySpec::named("uniform"))).unwrap();
        assert_eq!(h.frame(0.0).unwrap().ball_mass(&[0.1], 0.2), 0.4);
        assert!(reg.build(&spec("exact", DensitySpec::named("uniform"))).is_err());
    }

    #[test]
    fn kinetic_draws_stay_on_grid_atoms() {
        let reg = reference_registry();
        let k = reg.build(&spec("kinetic", DensitySpec::cosine(0.5))).unwrap();
        let frame = k.frame(0.2).unwrap();
        let mut rng = stream_rng(1, 0);
        let mut counts = [0usize; 4];
        for _ in 0..4000 {
            let v = frame.draw_velocity(&Linear, &[0.4], &mut rng).unwrap()[0];
            let idx = [-0.75, -0.25, 0.25, 0.75].iter().position(|&a| a == v).unwrap();
            counts[idx] += 1;
        }
        assert!(counts.iter().all(|&c| c > 800));
        let h = frame.histogram(HistogramSpec::new(8, 4, 1.0).unwrap()).unwrap();
        assert!((h.mass.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }
}
