//! Product initial laws `f_0 = rho_0(x) (x) g_0(v)` and i.i.d. sampling.
//!
//! Densities live on the unit circle; in two dimensions each coordinate is
//! drawn independently from the same density (and each velocity component
//! from the same velocity law).

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::registry::{Registry, StrategySpec};
use crate::rng::{stream_rng, SimRng};
use crate::topo::Configuration;
use crate::{Error, Result};

pub trait SpatialDensity: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;
    fn pdf(&self, x: f64) -> f64;
    /// `\int_0^x rho` for `x in [0, 1]`.
    fn cdf(&self, x: f64) -> f64;
    fn spec(&self) -> DensitySpec;

    /// Inverse-CDF sample by bisection.
    fn sample(&self, rng: &mut SimRng) -> f64 {
        let u: f64 = rng.random();
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

pub trait VelocityLaw: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;
    fn sample(&self, rng: &mut SimRng) -> f64;
    /// `P(lo <= V < hi)`.
    fn probability(&self, lo: f64, hi: f64) -> f64;
    /// `max |v|` over the support.
    fn speed_bound(&self) -> f64;
    fn mean(&self) -> f64;
    fn spec(&self) -> VelocitySpec;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySpec {
    pub form: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parameters: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub centers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocitySpec {
    pub form: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parameters: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weights: Vec<f64>,
}

impl StrategySpec for DensitySpec {
    fn form(&self) -> &str {
        &self.form
    }
}

impl StrategySpec for VelocitySpec {
    fn form(&self) -> &str {
        &self.form
    }
}

fn param(map: &BTreeMap<String, f64>, form: &str, key: &str) -> Result<f64> {
    map.get(key)
        .copied()
        .ok_or_else(|| Error::domain(format!("`{form}` needs parameter `{key}`")))
}

impl DensitySpec {
    pub fn named(form: &str) -> Self {
        DensitySpec {
            form: form.into(),
            parameters: BTreeMap::new(),
            centers: Vec::new(),
        }
    }

    pub fn cosine(amplitude: f64) -> Self {
        let mut s = Self::named("cosine");
        s.parameters.insert("amplitude".into(), amplitude);
        s
    }
}

impl VelocitySpec {
    pub fn discrete(atoms: &[f64], weights: &[f64]) -> Self {
        VelocitySpec {
            form: "discrete".into(),
            parameters: BTreeMap::new(),
            atoms: atoms.to_vec(),
            weights: weights.to_vec(),
        }
    }

    pub fn with_speed(form: &str, speed: f64) -> Self {
        let mut parameters = BTreeMap::new();
        parameters.insert("speed".into(), speed);
        VelocitySpec {
            form: form.into(),
            parameters,
            atoms: Vec::new(),
            weights: Vec::new(),
        }
    }
}

/// `rho_0 = 1`.
#[derive(Debug, Clone, Copy)]
pub struct UniformDensity;

impl SpatialDensity for UniformDensity {
    fn name(&self) -> &'static str {
        "uniform"
    }
    fn pdf(&self, _x: f64) -> f64 {
        1.0
    }
    fn cdf(&self, x: f64) -> f64 {
        x.clamp(0.0, 1.0)
    }
    fn spec(&self) -> DensitySpec {
        DensitySpec::named("uniform")
    }
    fn sample(&self, rng: &mut SimRng) -> f64 {
        rng.random()
    }
}

/// `rho_0(x) = 1 + a cos(2 pi k x)`, `|a| <= 1`.
#[derive(Debug, Clone, Copy)]
pub struct CosineDensity {
    amplitude: f64,
    mode: f64,
}

impl CosineDensity {
    pub fn new(amplitude: f64, mode: u32) -> Result<Self> {
        if !(amplitude.abs() <= 1.0) || mode == 0 {
            return Err(Error::domain("cosine density needs |amplitude| <= 1 and mode >= 1"));
        }
        Ok(CosineDensity {
            amplitude,
            mode: mode as f64,
        })
    }
}

impl SpatialDensity for CosineDensity {
    fn name(&self) -> &'static str {
        "cosine"
    }
    fn pdf(&self, x: f64) -> f64 {
        1.0 + self.amplitude * (TAU * self.mode * x).cos()
    }
    fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        x + self.amplitude * (TAU * self.mode * x).sin() / (TAU * self.mode)
    }
    fn spec(&self) -> DensitySpec {
        let mut s = DensitySpec::cosine(self.amplitude);
        s.parameters.insert("mode".into(), self.mode);
        s
    }
}

/// Equal-weight mixture of raised-cosine bumps of width `w` around `centers`;
/// vanishes outside the bumps. Bumps must not wrap around the torus seam.
#[derive(Debug, Clone)]
pub struct BumpsDensity {
    centers: Vec<f64>,
    width: f64,
}

impl BumpsDensity {
    pub fn new(centers: Vec<f64>, width: f64) -> Result<Self> {
        if centers.is_empty() || !(width > 0.0) {
            return Err(Error::domain("bumps density needs centers and a positive width"));
        }
        for &c in &centers {
            if c - width / 2.0 < 0.0 || c + width / 2.0 > 1.0 {
                return Err(Error::domain(format!("bump at {c} crosses the torus seam")));
            }
        }
        Ok(BumpsDensity { centers, width })
    }

    fn bump_cdf(&self, u: f64) -> f64 {
        let w = self.width;
        if u <= -w / 2.0 {
            0.0
        } else if u >= w / 2.0 {
            1.0
        } else {
            (u + w / 2.0) / w + (TAU * u / w).sin() / TAU
        }
    }
}

impl SpatialDensity for BumpsDensity {
    fn name(&self) -> &'static str {
        "bumps"
    }
    fn pdf(&self, x: f64) -> f64 {
        let w = self.width;
        let m = self.centers.len() as f64;
        self.centers
            .iter()
            .map(|&c| {
                let u = x - c;
                if u.abs() < w / 2.0 {
                    (1.0 + (TAU * u / w).cos()) / w
                } else {
                    0.0
                }
            })
            .sum::<f64>()
            / m
    }
    fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let m = self.centers.len() as f64;
        self.centers.iter().map(|&c| self.bump_cdf(x - c)).sum::<f64>() / m
    }
    fn spec(&self) -> DensitySpec {
        let mut s = DensitySpec::named("bumps");
        s.parameters.insert("width".into(), self.width);
        s.centers = self.centers.clone();
        s
    }
}

/// Finitely many velocity atoms with given weights.
#[derive(Debug, Clone)]
pub struct DiscreteVelocity {
    atoms: Vec<f64>,
    weights: Vec<f64>,
    sampler: WeightedIndex<f64>,
}

impl DiscreteVelocity {
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let weights = if weights.is_empty() {
            vec![1.0; atoms.len()]
        } else {
            weights
        };
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::domain("discrete velocity law needs matching atoms and weights"));
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(Error::domain("velocity atoms must be finite"));
        }
        let total: f64 = weights.iter().sum();
        let sampler = WeightedIndex::new(&weights)
            .map_err(|e| Error::domain(format!("bad velocity weights: {e}")))?;
        let weights = weights.iter().map(|w| w / total).collect();
        Ok(DiscreteVelocity {
            atoms,
            weights,
            sampler,
        })
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }
}

impl VelocityLaw for DiscreteVelocity {
    fn name(&self) -> &'static str {
        "discrete"
    }
    fn sample(&self, rng: &mut SimRng) -> f64 {
        self.atoms[self.sampler.sample(rng)]
    }
    fn probability(&self, lo: f64, hi: f64) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .filter(|(&a, _)| a >= lo && a < hi)
            .map(|(_, &w)| w)
            .sum()
    }
    fn speed_bound(&self) -> f64 {
        self.atoms.iter().fold(0.0, |m, a| m.max(a.abs()))
    }
    fn mean(&self) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }
    fn spec(&self) -> VelocitySpec {
        VelocitySpec::discrete(&self.atoms, &self.weights)
    }
}

/// `V ~ U[-s, s]`.
#[derive(Debug, Clone, Copy)]
pub struct UniformVelocity {
    speed: f64,
}

impl UniformVelocity {
    pub fn new(speed: f64) -> Result<Self> {
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(Error::domain("uniform velocity law needs a positive speed"));
        }
        Ok(UniformVelocity { speed })
    }
}

impl VelocityLaw for UniformVelocity {
    fn name(&self) -> &'static str {
        "uniform"
    }
    fn sample(&self, rng: &mut SimRng) -> f64 {
        self.speed * (2.0 * rng.random::<f64>() - 1.0)
    }
    fn probability(&self, lo: f64, hi: f64) -> f64 {
        let a = lo.max(-self.speed);
        let b = hi.min(self.speed);
        ((b - a) / (2.0 * self.speed)).max(0.0)
    }
    fn speed_bound(&self) -> f64 {
        self.speed
    }
    fn mean(&self) -> f64 {
        0.0
    }
    fn spec(&self) -> VelocitySpec {
        VelocitySpec::with_speed("uniform", self.speed)
    }
}

pub fn density_registry() -> Registry<DensitySpec, dyn SpatialDensity> {
    let mut reg: Registry<DensitySpec, dyn SpatialDensity> = Registry::new("density");
    reg.register("uniform", |_| Ok(Arc::new(UniformDensity)))
        .register("cosine", |s| {
            let a = param(&s.parameters, "cosine", "amplitude")?;
            let k = s.parameters.get("mode").copied().unwrap_or(1.0);
            if k.fract() != 0.0 || k < 1.0 {
                return Err(Error::domain("cosine mode must be a positive integer"));
            }
            Ok(Arc::new(CosineDensity::new(a, k as u32)?))
        })
        .register("bumps", |s| {
            Ok(Arc::new(BumpsDensity::new(
                s.centers.clone(),
                param(&s.parameters, "bumps", "width")?,
            )?))
        });
    reg
}

pub fn velocity_registry() -> Registry<VelocitySpec, dyn VelocityLaw> {
    let mut reg: Registry<VelocitySpec, dyn VelocityLaw> = Registry::new("velocity law");
    reg.register("discrete", |s| {
        Ok(Arc::new(DiscreteVelocity::new(s.atoms.clone(), s.weights.clone())?))
    })
    .register("two_point", |s| {
        let v = param(&s.parameters, "two_point", "speed")?;
        Ok(Arc::new(DiscreteVelocity::new(vec![-v, v], vec![0.5, 0.5])?))
    })
    .register("uniform", |s| {
        Ok(Arc::new(UniformVelocity::new(param(&s.parameters, "uniform", "speed")?)?))
    });
    reg
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialLawSpec {
    pub density: DensitySpec,
    pub velocity: VelocitySpec,
}

#[derive(Debug, Clone)]
pub struct InitialLaw {
    pub density: Arc<dyn SpatialDensity>,
    pub velocity: Arc<dyn VelocityLaw>,
}

impl InitialLaw {
    pub fn from_spec(spec: &InitialLawSpec) -> Result<Self> {
        Ok(InitialLaw {
            density: density_registry().build(&spec.density)?,
            velocity: velocity_registry().build(&spec.velocity)?,
        })
    }

    pub fn spec(&self) -> InitialLawSpec {
        InitialLawSpec {
            density: self.density.spec(),
            velocity: self.velocity.spec(),
        }
    }
}

/// `n` i.i.d. draws from `law` on `T^dim`, deterministic in `seed`.
pub fn sample_initial(law: &InitialLaw, n: usize, dim: usize, seed: u64) -> Result<Configuration> {
    sample_initial_with(law, n, dim, &mut stream_rng(seed, 0))
}

/// Per particle: `dim` position coordinates, then `dim` velocity components.
pub fn sample_initial_with(law: &InitialLaw, n: usize, dim: usize, rng: &mut SimRng) -> Result<Configuration> {
    let mut positions = Vec::with_capacity(n * dim);
    let mut velocities = Vec::with_capacity(n * dim);
    for _ in 0..n {
        for _ in 0..dim {
            positions.push(law.density.sample(rng));
        }
        for _ in 0..dim {
            velocities.push(law.velocity.sample(rng));
        }
    }
    Configuration::new(dim, positions, velocities)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_critical_1pct, ks_statistic};

    fn law(density: DensitySpec, velocity: VelocitySpec) -> InitialLaw {
        InitialLaw::from_spec(&InitialLawSpec { density, velocity }).unwrap()
    }

    #[test]
    fn two_point_mean_velocity_is_near_zero() {
        let l = law(DensitySpec::named("uniform"), VelocitySpec::with_speed("two_point", 1.0));
        let n = 10_000;
        let c = sample_initial(&l, n, 1, 42).unwrap();
        let mean = c.velocities().iter().sum::<f64>() / n as f64;
        assert!(mean.abs() <= 3.0 / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn same_seed_same_configuration() {
        let l = law(DensitySpec::cosine(0.5), VelocitySpec::with_speed("uniform", 1.0));
        let a = sample_initial(&l, 100, 2, 9).unwrap();
        let b = sample_initial(&l, 100, 2, 9).unwrap();
        assert_eq!(a, b);
        let c = sample_initial(&l, 100, 2, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn positions_pass_ks_against_density() {
        for spec in [DensitySpec::cosine(0.5), DensitySpec::named("uniform")] {
            let l = law(spec, VelocitySpec::with_speed("two_point", 1.0));
            let n = 10_000;
            let c = sample_initial(&l, n, 1, 3).unwrap();
            let d = ks_statistic(c.positions(), |x| l.density.cdf(x));
            assert!(d < ks_critical_1pct(n), "KS {d}");
        }
    }

    #[test]
    fn bump_density_is_normalized_and_vanishes_between_bumps() {
        let b = BumpsDensity::new(vec![0.25, 0.7], 0.3).unwrap();
        assert!((b.cdf(1.0) - 1.0).abs() < 1e-15);
        assert_eq!(b.pdf(0.5), 0.0);
        let h = 1e-6;
        let numeric = (b.cdf(0.3 + h) - b.cdf(0.3 - h)) / (2.0 * h);
        assert!((numeric - b.pdf(0.3)).abs() < 1e-6);
        assert!(BumpsDensity::new(vec![0.05], 0.3).is_err());
    }

    #[test]
    fn registries_reject_unknown_forms() {
        assert!(density_registry().build(&DensitySpec::named("gaussian")).is_err());
        assert!(velocity_registry().build(&VelocitySpec::with_speed("maxwell", 1.0)).is_err());
        assert!(density_registry().build(&DensitySpec::cosine(2.0)).is_err());
    }

    #[test]
    fn velocity_probabilities() {
        let d = DiscreteVelocity::new(vec![-0.5, 0.5], vec![1.0, 3.0]).unwrap();
        assert_eq!(d.probability(0.0, 1.0), 0.75);
        assert_eq!(d.mean(), 0.25);
        let u = UniformVelocity::new(2.0).unwrap();
        assert_eq!(u.probability(-1.0, 1.0), 0.5);
        assert_eq!(u.probability(3.0, 4.0), 0.0);
    }
}
