//! JSON experiment configuration.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use topochaos::coupling::reference_registry;
use topochaos::kinetic::{GridDensity, PhaseGrid};
use topochaos::particle::{DensitySpec, HistogramSpec, InitialLaw, InitialLawSpec, VelocitySpec};
use topochaos::topo::{kernel_from_spec, Kernel, KernelSpec, RankWeights};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticConfig {
    pub nx: usize,
    pub nv: usize,
    pub v_max: f64,
    pub dt: f64,
}

impl KineticConfig {
    pub fn grid(&self) -> Result<PhaseGrid> {
        Ok(PhaseGrid::new(self.nx, self.nv, self.v_max)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kernel: KernelSpec,
    /// Particle counts, strictly increasing.
    pub n_list: Vec<usize>,
    pub trials: usize,
    pub horizon: f64,
    /// Defaults to eleven equally spaced times in `[0, horizon]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub record_times: Vec<f64>,
    pub kinetic: KineticConfig,
    pub initial: InitialLawSpec,
    pub seed: u64,
    #[serde(default = "default_reference")]
    pub reference: String,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    /// Binning for `tv_estimate`; defaults to 16 position bins and the kinetic velocity grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<HistogramSpec>,
    /// Evaluate the error-term estimates every this many events (0 disables).
    #[serde(default)]
    pub diagnostic_stride: usize,
    /// Particle count for the single-run subcommands; defaults to the first entry of `n_list`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_reference() -> String {
    "kinetic".into()
}

fn default_dimension() -> usize {
    1
}

impl Default for ExperimentConfig {
    /// The full convergence study: Linear kernel, `N = 64 .. 2048`, 200 trials, `T = 1`.
    fn default() -> Self {
        ExperimentConfig {
            kernel: KernelSpec::named("linear"),
            n_list: vec![64, 128, 256, 512, 1024, 2048],
            trials: 200,
            horizon: 1.0,
            record_times: Vec::new(),
            kinetic: KineticConfig {
                nx: 512,
                nv: 4,
                v_max: 1.0,
                dt: 1.0 / 64.0,
            },
            initial: InitialLawSpec {
                density: DensitySpec::cosine(0.5),
                velocity: VelocitySpec::discrete(&[-0.75, -0.25, 0.25, 0.75], &[]),
            },
            seed: 20_240_601,
            reference: default_reference(),
            dimension: 1,
            histogram: None,
            diagnostic_stride: 0,
            n: None,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn kernel(&self) -> Result<Arc<dyn Kernel>> {
        Ok(kernel_from_spec(&self.kernel)?)
    }

    pub fn law(&self) -> Result<InitialLaw> {
        Ok(InitialLaw::from_spec(&self.initial)?)
    }

    pub fn record_times(&self) -> Vec<f64> {
        if !self.record_times.is_empty() {
            return self.record_times.clone();
        }
        (0..=10).map(|k| self.horizon * k as f64 / 10.0).collect()
    }

    pub fn histogram(&self) -> Result<Option<HistogramSpec>> {
        if self.dimension != 1 {
            return Ok(None);
        }
        let spec = match self.histogram {
            Some(h) => h,
            None => HistogramSpec::new(16, self.kinetic.nv, self.kinetic.v_max)?,
        };
        spec.validate()?;
        Ok(Some(spec))
    }

    pub fn single_n(&self) -> usize {
        self.n.unwrap_or(self.n_list[0])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(LabError::Config(msg));
        if self.n_list.is_empty() {
            return bad("n_list is empty".into());
        }
        if let Some(&n) = self.n_list.iter().find(|&&n| n < 2) {
            return bad(format!("particle count {n} is below 2"));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("n_list {:?} is not strictly increasing", self.n_list));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return bad(format!("horizon {} must be positive", self.horizon));
        }
        let times = self.record_times();
        if times.iter().any(|t| !(0.0..=self.horizon).contains(t)) || times.windows(2).any(|w| w[0] >= w[1]) {
            return bad("record_times must increase strictly within [0, horizon]".into());
        }
        if !(self.dimension == 1 || self.dimension == 2) {
            return bad(format!("dimension {} is not 1 or 2", self.dimension));
        }
        if !reference_registry().contains(&self.reference) {
            return bad(format!("unknown reference `{}`", self.reference));
        }
        if self.reference == "kinetic" && self.dimension != 1 {
            return bad("the kinetic reference is one-dimensional".into());
        }
        if !(self.kinetic.dt > 0.0 && self.kinetic.dt <= 1.0) {
            return bad(format!("kinetic dt {} must lie in (0, 1]", self.kinetic.dt));
        }
        let kernel = self.kernel()?;
        let law = self.law()?;
        let grid = self.kinetic.grid()?;
        if self.reference == "kinetic" {
            GridDensity::from_law(&law, grid)?;
        }
        for n in self.n_list.iter().copied().chain(self.n) {
            RankWeights::new(kernel.as_ref(), n)?;
        }
        self.histogram()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let back: ExperimentConfig = serde_json::from_str(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.record_times().last(), Some(&1.0));
    }

    #[test]
    fn rejects_bad_particle_lists() {
        let mut cfg = ExperimentConfig::default();
        cfg.n_list = vec![64, 64];
        assert!(matches!(cfg.validate(), Err(LabError::Config(_))));
        cfg.n_list = vec![1, 4];
        assert!(cfg.validate().is_err());
        cfg.n_list = vec![];
        assert!(cfg.validate().is_err());
        cfg = ExperimentConfig::default();
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn linear_kernel_with_two_particles_is_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.n_list = vec![2, 4];
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&ExperimentConfig::default().to_json()).unwrap();
        v["trails"] = 3.into();
        assert!(serde_json::from_value::<ExperimentConfig>(v).is_err());
    }
}
