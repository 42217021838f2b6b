//! Interaction kernels `K: [0,1] -> R+`.
//!
//! A kernel must be non-increasing, Lipschitz and integrate to one. All
//! presets are piecewise linear, so a trapezoid rule that includes the kinks
//! integrates them exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::registry::{Builder, Registry, StrategySpec};
use crate::{Error, Result};

/// `8 * sqrt(e)`, the factor in `C_K = 8 sqrt(e) Lip(K)`.
pub const GRONWALL_FACTOR: f64 = 8.0 * 1.648_721_270_700_128_2;

pub trait Kernel: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// `K(r)`; arguments outside `[0, 1]` are clamped.
    fn value(&self, r: f64) -> f64;

    fn lipschitz(&self) -> f64;

    /// Closed-form `\int_0^1 K`.
    fn integral(&self) -> f64;

    /// Interior points in `(0, 1)` where the kernel is not differentiable.
    fn kinks(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Whether the kernel comes from user data rather than a closed form.
    fn is_tabulated(&self) -> bool {
        false
    }

    fn spec(&self) -> KernelSpec;

    /// `C_K = 8 sqrt(e) Lip(K)`.
    fn gronwall_constant(&self) -> f64 {
        GRONWALL_FACTOR * self.lipschitz()
    }
}

/// JSON description of a kernel: `{"form": ..., "parameters": {...}, "table": [[r, K], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub form: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parameters: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub table: Vec<[f64; 2]>,
}

impl KernelSpec {
    pub fn named(form: &str) -> Self {
        KernelSpec {
            form: form.to_string(),
            parameters: BTreeMap::new(),
            table: Vec::new(),
        }
    }

    pub fn with_parameter(mut self, key: &str, value: f64) -> Self {
        self.parameters.insert(key.to_string(), value);
        self
    }

    fn parameter(&self, key: &str) -> Result<f64> {
        self.parameters.get(key).copied().ok_or_else(|| {
            Error::InvalidKernel(format!("kernel `{}` needs parameter `{key}`", self.form))
        })
    }
}

fn clamp_unit(r: f64) -> f64 {
    r.clamp(0.0, 1.0)
}

/// `K = 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Uniform;

impl Kernel for Uniform {
    fn name(&self) -> &'static str {
        "uniform"
    }
    fn value(&self, _r: f64) -> f64 {
        1.0
    }
    fn lipschitz(&self) -> f64 {
        0.0
    }
    fn integral(&self) -> f64 {
        1.0
    }
    fn spec(&self) -> KernelSpec {
        KernelSpec::named("uniform")
    }
}

/// `K(r) = 2 (1 - r)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Linear;

impl Kernel for Linear {
    fn name(&self) -> &'static str {
        "linear"
    }
    fn value(&self, r: f64) -> f64 {
        2.0 * (1.0 - clamp_unit(r))
    }
    fn lipschitz(&self) -> f64 {
        2.0
    }
    fn integral(&self) -> f64 {
        1.0
    }
    fn spec(&self) -> KernelSpec {
        KernelSpec::named("linear")
    }
}

/// Linear ramp supported on `[0, eps]`: `K(r) = (2/eps) (1 - r/eps)_+`.
///
/// As `eps -> 0` this concentrates on the nearest fraction `eps` of the
/// neighbours; `eps = 1` is [`Linear`].
#[derive(Debug, Clone, Copy)]
pub struct TruncatedLinear {
    eps: f64,
}

impl TruncatedLinear {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidKernel(format!(
                "truncated_linear epsilon must lie in (0, 1], got {eps}"
            )));
        }
        Ok(TruncatedLinear { eps })
    }

    pub fn epsilon(&self) -> f64 {
        self.eps
    }
}

impl Kernel for TruncatedLinear {
    fn name(&self) -> &'static str {
        "truncated_linear"
    }
    fn value(&self, r: f64) -> f64 {
        let r = clamp_unit(r);
        (2.0 / self.eps) * (1.0 - r / self.eps).max(0.0)
    }
    fn lipschitz(&self) -> f64 {
        2.0 / (self.eps * self.eps)
    }
    fn integral(&self) -> f64 {
        1.0
    }
    fn kinks(&self) -> Vec<f64> {
        if self.eps < 1.0 {
            vec![self.eps]
        } else {
            Vec::new()
        }
    }
    fn spec(&self) -> KernelSpec {
        KernelSpec::named("truncated_linear").with_parameter("epsilon", self.eps)
    }
}

/// Piecewise-linear interpolation of a user table, rescaled to unit integral.
#[derive(Debug, Clone)]
pub struct Tabulated {
    r: Vec<f64>,
    k: Vec<f64>,
    lipschitz: f64,
}

impl Tabulated {
    /// Breakpoints must start at `r = 0`, end at `r = 1`, be strictly
    /// increasing in `r` and non-increasing and nonnegative in `K`.
    pub fn new(table: &[[f64; 2]]) -> Result<Self> {
        if table.len() < 2 {
            return Err(Error::InvalidKernel("table needs at least two breakpoints".into()));
        }
        let (r, mut k): (Vec<f64>, Vec<f64>) = table.iter().map(|p| (p[0], p[1])).unzip();
        if r[0] != 0.0 || *r.last().unwrap() != 1.0 {
            return Err(Error::InvalidKernel("table must span r = 0 to r = 1".into()));
        }
        for w in r.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidKernel("table abscissae must increase strictly".into()));
            }
        }
        for (i, &v) in k.iter().enumerate() {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidKernel(format!("table value {i} is negative or not finite")));
            }
            if i > 0 && v > k[i - 1] {
                return Err(Error::InvalidKernel("table values must be non-increasing".into()));
            }
        }
        let area: f64 = r
            .windows(2)
            .zip(k.windows(2))
            .map(|(rw, kw)| 0.5 * (kw[0] + kw[1]) * (rw[1] - rw[0]))
            .sum();
        if !(area > 0.0) {
            return Err(Error::InvalidKernel("table has zero integral".into()));
        }
        k.iter_mut().for_each(|v| *v /= area);
        let lipschitz = r
            .windows(2)
            .zip(k.windows(2))
            .map(|(rw, kw)| (kw[0] - kw[1]).abs() / (rw[1] - rw[0]))
            .fold(0.0, f64::max);
        Ok(Tabulated { r, k, lipschitz })
    }
}

impl Kernel for Tabulated {
    fn name(&self) -> &'static str {
        "tabulated"
    }
    fn value(&self, r: f64) -> f64 {
        let r = clamp_unit(r);
        let hi = self.r.partition_point(|&b| b < r).clamp(1, self.r.len() - 1);
        let lo = hi - 1;
        let theta = (r - self.r[lo]) / (self.r[hi] - self.r[lo]);
        self.k[lo] + theta * (self.k[hi] - self.k[lo])
    }
    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
    fn integral(&self) -> f64 {
        self.r
            .windows(2)
            .zip(self.k.windows(2))
            .map(|(rw, kw)| 0.5 * (kw[0] + kw[1]) * (rw[1] - rw[0]))
            .sum()
    }
    fn kinks(&self) -> Vec<f64> {
        self.r[1..self.r.len() - 1].to_vec()
    }
    fn is_tabulated(&self) -> bool {
        true
    }
    fn spec(&self) -> KernelSpec {
        KernelSpec {
            form: "tabulated".into(),
            parameters: BTreeMap::new(),
            table: self.r.iter().zip(&self.k).map(|(&r, &k)| [r, k]).collect(),
        }
    }
}

impl StrategySpec for KernelSpec {
    fn form(&self) -> &str {
        &self.form
    }
}

/// Kernel constructors keyed by `form`; every built kernel is validated.
pub struct KernelRegistry {
    inner: Registry<KernelSpec, dyn Kernel>,
}

impl KernelRegistry {
    pub fn empty() -> Self {
        KernelRegistry {
            inner: Registry::new("kernel"),
        }
    }

    pub fn with_presets() -> Self {
        let mut reg = Self::empty();
        reg.register("uniform", |_| Ok(Arc::new(Uniform)));
        reg.register("linear", |_| Ok(Arc::new(Linear)));
        reg.register("truncated_linear", |spec| {
            Ok(Arc::new(TruncatedLinear::new(spec.parameter("epsilon")?)?))
        });
        reg.register("tabulated", |spec| Ok(Arc::new(Tabulated::new(&spec.table)?)));
        reg
    }

    pub fn register(&mut self, form: &'static str, builder: Builder<KernelSpec, dyn Kernel>) {
        self.inner.register(form, builder);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.inner.names()
    }

    pub fn build(&self, spec: &KernelSpec) -> Result<Arc<dyn Kernel>> {
        let kernel = self.inner.build(spec)?;
        check_kernel(kernel.as_ref())?;
        Ok(kernel)
    }
}

/// Build a kernel from the preset registry.
pub fn kernel_from_spec(spec: &KernelSpec) -> Result<Arc<dyn Kernel>> {
    KernelRegistry::with_presets().build(spec)
}

/// Outcome of [`check_kernel`].
#[derive(Debug, Clone, Copy)]
pub struct KernelCheck {
    pub trapezoid_integral: f64,
    pub max_sampled_slope: f64,
}

/// Verify nonnegativity, monotonicity, unit integral and the Lipschitz bound
/// on a 10^3-point grid.
pub fn check_kernel(kernel: &dyn Kernel) -> Result<KernelCheck> {
    const POINTS: usize = 1000;
    let mut grid: Vec<f64> = (0..=POINTS).map(|i| i as f64 / POINTS as f64).collect();
    grid.extend(kernel.kinks());
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let values: Vec<f64> = grid.iter().map(|&r| kernel.value(r)).collect();
    let lip = kernel.lipschitz();
    let mut max_slope: f64 = 0.0;
    for (i, &v) in values.iter().enumerate() {
        if !(v >= 0.0) {
            return Err(Error::InvalidKernel(format!("K({}) = {v} is negative", grid[i])));
        }
        if i > 0 {
            if v > values[i - 1] + 1e-15 {
                return Err(Error::InvalidKernel(format!("K increases near r = {}", grid[i])));
            }
            let slope = (values[i - 1] - v) / (grid[i] - grid[i - 1]);
            max_slope = max_slope.max(slope);
        }
    }
    if max_slope > lip * (1.0 + 1e-9) + 1e-9 {
        return Err(Error::InvalidKernel(format!(
            "sampled slope {max_slope} exceeds Lipschitz constant {lip}"
        )));
    }
    let trapezoid: f64 = grid
        .windows(2)
        .zip(values.windows(2))
        .map(|(g, v)| 0.5 * (v[0] + v[1]) * (g[1] - g[0]))
        .sum();
    let tol = if kernel.is_tabulated() { 1e-9 } else { 1e-12 };
    if (kernel.integral() - 1.0).abs() > tol || (trapezoid - 1.0).abs() > tol {
        return Err(Error::InvalidKernel(format!(
            "integral is {} (trapezoid {trapezoid}), expected 1",
            kernel.integral()
        )));
    }
    Ok(KernelCheck {
        trapezoid_integral: trapezoid,
        max_sampled_slope: max_slope,
    })
}
