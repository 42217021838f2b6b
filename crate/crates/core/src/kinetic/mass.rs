//! Ball masses `M_rho(B_r(x))` of a piecewise-constant density on the circle.

/// Prefix sums of a cell-constant `rho`; exact for that `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassFunction {
    dx: f64,
    rho: Vec<f64>,
    /// `prefix[k] = dx * sum_{c < k} rho[c]`
    prefix: Vec<f64>,
}

impl MassFunction {
    pub fn new(rho: &[f64]) -> Self {
        let dx = 1.0 / rho.len() as f64;
        let mut prefix = Vec::with_capacity(rho.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for r in rho {
            acc += r * dx;
            prefix.push(acc);
        }
        MassFunction {
            dx,
            rho: rho.to_vec(),
            prefix,
        }
    }

    pub fn nx(&self) -> usize {
        self.rho.len()
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn total(&self) -> f64 {
        self.prefix[self.rho.len()]
    }

    /// `\int_0^y rho`, extended periodically to all of R.
    #[inline]
    pub fn cumulative(&self, y: f64) -> f64 {
        let periods = y.floor();
        let u = y - periods;
        let nx = self.rho.len();
        let c = ((u / self.dx) as usize).min(nx - 1);
        periods * self.total() + self.prefix[c] + self.rho[c] * (u - c as f64 * self.dx)
    }

    /// Mass of the closed ball of radius `r` around `x`; the whole mass once `r >= 1/2`.
    #[inline]
    pub fn ball_mass(&self, x: f64, r: f64) -> f64 {
        if r >= 0.5 {
            self.total()
        } else if r <= 0.0 {
            0.0
        } else {
            (self.cumulative(x + r) - self.cumulative(x - r)).max(0.0)
        }
    }

    /// `m(x_i, k dx)` for `k = 0..=nx/2` around the center of cell `i`.
    pub fn radius_profile(&self, i: usize, out: &mut Vec<f64>) {
        let x = (i as f64 + 0.5) * self.dx;
        let half = self.rho.len() / 2;
        out.clear();
        out.extend((0..=half).map(|k| self.ball_mass(x, k as f64 * self.dx)));
    }
}
