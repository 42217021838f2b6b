//! Particle configurations on the unit torus `T^d`, `d in {1, 2}`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Reduce a coordinate into `[0, 1)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let y = x.rem_euclid(1.0);
    // rem_euclid rounds tiny negative inputs up to exactly 1.0
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// Periodic distance between two coordinates on the unit circle.
#[inline]
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(1.0 - d)
}

/// Euclidean distance on the flat unit torus.
#[inline]
pub fn torus_distance(a: &[f64], b: &[f64]) -> f64 {
    match a.len() {
        1 => circle_distance(a[0], b[0]),
        _ => a
            .iter()
            .zip(b)
            .map(|(&x, &y)| {
                let d = circle_distance(x, y);
                d * d
            })
            .sum::<f64>()
            .sqrt(),
    }
}

/// Resolution of [`distance_key`]: distances closer than `2^-40` compare equal.
pub const DISTANCE_QUANTUM: f64 = 1.0 / (1u64 << 40) as f64;

/// Quantized distance used for every rank and ball-membership comparison.
///
/// Floating-point torus distances pick up rounding of order `1e-16`
/// (`1 - 0.7 != 0.3`), which would make closed-ball membership and ties
/// depend on the order of operations. Snapping to a `2^-40` lattice makes
/// ties exact and comparisons consistent between ranks and masses.
#[inline]
pub fn distance_key(d: f64) -> u64 {
    (d * (1u64 << 40) as f64).round() as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    dim: usize,
    positions: Vec<f64>,
    velocities: Vec<f64>,
}

impl Configuration {
    /// Positions and velocities are flat, particle-major arrays of length `n * dim`.
    pub fn new(dim: usize, positions: Vec<f64>, velocities: Vec<f64>) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::domain(format!("dimension must be 1 or 2, got {dim}")));
        }
        if positions.len() != velocities.len() || !positions.len().is_multiple_of(dim) {
            return Err(Error::domain("positions and velocities must both hold n * dim values"));
        }
        if positions.len() / dim < 2 {
            return Err(Error::domain("a configuration needs at least two particles"));
        }
        if positions.iter().chain(&velocities).any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite coordinate"));
        }
        let positions = positions.into_iter().map(wrap_unit).collect();
        Ok(Configuration {
            dim,
            positions,
            velocities,
        })
    }

    /// One-dimensional convenience constructor.
    pub fn line(positions: &[f64], velocities: &[f64]) -> Result<Self> {
        Self::new(1, positions.to_vec(), velocities.to_vec())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.velocities[i * self.dim..(i + 1) * self.dim]
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        torus_distance(self.position(i), self.position(j))
    }

    /// `v_target <- v_source`.
    #[inline]
    pub fn adopt_velocity(&mut self, target: usize, source: usize) {
        let d = self.dim;
        self.velocities.copy_within(source * d..(source + 1) * d, target * d);
    }

    pub fn set_velocity(&mut self, i: usize, v: &[f64]) {
        self.velocities[i * self.dim..(i + 1) * self.dim].copy_from_slice(v);
    }

    /// Free transport `x <- x + v dt (mod 1)`.
    pub fn advance(&mut self, dt: f64) {
        if dt == 0.0 {
            return;
        }
        for (x, v) in self.positions.iter_mut().zip(&self.velocities) {
            *x = wrap_unit(*x + v * dt);
        }
    }

    /// Rigid translation of every particle.
    pub fn translate(&mut self, shift: &[f64]) {
        let d = self.dim;
        for (k, x) in self.positions.iter_mut().enumerate() {
            *x = wrap_unit(*x + shift[k % d]);
        }
    }

    pub(crate) fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            Err(Error::domain(format!("index {i} out of range for {} particles", self.len())))
        } else {
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_are_wrapped() {
        let c = Configuration::line(&[1.25, -0.25, -1e-18], &[0.0; 3]).unwrap();
        assert_eq!(c.positions(), &[0.25, 0.75, 0.0]);
    }

    #[test]
    fn torus_distance_wraps() {
        assert!((circle_distance(0.05, 0.95) - 0.1).abs() < 1e-15);
        let d = torus_distance(&[0.05, 0.5], &[0.95, 0.5]);
        assert!((d - 0.1).abs() < 1e-15);
        let d = torus_distance(&[0.0, 0.0], &[0.5, 0.5]);
        assert!((d - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn distance_key_merges_rounding_noise() {
        assert_ne!(0.3, circle_distance(0.0, 0.7));
        assert_eq!(distance_key(0.3), distance_key(circle_distance(0.0, 0.7)));
    }

    #[test]
    fn advance_transports_mod_one() {
        let mut c = Configuration::line(&[0.9, 0.1], &[0.5, -0.5]).unwrap();
        c.advance(0.4);
        assert!((c.position(0)[0] - 0.1).abs() < 1e-12);
        assert!((c.position(1)[0] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Configuration::new(3, vec![0.0; 6], vec![0.0; 6]).is_err());
        assert!(Configuration::line(&[0.0], &[0.0]).is_err());
        assert!(Configuration::new(2, vec![0.0; 4], vec![0.0; 2]).is_err());
        assert!(Configuration::line(&[f64::NAN, 0.0], &[0.0, 0.0]).is_err());
    }
}
