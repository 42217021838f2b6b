//! Proximity ranks and empirical ball masses.

use super::config::{distance_key, torus_distance, Configuration};
use crate::{Error, Result};

/// The other particles ordered by torus distance from a focal particle.
///
/// Equal (quantized) distances are ordered by ascending particle index.
#[derive(Debug, Clone, Default)]
pub struct RankTable {
    focal: usize,
    /// `(distance key, particle index)` sorted ascending.
    order: Vec<(u64, u32)>,
    /// `ranks[j]` is the 1-based rank of `j`; `ranks[focal] == 0`.
    ranks: Vec<u32>,
    tie_breaks: usize,
}

impl RankTable {
    pub fn build(config: &Configuration, focal: usize) -> Result<Self> {
        let mut table = RankTable::default();
        table.rebuild(config, focal)?;
        Ok(table)
    }

    /// Recompute in place, reusing the buffers.
    pub fn rebuild(&mut self, config: &Configuration, focal: usize) -> Result<()> {
        config.check_index(focal)?;
        let n = config.len();
        let center = config.position(focal);
        self.focal = focal;
        self.order.clear();
        self.order.extend(
            (0..n)
                .filter(|&j| j != focal)
                .map(|j| (distance_key(torus_distance(center, config.position(j))), j as u32)),
        );
        self.order.sort_unstable();
        self.ranks.clear();
        self.ranks.resize(n, 0);
        self.tie_breaks = 0;
        for (pos, &(key, j)) in self.order.iter().enumerate() {
            self.ranks[j as usize] = pos as u32 + 1;
            if pos > 0 && self.order[pos - 1].0 == key {
                self.tie_breaks += 1;
            }
        }
        Ok(())
    }

    pub fn focal(&self) -> usize {
        self.focal
    }

    /// 1-based rank of `j` (0 for the focal particle itself).
    #[inline]
    pub fn rank_of(&self, j: usize) -> usize {
        self.ranks[j] as usize
    }

    pub fn ranks(&self) -> &[u32] {
        &self.ranks
    }

    /// Particle holding rank `r` (1-based).
    pub fn particle_at(&self, r: usize) -> usize {
        self.order[r - 1].1 as usize
    }

    /// Particle indices sorted by distance.
    pub fn permutation(&self) -> impl ExactSizeIterator<Item = usize> + '_ {
        self.order.iter().map(|&(_, j)| j as usize)
    }

    /// Number of adjacent pairs whose distances tied and were ordered by index.
    pub fn tie_breaks(&self) -> usize {
        self.tie_breaks
    }

    /// Number of non-focal particles within the closed ball of quantized radius `key`.
    #[inline]
    pub fn count_within_key(&self, key: u64) -> usize {
        self.order.partition_point(|&(k, _)| k <= key)
    }

    /// Closed-ball empirical mass `M_X(B_{|x_i - x_j|}(x_i))` for the focal `i`.
    ///
    /// Equals `rank / (n-1)` unless `j` ties with higher-indexed particles.
    pub fn ball_mass_through(&self, j: usize) -> f64 {
        let key = self.order[self.rank_of(j) - 1].0;
        self.count_within_key(key) as f64 / self.order.len() as f64
    }
}

/// 1-based rank `R(i, j)`: `j` is the `R`-th closest particle to `i`.
pub fn rank(config: &Configuration, i: usize, j: usize) -> Result<usize> {
    config.check_index(i)?;
    config.check_index(j)?;
    if i == j {
        return Err(Error::domain("rank of a particle with respect to itself"));
    }
    let center = config.position(i);
    let key_j = distance_key(torus_distance(center, config.position(j)));
    let closer = (0..config.len())
        .filter(|&h| h != i && h != j)
        .filter(|&h| {
            let key_h = distance_key(torus_distance(center, config.position(h)));
            key_h < key_j || (key_h == key_j && h < j)
        })
        .count();
    Ok(closer + 1)
}

/// `(1/(n-1)) #{h != focal : |x_h - center| <= radius}` on the torus.
pub fn empirical_mass(config: &Configuration, focal: usize, center: &[f64], radius: f64) -> Result<f64> {
    config.check_index(focal)?;
    if !(radius >= 0.0) {
        return Err(Error::domain(format!("radius must be nonnegative, got {radius}")));
    }
    if center.len() != config.dim() {
        return Err(Error::domain("center dimension does not match configuration"));
    }
    let r_key = distance_key(radius);
    let count = (0..config.len())
        .filter(|&h| h != focal && distance_key(torus_distance(center, config.position(h))) <= r_key)
        .count();
    Ok(count as f64 / (config.len() - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four() -> Configuration {
        Configuration::line(&[0.0, 0.1, 0.3, 0.7], &[0.0; 4]).unwrap()
    }

    #[test]
    fn ranks_on_small_line() {
        let c = four();
        assert_eq!(rank(&c, 0, 1).unwrap(), 1);
        assert_eq!(rank(&c, 0, 2).unwrap(), 2);
        assert_eq!(rank(&c, 0, 3).unwrap(), 3);
        let t = RankTable::build(&c, 0).unwrap();
        assert_eq!(t.rank_of(2), 2);
        assert_eq!(t.rank_of(3), 3);
        assert_eq!(t.tie_breaks(), 1);
        assert_eq!(t.permutation().collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn two_particles() {
        let c = Configuration::line(&[0.2, 0.9], &[0.0; 2]).unwrap();
        assert_eq!(rank(&c, 0, 1).unwrap(), 1);
        assert_eq!(rank(&c, 1, 0).unwrap(), 1);
    }

    #[test]
    fn rank_errors() {
        let c = four();
        assert!(rank(&c, 1, 1).is_err());
        assert!(rank(&c, 0, 4).is_err());
        assert!(RankTable::build(&c, 9).is_err());
    }

    #[test]
    fn closed_ball_mass() {
        let c = four();
        assert_eq!(empirical_mass(&c, 0, &[0.0], 0.3).unwrap(), 1.0);
        assert_eq!(empirical_mass(&c, 0, &[0.0], 0.0).unwrap(), 0.0);
        assert!(empirical_mass(&c, 0, &[0.0], -1.0).is_err());
        // the tie at distance 0.3 is counted twice by the mass
        let t = RankTable::build(&c, 0).unwrap();
        assert_eq!(t.ball_mass_through(2), 1.0);
        assert_eq!(t.ball_mass_through(1), 1.0 / 3.0);
    }
}
