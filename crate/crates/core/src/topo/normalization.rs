//! Riemann-sum normalization of the kernel and the rank-based transition
//! probabilities `pi^N_{ij} = alpha_N K(R(i,j)/(N-1))`.

use super::config::Configuration;
use super::kernel::Kernel;
use super::rank::RankTable;
use crate::{Error, Result};

fn check_count(n: usize) -> Result<()> {
    if n < 2 {
        Err(Error::domain(format!("need at least two particles, got {n}")))
    } else {
        Ok(())
    }
}

/// `sum_{s=1}^{n-1} K(s/(n-1))`.
pub fn riemann_sum(kernel: &dyn Kernel, n: usize) -> Result<f64> {
    check_count(n)?;
    let m = (n - 1) as f64;
    Ok((1..n).map(|s| kernel.value(s as f64 / m)).sum())
}

/// `e_K(n) = \int K - (1/(n-1)) sum_{s=1}^{n-1} K(s/(n-1))`.
pub fn riemann_error(kernel: &dyn Kernel, n: usize) -> Result<f64> {
    Ok(kernel.integral() - riemann_sum(kernel, n)? / (n - 1) as f64)
}

/// `alpha_N = 1 / ((n-1)(1 - e_K(n)))`.
pub fn alpha(kernel: &dyn Kernel, n: usize) -> Result<f64> {
    let e = riemann_error(kernel, n)?;
    if e >= 1.0 {
        return Err(Error::Degenerate(format!(
            "e_K({n}) = {e} >= 1: the kernel vanishes on every rank"
        )));
    }
    Ok(1.0 / ((n - 1) as f64 * (1.0 - e)))
}

/// Upper bound `4 e^{Lip/(n-1)} / (n-1)` on `alpha_N`, valid for `n > 2 Lip + 1`.
pub fn alpha_bound(kernel: &dyn Kernel, n: usize) -> Option<f64> {
    let lip = kernel.lipschitz();
    let m = (n - 1) as f64;
    (n as f64 > 2.0 * lip + 1.0).then(|| 4.0 * (lip / m).exp() / m)
}

/// Per-rank transition weights `alpha_N K(s/(n-1))`, `s = 1..n-1`, for a fixed `n`.
#[derive(Debug, Clone)]
pub struct RankWeights {
    n: usize,
    alpha: f64,
    /// `weights[s - 1] = alpha K(s/(n-1))`
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl RankWeights {
    pub fn new(kernel: &dyn Kernel, n: usize) -> Result<Self> {
        let alpha = alpha(kernel, n)?;
        let m = (n - 1) as f64;
        let weights: Vec<f64> = (1..n).map(|s| alpha * kernel.value(s as f64 / m)).collect();
        let cumulative = weights
            .iter()
            .scan(0.0, |acc, &w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        Ok(RankWeights {
            n,
            alpha,
            weights,
            cumulative,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `alpha K(s/(n-1))` for 1-based rank `s`.
    #[inline]
    pub fn weight(&self, s: usize) -> f64 {
        self.weights[s - 1]
    }

    /// Draw a 1-based rank with probability `alpha K(s/(n-1))` from a uniform `u in [0,1)`.
    pub fn sample_rank(&self, u: f64) -> usize {
        let target = u * self.cumulative[self.cumulative.len() - 1];
        let idx = self.cumulative.partition_point(|&c| c <= target);
        idx.min(self.weights.len() - 1) + 1
    }
}

/// `pi^N_{i,.}` as a length-`n` vector with a zero at the focal index.
pub fn transition_probs(config: &Configuration, kernel: &dyn Kernel, i: usize) -> Result<Vec<f64>> {
    let weights = RankWeights::new(kernel, config.len())?;
    let table = RankTable::build(config, i)?;
    Ok(probs_from_ranks(&table, &weights))
}

fn probs_from_ranks(table: &RankTable, weights: &RankWeights) -> Vec<f64> {
    table
        .ranks()
        .iter()
        .map(|&r| if r == 0 { 0.0 } else { weights.weight(r as usize) })
        .collect()
}

/// Same probabilities through the direct normalization
/// `K(r(i,j)) / sum_s K(s/(n-1))`, independent of `alpha_N`.
pub fn transition_probs_direct(config: &Configuration, kernel: &dyn Kernel, i: usize) -> Result<Vec<f64>> {
    let n = config.len();
    let total = riemann_sum(kernel, n)?;
    if !(total > 0.0) {
        return Err(Error::Degenerate(format!("kernel vanishes on all ranks for n = {n}")));
    }
    let table = RankTable::build(config, i)?;
    let m = (n - 1) as f64;
    Ok(table
        .ranks()
        .iter()
        .map(|&r| if r == 0 { 0.0 } else { kernel.value(r as f64 / m) / total })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo::kernel::{Linear, TruncatedLinear, Uniform};

    #[test]
    fn riemann_error_examples() {
        for n in [2, 5, 100] {
            assert_eq!(riemann_error(&Uniform, n).unwrap(), 0.0);
        }
        assert!((riemann_error(&Linear, 3).unwrap() - 0.5).abs() < 1e-15);
        for n in [3usize, 4, 10, 1000] {
            let e = riemann_error(&Linear, n).unwrap();
            assert!((e - 1.0 / (n - 1) as f64).abs() < 1e-13, "n={n}: {e}");
        }
        assert!(riemann_error(&Linear, 1).is_err());
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha(&Uniform, 5).unwrap(), 0.25);
        assert!((alpha(&Linear, 3).unwrap() - 1.0).abs() < 1e-15);
        assert!((alpha(&Linear, 5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn alpha_degenerate_for_narrow_ramp() {
        // support [0, 0.2] never reaches the ranks 1/2 and 1
        let k = TruncatedLinear::new(0.2).unwrap();
        assert!(matches!(alpha(&k, 3), Err(Error::Degenerate(_))));
        assert!(matches!(
            transition_probs_direct(&Configuration::line(&[0.0, 0.1, 0.2], &[0.0; 3]).unwrap(), &k, 0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn alpha_respects_its_bound() {
        for n in [6usize, 10, 100, 4096] {
            let a = alpha(&Linear, n).unwrap();
            assert!(a <= alpha_bound(&Linear, n).unwrap());
        }
        assert!(alpha_bound(&Linear, 5).is_none());
    }

    #[test]
    fn transition_prob_examples() {
        let c = Configuration::line(&[0.0, 0.1, 0.3, 0.6], &[0.0; 4]).unwrap();
        let p = transition_probs(&c, &Uniform, 0).unwrap();
        assert_eq!(p[0], 0.0);
        for &v in &p[1..] {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let c = Configuration::line(&[0.0, 0.1, 0.4], &[0.0; 3]).unwrap();
        let p = transition_probs(&c, &Linear, 0).unwrap();
        assert!((p[1] - 1.0).abs() < 1e-15);
        assert_eq!(p[2], 0.0);
    }

    #[test]
    fn rank_sampling_inverts_cumulative() {
        let w = RankWeights::new(&Linear, 5).unwrap();
        // weights 2/3 * (3/4, 1/2, 1/4, 0) = (1/2, 1/3, 1/6, 0)
        assert_eq!(w.sample_rank(0.0), 1);
        assert_eq!(w.sample_rank(0.49), 1);
        assert_eq!(w.sample_rank(0.51), 2);
        assert_eq!(w.sample_rank(0.9), 3);
        assert_eq!(w.sample_rank(0.999_999_999), 3);
    }
}
