//! Small statistical helpers shared by the oracles and the experiment runner.

use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

/// Pairwise (cascade) summation: result depends only on the order of `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if values.len() <= LEAF {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(values) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn chi_square_p(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    dist.sf(statistic)
}

/// Pearson goodness-of-fit of observed counts against category probabilities.
/// Categories with zero expected probability must have zero counts (else p = 0).
pub fn chi_square_goodness_of_fit(observed: &[u64], probs: &[f64]) -> ChiSquareTest {
    let total: u64 = observed.iter().sum();
    let mut statistic = 0.0;
    let mut used = 0usize;
    for (&o, &p) in observed.iter().zip(probs) {
        let e = p * total as f64;
        if e > 0.0 {
            statistic += (o as f64 - e).powi(2) / e;
            used += 1;
        } else if o > 0 {
            return ChiSquareTest {
                statistic: f64::INFINITY,
                dof: used,
                p_value: 0.0,
            };
        }
    }
    let dof = used.saturating_sub(1);
    ChiSquareTest {
        statistic,
        dof,
        p_value: chi_square_p(statistic, dof),
    }
}

/// Two-sample chi-square test of homogeneity; empty categories are dropped.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> ChiSquareTest {
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let total = (na + nb) as f64;
    let mut statistic = 0.0;
    let mut used = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        used += 1;
        let ea = col * na as f64 / total;
        let eb = col * nb as f64 / total;
        statistic += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    let dof = used.saturating_sub(1);
    ChiSquareTest {
        statistic,
        dof,
        p_value: chi_square_p(statistic, dof),
    }
}

/// Kolmogorov–Smirnov statistic `sup |F_n - F|` of a sample against a CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.627_61 / (n as f64).sqrt()
}

/// Two-sample KS statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic p-value of a two-sample KS statistic (Kolmogorov distribution).
pub fn ks_two_sample_p(d: f64, na: usize, nb: usize) -> f64 {
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * (k as f64 * lambda).powi(2)).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Ordinary least squares `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
    /// 95% confidence interval of the slope (Student t, `n - 2` dof).
    pub slope_ci95: (f64, f64),
}

/// Requires at least three points.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 3 || n != y.len() {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_stderr = (sse / (nf - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 2.0)
        .map(|d| d.inverse_cdf(0.975))
        .unwrap_or(f64::NAN);
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
        slope_stderr,
        slope_ci95: (slope - t * slope_stderr, slope + t * slope_stderr),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
    }

    #[test]
    fn chi_square_detects_bias() {
        let fair = chi_square_goodness_of_fit(&[250, 260, 240, 250], &[0.25; 4]);
        assert!(fair.p_value > 0.5);
        let biased = chi_square_goodness_of_fit(&[400, 200, 200, 200], &[0.25; 4]);
        assert!(biased.p_value < 1e-10);
        let impossible = chi_square_goodness_of_fit(&[1, 5], &[0.0, 1.0]);
        assert_eq!(impossible.p_value, 0.0);
        let h = chi_square_homogeneity(&[100, 100, 0], &[98, 103, 0]);
        assert_eq!(h.dof, 1);
        assert!(h.p_value > 0.5);
    }

    #[test]
    fn exact_line_fit() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, -1.0, -3.0, -5.0];
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(linear_fit(&x[..2], &y[..2]).is_none());
    }

    #[test]
    fn ks_two_sample_identical_and_shifted() {
        let a: Vec<f64> = (0..500).map(|i| i as f64 / 500.0).collect();
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        let b: Vec<f64> = a.iter().map(|v| v + 0.5).collect();
        let d = ks_two_sample(&a, &b);
        assert!((d - 0.5).abs() <= 2.0 / 500.0, "{d}");
        assert!(ks_two_sample_p(d, 500, 500) < 1e-10);
    }
}
