//! Log-log convergence-rate fit of mean `D_N(T)` against `N - 1`.

use serde::{Deserialize, Serialize};
use topochaos::stats::linear_fit;

use crate::error::{LabError, Result};
use crate::tables::AggregateRow;

pub const MIN_FIT_POINTS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub t: f64,
    pub points: usize,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
}

impl RateFit {
    pub fn predict(&self, n: usize) -> f64 {
        (self.intercept + self.slope * ((n - 1) as f64).ln()).exp()
    }
}

/// Fits `ln mean_dn = intercept + slope * ln(N - 1)` over the rows recorded at time `t`.
pub fn fit_rate(rows: &[AggregateRow], t: f64) -> Result<RateFit> {
    let at_t: Vec<&AggregateRow> = rows.iter().filter(|r| (r.t - t).abs() <= 1e-12).collect();
    if at_t.len() < MIN_FIT_POINTS {
        return Err(LabError::Insufficient(format!(
            "the rate fit needs at least {MIN_FIT_POINTS} values of N at t = {t}, got {}",
            at_t.len()
        )));
    }
    if let Some(r) = at_t.iter().find(|r| !(r.mean_dn > 0.0)) {
        return Err(LabError::Insufficient(format!("mean D_N vanishes at N = {}, t = {t}", r.n)));
    }
    let x: Vec<f64> = at_t.iter().map(|r| ((r.n - 1) as f64).ln()).collect();
    let y: Vec<f64> = at_t.iter().map(|r| r.mean_dn.ln()).collect();
    let fit = linear_fit(&x, &y).ok_or_else(|| LabError::Insufficient("degenerate regression".into()))?;
    Ok(RateFit {
        t,
        points: at_t.len(),
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        slope_stderr: fit.slope_stderr,
        ci95_low: fit.slope_ci95.0,
        ci95_high: fit.slope_ci95.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(ns: &[usize], f: impl Fn(usize) -> f64) -> Vec<AggregateRow> {
        ns.iter()
            .map(|&n| AggregateRow {
                n,
                t: 1.0,
                mean_dn: f(n),
                stderr: 0.0,
                bound: 1.0,
                mean_tv: None,
            })
            .collect()
    }

    #[test]
    fn recovers_exact_power_law() {
        let r = rows(&[64, 128, 256, 512], |n| 0.3 * ((n - 1) as f64).powf(-0.5));
        let fit = fit_rate(&r, 1.0).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.intercept - 0.3f64.ln()).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!((fit.predict(1025) - 0.3 / 32.0).abs() < 1e-12);
    }

    #[test]
    fn needs_four_positive_points() {
        let r = rows(&[64, 128, 256], |_| 0.1);
        assert!(matches!(fit_rate(&r, 1.0), Err(LabError::Insufficient(_))));
        let r = rows(&[64, 128, 256, 512], |n| if n == 128 { 0.0 } else { 0.1 });
        assert!(fit_rate(&r, 1.0).is_err());
        let r = rows(&[64, 128, 256, 512], |_| 0.1);
        assert!(fit_rate(&r, 0.5).is_err());
    }
}
