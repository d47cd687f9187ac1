//! Log-log least squares for convergence orders.

use serde::Serialize;

use crate::error::{Error, Result};

/// Points whose value is at most this many standard errors are treated as zero.
pub const NOISE_FLOOR_SIGMAS: f64 = 2.0;
/// Fewest usable points a fit accepts.
pub const MIN_FIT_POINTS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitPoint {
    pub param: f64,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerLawFit {
    /// Exponent `q` in `value ≈ e^intercept · param^q`.
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination of the log-log regression.
    pub r2: f64,
    /// Per input point: whether it entered the regression.
    pub used: Vec<bool>,
}

impl FitPoint {
    pub fn new(param: f64, value: f64, stderr: f64) -> Self {
        FitPoint { param, value, stderr }
    }

    /// Positive and statistically distinguishable from zero.
    pub fn is_usable(&self) -> bool {
        self.param > 0.0 && self.value > 0.0 && self.value.is_finite() && self.value > NOISE_FLOOR_SIGMAS * self.stderr
    }
}

/// Ordinary least squares of `ln value` on `ln param`, skipping unusable points.
pub fn fit_power_law(points: &[FitPoint]) -> Result<PowerLawFit> {
    let used: Vec<bool> = points.iter().map(FitPoint::is_usable).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .zip(&used)
        .filter(|(_, u)| **u)
        .map(|(p, _)| (p.param.ln(), p.value.ln()))
        .unzip();
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::NoiseDominated { usable: xs.len() });
    }
    let (slope, intercept, r2) = ols(&xs, &ys);
    Ok(PowerLawFit { slope, intercept, r2, used })
}

/// Slope, intercept and r² of `y = a + b x`.
pub fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (slope, intercept, r2)
}
