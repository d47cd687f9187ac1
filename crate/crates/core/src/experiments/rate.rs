use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{fit_power_law, FitPoint};

/// One row of a sweep: the tidy CSV line.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridPoint {
    pub param: f64,
    pub error: f64,
    pub error_stderr: f64,
    /// Mean estimate over repeats.
    pub value: f64,
    pub oracle: f64,
    pub ci_halfwidth: f64,
    pub repeats: usize,
    /// Whether the point entered the rate fit.
    pub used: bool,
}

/// Fitted power law `error ≈ e^intercept · param^slope` over a sweep grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateReport {
    pub observable: String,
    /// `"delta"` or `"horizon"`.
    pub parameter: String,
    pub grid: Vec<GridPoint>,
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination of the log-log fit.
    pub r2: f64,
    pub reference_value: f64,
    pub warnings: Vec<String>,
}

/// Machine-readable fit summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitSummary<'a> {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub warnings: &'a [String],
}

pub const DEGENERATE_WARNING: &str = "degenerate: zero error at every grid point";

impl RateReport {
    /// Fits the grid; zero-error grids give a flagged degenerate report.
    pub fn fit(observable: &str, parameter: &str, mut grid: Vec<GridPoint>, reference_value: f64) -> Result<Self> {
        let mut warnings = Vec::new();
        if grid.len() < 3 {
            return Err(Error::InvalidArgument("rate fits need at least 3 grid points".into()));
        }
        let (slope, intercept, r2) = if grid.iter().all(|g| g.error == 0.0) {
            warnings.push(DEGENERATE_WARNING.to_string());
            (0.0, f64::NEG_INFINITY, 0.0)
        } else {
            let pts: Vec<FitPoint> = grid.iter().map(|g| FitPoint::new(g.param, g.error, g.error_stderr)).collect();
            let fit = fit_power_law(&pts)?;
            for (g, u) in grid.iter_mut().zip(&fit.used) {
                g.used = *u;
            }
            let excluded = grid.iter().filter(|g| !g.used).count();
            if excluded > 0 {
                warnings.push(format!("excluded {excluded} noise-dominated grid point(s)"));
            }
            (fit.slope, fit.intercept, fit.r2)
        };
        Ok(RateReport {
            observable: observable.to_string(),
            parameter: parameter.to_string(),
            grid,
            slope,
            intercept,
            r2,
            reference_value,
            warnings,
        })
    }

    /// Fitted error at `param`.
    pub fn predicted(&self, param: f64) -> f64 {
        self.intercept.exp() * param.powf(self.slope)
    }

    pub fn point(&self, param: f64) -> Option<&GridPoint> {
        self.grid.iter().find(|g| (g.param - param).abs() <= 1e-12 * param.abs().max(1.0))
    }

    pub fn summary(&self) -> FitSummary<'_> {
        FitSummary { slope: self.slope, intercept: self.intercept, r2: self.r2, warnings: &self.warnings }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("param,error,error_stderr,value,oracle,ci_halfwidth,repeats\n");
        for g in &self.grid {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                g.param, g.error, g.error_stderr, g.value, g.oracle, g.ci_halfwidth, g.repeats
            ));
        }
        out
    }
}
