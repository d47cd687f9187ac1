use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{DEFAULT_BLOCKS, DEFAULT_C};
use crate::noise::NoiseKind;
use crate::observable::Observable;
use crate::schemes::{SchemeConfig, SchemeKind};
use crate::torus::{catalog_problem, SdeProblem, TorusPoint};

/// Step size used by horizon sweeps when none is given.
pub const DEFAULT_TIME_SWEEP_DELTA: f64 = 0.01;

/// One convergence experiment, as read from a JSON config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub problem_id: String,
    pub scheme_id: SchemeKind,
    /// Defaults to the scheme's natural noise.
    #[serde(default)]
    pub noise: Option<NoiseKind>,
    pub observables: Vec<String>,
    #[serde(default)]
    pub delta_grid: Vec<f64>,
    /// Simulated time per run for step-size sweeps.
    #[serde(default)]
    pub horizon: Option<f64>,
    /// Horizons for time sweeps.
    #[serde(default)]
    pub horizon_grid: Vec<f64>,
    /// Fixed step size for time sweeps.
    #[serde(default)]
    pub delta: Option<f64>,
    pub repeats: usize,
    #[serde(default = "default_blocks")]
    pub n_blocks: usize,
    #[serde(default)]
    pub burnin: u64,
    pub seed: u64,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default = "default_c")]
    pub c: f64,
    /// Spectral cutoff for the reference values.
    #[serde(default)]
    pub cutoff: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_blocks() -> usize {
    DEFAULT_BLOCKS
}

fn default_c() -> f64 {
    DEFAULT_C
}

impl SweepConfig {
    pub fn new(problem_id: &str, scheme: SchemeKind, observable: &str, seed: u64) -> Self {
        SweepConfig {
            problem_id: problem_id.to_string(),
            scheme_id: scheme,
            noise: None,
            observables: vec![observable.to_string()],
            delta_grid: Vec::new(),
            horizon: None,
            horizon_grid: Vec::new(),
            delta: None,
            repeats: 1,
            n_blocks: DEFAULT_BLOCKS,
            burnin: 0,
            seed,
            x0: None,
            c: DEFAULT_C,
            cutoff: None,
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn problem(&self) -> Result<SdeProblem> {
        catalog_problem(&self.problem_id)
    }

    pub fn scheme(&self) -> SchemeConfig {
        SchemeConfig::new(self.scheme_id)
    }

    pub fn noise_kind(&self) -> NoiseKind {
        self.noise.unwrap_or_else(|| self.scheme().default_noise())
    }

    pub fn observables(&self, d: usize) -> Result<Vec<Observable>> {
        if self.observables.is_empty() {
            return Err(Error::InvalidConfig("observables must not be empty".into()));
        }
        self.observables.iter().map(|id| Observable::parse(id, d)).collect()
    }

    pub fn start(&self, d: usize) -> Result<TorusPoint> {
        match &self.x0 {
            None => Ok(TorusPoint::origin(d)),
            Some(x) if x.len() == d => TorusPoint::wrap(x),
            Some(x) => Err(Error::DimensionMismatch { expected: d, got: x.len() }),
        }
    }

    fn check_common(&self) -> Result<()> {
        if self.repeats < 1 {
            return Err(Error::InvalidConfig("repeats must be >= 1".into()));
        }
        if self.n_blocks < 2 {
            return Err(Error::InvalidConfig("n_blocks must be >= 2".into()));
        }
        if !(self.c > 0.0) {
            return Err(Error::InvalidConfig("c must be positive".into()));
        }
        Ok(())
    }

    /// Checks the fields used by step-size sweeps.
    pub fn validate_delta_sweep(&self) -> Result<f64> {
        self.check_common()?;
        check_geometric(&self.delta_grid, true, "delta_grid")?;
        if self.delta_grid[0] >= 1.0 {
            return Err(Error::InvalidConfig("delta_grid entries must lie in (0, 1)".into()));
        }
        match self.horizon {
            Some(t) if t > 0.0 => Ok(t),
            _ => Err(Error::InvalidConfig("horizon must be given and positive".into())),
        }
    }

    /// Checks the fields used by horizon sweeps; returns the step size.
    pub fn validate_time_sweep(&self) -> Result<f64> {
        self.check_common()?;
        check_geometric(&self.horizon_grid, false, "horizon_grid")?;
        let delta = self.delta.unwrap_or(DEFAULT_TIME_SWEEP_DELTA);
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidConfig("delta must lie in (0, 1)".into()));
        }
        Ok(delta)
    }
}

/// Ratio-2 geometric grid with at least three entries.
fn check_geometric(grid: &[f64], decreasing: bool, name: &str) -> Result<()> {
    if grid.len() < 3 {
        return Err(Error::InvalidConfig(format!("{name} needs at least 3 entries")));
    }
    if grid.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidConfig(format!("{name} entries must be positive")));
    }
    for w in grid.windows(2) {
        let ratio = if decreasing { w[0] / w[1] } else { w[1] / w[0] };
        if (ratio - 2.0).abs() > 1e-9 {
            let order = if decreasing { "decreasing" } else { "increasing" };
            return Err(Error::InvalidConfig(format!("{name} must be strictly {order} with ratio 2")));
        }
    }
    Ok(())
}
