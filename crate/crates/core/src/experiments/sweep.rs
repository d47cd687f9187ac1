use rayon::prelude::*;
use serde::Serialize;

use super::config::SweepConfig;
use super::rate::{GridPoint, RateReport};
use crate::error::{Error, Result};
use crate::estimators::{richardson, run_time_averages, EstimatorResult, KahanSum, TrajectorySpec};
use crate::noise::{label_hash, stream_id, RngStream};
use crate::observable::{default_dictionary, Observable};
use crate::oracle::{default_cutoff, solve_poisson_with, solve_stationary_density, stationary_average, SpectralDensity};
use crate::torus::{SdeProblem, TorusPoint};

/// Fraction of the smallest fitted bias the horizon bias may reach before a warning.
pub const HORIZON_BIAS_FRACTION: f64 = 0.1;

/// Stream roles keep paired runs independent of plain ones.
const ROLE_PLAIN: u64 = 0;
const ROLE_FINE: u64 = 1;

/// Everything shared by the sweeps of one config.
struct Setup {
    problem: SdeProblem,
    observables: Vec<Observable>,
    density: SpectralDensity,
    oracles: Vec<f64>,
    x0: TorusPoint,
}

impl Setup {
    fn new(cfg: &SweepConfig, observables: Option<Vec<Observable>>) -> Result<Self> {
        let problem = cfg.problem()?;
        let d = problem.dim();
        let observables = match observables {
            Some(o) => o,
            None => cfg.observables(d)?,
        };
        let density = solve_stationary_density(&problem, cfg.cutoff.unwrap_or_else(|| default_cutoff(d)))?;
        let oracles = observables.iter().map(|o| stationary_average(&density, o)).collect();
        let x0 = cfg.start(d)?;
        Ok(Setup { problem, observables, density, oracles, x0 })
    }

    fn spec(&self, cfg: &SweepConfig, delta: f64, n_steps: u64) -> Result<TrajectorySpec> {
        let mut spec = TrajectorySpec::new(cfg.scheme(), delta, n_steps)
            .with_noise(cfg.noise_kind())
            .with_blocks(block_count(n_steps, cfg.n_blocks)?)
            .with_burnin(cfg.burnin);
        spec.c = cfg.c;
        Ok(spec)
    }

    /// `repeats` independent runs; result indexed `[repeat][observable]`.
    fn run(&self, cfg: &SweepConfig, spec: &TrajectorySpec, tag: &[u64]) -> Result<Vec<Vec<EstimatorResult>>> {
        let base = [
            label_hash(&cfg.problem_id),
            label_hash(cfg.scheme_id.id()),
            label_hash(spec.noise.id()),
            spec.delta.to_bits(),
        ];
        (0..cfg.repeats as u64)
            .into_par_iter()
            .map(|r| {
                let parts: Vec<u64> = base.iter().chain(tag).copied().chain([r]).collect();
                let stream = RngStream::new(cfg.seed, stream_id(&parts));
                run_time_averages(&self.problem, spec, &self.observables, &self.x0, stream)
            })
            .collect()
    }
}

/// Largest divisor of `n_steps` in `2..=max_blocks`.
pub fn block_count(n_steps: u64, max_blocks: usize) -> Result<usize> {
    (2..=max_blocks as u64)
        .rev()
        .find(|m| n_steps.is_multiple_of(*m))
        .map(|m| m as usize)
        .ok_or_else(|| Error::InvalidConfig(format!("{n_steps} steps cannot be split into >= 2 equal blocks")))
}

/// `T/Δ` when it is an integer.
pub fn steps_for(horizon: f64, delta: f64) -> Result<u64> {
    let exact = horizon / delta;
    let n = exact.round();
    if n < 1.0 || (exact - n).abs() > 1e-6 * n {
        return Err(Error::InvalidConfig(format!("horizon {horizon} is not a multiple of delta {delta}")));
    }
    Ok(n as u64)
}

/// Mean and standard error of the repeat means; one repeat falls back on its blocks.
fn mean_and_stderr(values: &[f64], single: &EstimatorResult) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().copied().collect::<KahanSum>().value() / n as f64;
    if n < 2 {
        return (mean, (single.sampled_variance / single.block_means.len() as f64).sqrt());
    }
    let ss: KahanSum = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    (mean, (ss.value() / (n - 1) as f64 / n as f64).sqrt())
}

fn bias_point(param: f64, values: &[f64], first: &EstimatorResult, oracle: f64, c: f64) -> GridPoint {
    let (mean, stderr) = mean_and_stderr(values, first);
    GridPoint {
        param,
        error: (mean - oracle).abs(),
        error_stderr: stderr,
        value: mean,
        oracle,
        ci_halfwidth: c * stderr,
        repeats: values.len(),
        used: false,
    }
}

/// Reports of a sweep, one per observable.
#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub reports: Vec<RateReport>,
}

/// Bias against Δ at fixed horizon.
pub fn sweep_delta(cfg: &SweepConfig) -> Result<SweepReport> {
    let horizon = cfg.validate_delta_sweep()?;
    let setup = Setup::new(cfg, None)?;
    let k = setup.observables.len();
    let mut grids = vec![Vec::new(); k];
    for &delta in &cfg.delta_grid {
        let spec = setup.spec(cfg, delta, steps_for(horizon, delta)?)?;
        let runs = setup.run(cfg, &spec, &[horizon.to_bits(), ROLE_PLAIN])?;
        for j in 0..k {
            let values: Vec<f64> = runs.iter().map(|r| r[j].value).collect();
            grids[j].push(bias_point(delta, &values, &runs[0][j], setup.oracles[j], cfg.c));
        }
    }
    let mut reports = Vec::with_capacity(k);
    for (j, grid) in grids.into_iter().enumerate() {
        let mut report = RateReport::fit(setup.observables[j].label(), "delta", grid, setup.oracles[j])?;
        horizon_guard(&setup, j, horizon, &mut report)?;
        reports.push(report);
    }
    Ok(SweepReport { reports })
}

/// Warns when the initialization bias `|ψ(x0)|/T` is not small against the fitted Δ-bias.
fn horizon_guard(setup: &Setup, j: usize, horizon: f64, report: &mut RateReport) -> Result<()> {
    if !report.intercept.is_finite() {
        return Ok(());
    }
    let psi = solve_poisson_with(&setup.problem, &setup.density, &setup.observables[j], setup.oracles[j])?;
    let horizon_bias = psi.eval(setup.x0.coords()).abs() / horizon;
    let smallest = report.grid.iter().map(|g| g.param).fold(f64::INFINITY, f64::min);
    let bias = report.predicted(smallest);
    if horizon_bias > HORIZON_BIAS_FRACTION * bias {
        report.warnings.push(format!(
            "horizon_bias: |psi(x0)|/T = {horizon_bias:.3e} exceeds {HORIZON_BIAS_FRACTION} of the smallest fitted bias {bias:.3e}"
        ));
    }
    Ok(())
}

/// Mean squared error against the horizon at fixed Δ.
pub fn sweep_time(cfg: &SweepConfig) -> Result<SweepReport> {
    let delta = cfg.validate_time_sweep()?;
    let setup = Setup::new(cfg, None)?;
    let k = setup.observables.len();
    let mut grids = vec![Vec::new(); k];
    for &horizon in &cfg.horizon_grid {
        let spec = setup.spec(cfg, delta, steps_for(horizon, delta)?)?;
        let runs = setup.run(cfg, &spec, &[horizon.to_bits(), ROLE_PLAIN])?;
        for j in 0..k {
            let oracle = setup.oracles[j];
            let sq: Vec<f64> = runs.iter().map(|r| (r[j].value - oracle).powi(2)).collect();
            let values: Vec<f64> = runs.iter().map(|r| r[j].value).collect();
            let n = sq.len();
            let mse = sq.iter().copied().collect::<KahanSum>().value() / n as f64;
            let stderr = if n > 1 {
                let ss: KahanSum = sq.iter().map(|v| (v - mse) * (v - mse)).collect();
                (ss.value() / (n - 1) as f64 / n as f64).sqrt()
            } else {
                0.0
            };
            grids[j].push(GridPoint {
                param: horizon,
                error: mse,
                error_stderr: stderr,
                value: values.iter().copied().collect::<KahanSum>().value() / n as f64,
                oracle,
                ci_halfwidth: cfg.c * stderr,
                repeats: n,
                used: false,
            });
        }
    }
    let reports = grids
        .into_iter()
        .enumerate()
        .map(|(j, grid)| RateReport::fit(setup.observables[j].label(), "horizon", grid, setup.oracles[j]))
        .collect::<Result<_>>()?;
    Ok(SweepReport { reports })
}

/// Richardson-extrapolated sweep plus the raw coarse-step errors.
#[derive(Clone, Debug, Serialize)]
pub struct ExtrapolationReport {
    pub reports: Vec<RateReport>,
    /// Unextrapolated errors at each coarse Δ, per observable.
    pub raw: Vec<Vec<GridPoint>>,
}

/// Pairs every Δ with Δ/2 on independent streams and extrapolates per repeat.
pub fn extrapolate_sweep(cfg: &SweepConfig) -> Result<ExtrapolationReport> {
    let horizon = cfg.validate_delta_sweep()?;
    let setup = Setup::new(cfg, None)?;
    let p = cfg.scheme().claimed_order;
    let k = setup.observables.len();
    let mut grids = vec![Vec::new(); k];
    let mut raw = vec![Vec::new(); k];
    for &delta in &cfg.delta_grid {
        let coarse_spec = setup.spec(cfg, delta, steps_for(horizon, delta)?)?;
        let fine_spec = setup.spec(cfg, delta / 2.0, steps_for(horizon, delta / 2.0)?)?;
        let coarse = setup.run(cfg, &coarse_spec, &[horizon.to_bits(), ROLE_PLAIN])?;
        let fine = setup.run(cfg, &fine_spec, &[horizon.to_bits(), ROLE_FINE])?;
        for j in 0..k {
            let cv: Vec<f64> = coarse.iter().map(|r| r[j].value).collect();
            let ex = coarse
                .iter()
                .zip(&fine)
                .map(|(c, f)| richardson(c[j].value, f[j].value, p))
                .collect::<Result<Vec<f64>>>()?;
            raw[j].push(bias_point(delta, &cv, &coarse[0][j], setup.oracles[j], cfg.c));
            let mut first = coarse[0][j].clone();
            if cfg.repeats < 2 {
                // one repeat: blocks of the two runs combine like the values
                let k2 = (2f64).powi(p as i32);
                let w = (k2 / (k2 - 1.0)).powi(2) * fine[0][j].sampled_variance / fine[0][j].block_means.len() as f64
                    + (1.0 / (k2 - 1.0)).powi(2) * coarse[0][j].sampled_variance / coarse[0][j].block_means.len() as f64;
                first.sampled_variance = w * first.block_means.len() as f64;
            }
            grids[j].push(bias_point(delta, &ex, &first, setup.oracles[j], cfg.c));
        }
    }
    let reports = grids
        .into_iter()
        .enumerate()
        .map(|(j, grid)| RateReport::fit(setup.observables[j].label(), "delta", grid, setup.oracles[j]))
        .collect::<Result<_>>()?;
    Ok(ExtrapolationReport { reports, raw })
}

#[derive(Clone, Debug, Serialize)]
pub struct MemberError {
    pub observable: String,
    pub value: f64,
    pub oracle: f64,
    pub error: f64,
    pub error_stderr: f64,
    pub ci_halfwidth: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DistanceRow {
    pub delta: f64,
    /// Largest error over the dictionary (a lower bound on the test-function distance).
    pub max_error: f64,
    pub max_error_stderr: f64,
    pub argmax: String,
    pub members: Vec<MemberError>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DistanceReport {
    pub rows: Vec<DistanceRow>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub warnings: Vec<String>,
}

impl DistanceReport {
    pub fn row(&self, delta: f64) -> Option<&DistanceRow> {
        self.rows.iter().find(|r| (r.delta - delta).abs() <= 1e-12)
    }

    /// `max_error(coarse) / max_error(fine)`.
    pub fn ratio(&self, coarse: f64, fine: f64) -> Option<f64> {
        Some(self.row(coarse)?.max_error / self.row(fine)?.max_error)
    }

    pub fn as_rate_report(&self) -> RateReport {
        RateReport {
            observable: "max".into(),
            parameter: "delta".into(),
            grid: self
                .rows
                .iter()
                .map(|r| GridPoint {
                    param: r.delta,
                    error: r.max_error,
                    error_stderr: r.max_error_stderr,
                    value: r.max_error,
                    oracle: 0.0,
                    ci_halfwidth: 0.0,
                    repeats: 0,
                    used: true,
                })
                .collect(),
            slope: self.slope,
            intercept: self.intercept,
            r2: self.r2,
            reference_value: 0.0,
            warnings: self.warnings.clone(),
        }
    }
}

/// Dictionary id that expands to the default normalized dictionary.
pub const DEFAULT_DICTIONARY: &str = "default";

/// Max-over-dictionary stationary error for each Δ, with a fitted slope.
pub fn distance_report(cfg: &SweepConfig) -> Result<DistanceReport> {
    let rows = distance_table(cfg)?;
    let grid: Vec<GridPoint> = rows
        .iter()
        .map(|r| GridPoint {
            param: r.delta,
            error: r.max_error,
            error_stderr: r.max_error_stderr,
            value: r.max_error,
            oracle: 0.0,
            ci_halfwidth: cfg.c * r.max_error_stderr,
            repeats: cfg.repeats,
            used: false,
        })
        .collect();
    let fit = RateReport::fit("max", "delta", grid, 0.0)?;
    Ok(DistanceReport { rows, slope: fit.slope, intercept: fit.intercept, r2: fit.r2, warnings: fit.warnings })
}

/// The per-Δ rows of [`distance_report`] without the fit.
pub fn distance_table(cfg: &SweepConfig) -> Result<Vec<DistanceRow>> {
    let horizon = cfg.validate_delta_sweep()?;
    let problem = cfg.problem()?;
    let dictionary = if cfg.observables.iter().any(|o| o == DEFAULT_DICTIONARY) {
        default_dictionary(problem.dim(), cfg.scheme().claimed_order)?
    } else {
        cfg.observables(problem.dim())?
    };
    let setup = Setup::new(cfg, Some(dictionary))?;
    let mut rows = Vec::new();
    for &delta in &cfg.delta_grid {
        let spec = setup.spec(cfg, delta, steps_for(horizon, delta)?)?;
        let runs = setup.run(cfg, &spec, &[horizon.to_bits(), ROLE_PLAIN])?;
        let members: Vec<MemberError> = setup
            .observables
            .iter()
            .enumerate()
            .map(|(j, o)| {
                let values: Vec<f64> = runs.iter().map(|r| r[j].value).collect();
                let g = bias_point(delta, &values, &runs[0][j], setup.oracles[j], cfg.c);
                MemberError {
                    observable: o.label().to_string(),
                    value: g.value,
                    oracle: g.oracle,
                    error: g.error,
                    error_stderr: g.error_stderr,
                    ci_halfwidth: g.ci_halfwidth,
                }
            })
            .collect();
        let best = members
            .iter()
            .max_by(|a, b| a.error.total_cmp(&b.error))
            .expect("dictionary is non-empty");
        rows.push(DistanceRow {
            delta,
            max_error: best.error,
            max_error_stderr: best.error_stderr,
            argmax: best.observable.clone(),
            members,
        });
    }
    Ok(rows)
}
