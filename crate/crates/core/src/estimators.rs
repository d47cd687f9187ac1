//! Time averages along one trajectory, block statistics, Richardson
//! extrapolation and ensemble averages.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::noise::{NoiseKind, NoiseModel, RngStream};
use crate::observable::Observable;
use crate::schemes::{SchemeConfig, Stepper};
use crate::torus::{SdeProblem, TorusPoint};

/// Default confidence multiplier (about 95%).
pub const DEFAULT_C: f64 = 2.0;
/// Default number of blocks per trajectory.
pub const DEFAULT_BLOCKS: usize = 32;

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = KahanSum::new();
        iter.into_iter().for_each(|v| s.add(v));
        s
    }
}

/// Compensated arithmetic mean.
pub fn time_average(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(values.iter().copied().collect::<KahanSum>().value() / values.len() as f64)
}

/// Unbiased sample variance of the block means and the half-width `c·√(D̂/M)`.
pub fn block_statistics(block_means: &[f64], c: f64) -> Result<(f64, f64)> {
    let m = block_means.len();
    if m < 2 {
        return Err(Error::TooFewBlocks(m));
    }
    let mean = time_average(block_means)?;
    let ss: KahanSum = block_means.iter().map(|b| (b - mean) * (b - mean)).collect();
    let var = ss.value() / (m - 1) as f64;
    Ok((var, c * (var / m as f64).sqrt()))
}

/// Two-grid extrapolation cancelling a `C Δ^p` bias term.
pub fn richardson(value_coarse: f64, value_fine: f64, p: u32) -> Result<f64> {
    if p < 1 {
        return Err(Error::InvalidOrder(p));
    }
    let k = (2f64).powi(p as i32) - 1.0;
    // written as a correction so that equal inputs come back unchanged
    Ok(value_fine + (value_fine - value_coarse) / k)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimatorResult {
    pub value: f64,
    pub delta: f64,
    pub n_steps: u64,
    pub horizon: f64,
    pub block_means: Vec<f64>,
    pub sampled_variance: f64,
    pub ci_halfwidth: f64,
    pub c_multiplier: f64,
}

impl EstimatorResult {
    fn from_blocks(value: f64, delta: f64, n_steps: u64, block_means: Vec<f64>, c: f64) -> Result<Self> {
        let (sampled_variance, ci_halfwidth) = block_statistics(&block_means, c)?;
        Ok(EstimatorResult {
            value,
            delta,
            n_steps,
            horizon: n_steps as f64 * delta,
            block_means,
            sampled_variance,
            ci_halfwidth,
            c_multiplier: c,
        })
    }
}

/// How a single trajectory is simulated and averaged.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrajectorySpec {
    pub scheme: SchemeConfig,
    pub noise: NoiseKind,
    pub delta: f64,
    pub n_steps: u64,
    pub n_blocks: usize,
    /// Steps simulated and discarded before averaging starts.
    pub burnin: u64,
    pub c: f64,
}

impl TrajectorySpec {
    pub fn new(scheme: SchemeConfig, delta: f64, n_steps: u64) -> Self {
        TrajectorySpec {
            scheme,
            noise: scheme.default_noise(),
            delta,
            n_steps,
            n_blocks: DEFAULT_BLOCKS,
            burnin: 0,
            c: DEFAULT_C,
        }
    }

    pub fn with_noise(mut self, noise: NoiseKind) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_blocks(mut self, n_blocks: usize) -> Self {
        self.n_blocks = n_blocks;
        self
    }

    pub fn with_burnin(mut self, burnin: u64) -> Self {
        self.burnin = burnin;
        self
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.delta
    }
}

/// Calls `visit(n, x_n)` for `n = 0..n_steps` after discarding `burnin` steps.
pub fn for_each_state(
    problem: &SdeProblem,
    spec: &TrajectorySpec,
    x0: &TorusPoint,
    stream: RngStream,
    mut visit: impl FnMut(u64, &[f64]),
) -> Result<()> {
    if x0.dim() != problem.dim() {
        return Err(Error::DimensionMismatch { expected: problem.dim(), got: x0.dim() });
    }
    let mut stepper = Stepper::new(problem, spec.scheme, spec.delta)?;
    let noise = NoiseModel::new(spec.noise);
    let mut src = stream.source();
    let mut x = x0.coords().to_vec();
    let mut xi = vec![0.0; problem.noise_dim()];
    for _ in 0..spec.burnin {
        noise.fill(&mut src, &mut xi);
        stepper.step(&mut x, &xi)?;
    }
    for n in 0..spec.n_steps {
        visit(n, &x);
        if n + 1 < spec.n_steps {
            noise.fill(&mut src, &mut xi);
            stepper.step(&mut x, &xi)?;
        }
    }
    Ok(())
}

/// One-pass time averages of several observables on a shared trajectory.
pub fn run_time_averages(
    problem: &SdeProblem,
    spec: &TrajectorySpec,
    observables: &[Observable],
    x0: &TorusPoint,
    stream: RngStream,
) -> Result<Vec<EstimatorResult>> {
    if spec.n_steps == 0 {
        return Err(Error::EmptyInput);
    }
    if spec.n_blocks < 2 {
        return Err(Error::TooFewBlocks(spec.n_blocks));
    }
    if !spec.n_steps.is_multiple_of(spec.n_blocks as u64) {
        return Err(Error::InvalidArgument(format!(
            "n_steps {} not divisible by n_blocks {}",
            spec.n_steps, spec.n_blocks
        )));
    }
    for o in observables {
        if o.dim() != problem.dim() {
            return Err(Error::DimensionMismatch { expected: problem.dim(), got: o.dim() });
        }
    }
    let block_len = spec.n_steps / spec.n_blocks as u64;
    let k = observables.len();
    let mut total = vec![KahanSum::new(); k];
    let mut block = vec![KahanSum::new(); k];
    let mut block_means = vec![Vec::with_capacity(spec.n_blocks); k];
    for_each_state(problem, spec, x0, stream, |n, x| {
        for (j, o) in observables.iter().enumerate() {
            let v = o.eval(x);
            total[j].add(v);
            block[j].add(v);
        }
        if (n + 1) % block_len == 0 {
            for j in 0..k {
                block_means[j].push(block[j].value() / block_len as f64);
                block[j] = KahanSum::new();
            }
        }
    })?;
    total
        .iter()
        .zip(block_means)
        .map(|(t, b)| EstimatorResult::from_blocks(t.value() / spec.n_steps as f64, spec.delta, spec.n_steps, b, spec.c))
        .collect()
}

pub fn run_time_average(
    problem: &SdeProblem,
    spec: &TrajectorySpec,
    observable: &Observable,
    x0: &TorusPoint,
    stream: RngStream,
) -> Result<EstimatorResult> {
    Ok(run_time_averages(problem, spec, std::slice::from_ref(observable), x0, stream)?.remove(0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnsembleResult {
    pub mean: f64,
    pub std_error: f64,
    pub n_trajectories: usize,
}

/// Mean of `φ(X_{t_final})` over independent trajectories; trajectory `l` uses `stream.child(l)`.
#[allow(clippy::too_many_arguments)]
pub fn ensemble_average(
    problem: &SdeProblem,
    scheme: SchemeConfig,
    noise: NoiseKind,
    observable: &Observable,
    t_final: f64,
    delta: f64,
    n_trajectories: usize,
    x0: &TorusPoint,
    stream: RngStream,
) -> Result<EnsembleResult> {
    if n_trajectories < 2 {
        return Err(Error::InvalidArgument("need >= 2 trajectories".into()));
    }
    let steps_f = t_final / delta;
    let n_steps = steps_f.round();
    if t_final < 0.0 || (steps_f - n_steps).abs() > 1e-9 * steps_f.max(1.0) {
        return Err(Error::InvalidArgument(format!("t_final {t_final} is not a multiple of delta {delta}")));
    }
    let spec = TrajectorySpec { noise, ..TrajectorySpec::new(scheme, delta, n_steps as u64 + 1) };
    let values = (0..n_trajectories as u64)
        .into_par_iter()
        .map(|l| {
            let mut last = 0.0;
            for_each_state(problem, &spec, x0, stream.child(l), |_, x| last = observable.eval(x))?;
            Ok(last)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = time_average(&values)?;
    let ss: KahanSum = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let sd = (ss.value() / (n_trajectories - 1) as f64).sqrt();
    Ok(EnsembleResult { mean, std_error: sd / (n_trajectories as f64).sqrt(), n_trajectories })
}
