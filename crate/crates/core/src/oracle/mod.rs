//! Reference values for stationary averages: Gibbs quadrature for gradient
//! problems and Fourier-Galerkin solves of the stationary Fokker-Planck and
//! Poisson equations.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::observable::Observable;
use crate::torus::SdeProblem;

mod banded;
pub mod fourier;

pub use banded::{BandLu, BandMatrix};
use fourier::{analyze, grid_points, synthesize, FieldCoeffs, ModeBox, Operator};

/// Threshold on the second-smallest singular value of the truncated adjoint.
pub const GAP_TOLERANCE: f64 = 1e-6;
/// Largest null-space component of a Poisson right-hand side.
pub const SOLVABILITY_TOLERANCE: f64 = 1e-8;
/// Smallest accepted quadrature size per axis for Gibbs averages.
pub const MIN_GIBBS_NODES: usize = 256;
/// Systems up to this size get a dense SVD gap check.
const DENSE_GAP_LIMIT: usize = 1200;
const GAP_ITERATIONS: usize = 40;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub fn default_cutoff(d: usize) -> usize {
    if d == 1 {
        64
    } else {
        32
    }
}

/// Residual grids use this many points per axis per unit of cutoff.
fn residual_grid(cutoff: usize) -> usize {
    (4 * cutoff).max(16)
}

fn torus_volume(d: usize) -> f64 {
    TAU.powi(d as i32)
}

/// Stationary density `μ(x) = Σ_k c_k e^{ik·x}` truncated to `|k|∞ ≤ cutoff`.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralDensity {
    pub d: usize,
    pub cutoff: usize,
    #[serde(skip)]
    pub coeffs: Vec<Complex64>,
    /// `max |L*μ|` on the residual grid.
    pub residual_norm: f64,
    /// Lower estimate of the second-smallest singular value of the truncated adjoint.
    pub gap: f64,
}

impl SpectralDensity {
    pub fn modes(&self) -> ModeBox {
        ModeBox::new(self.d, self.cutoff)
    }

    pub fn coeff(&self, k: &[i32]) -> Complex64 {
        self.modes().index(k).map_or(ZERO, |i| self.coeffs[i])
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let m = self.modes();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let phase: f64 = m.freq(i).iter().zip(x).map(|(k, x)| *k as f64 * x).sum();
                (c * Complex64::from_polar(1.0, phase)).re
            })
            .sum()
    }

    /// Density values on the uniform grid with `n` points per axis.
    pub fn grid_values(&self, n: usize) -> Vec<f64> {
        synthesize(&self.modes(), &self.coeffs, n).iter().map(|c| c.re).collect()
    }
}

fn assemble(fields: &FieldCoeffs, modes: &ModeBox, op: Operator) -> BandMatrix {
    let band = modes.index_bandwidth(fields.bandwidth);
    let mut a = BandMatrix::zeros(modes.len(), band, band);
    for ki in 0..modes.len() {
        let k = modes.freq(ki);
        for term in &fields.terms {
            let l: Vec<i32> = k.iter().zip(&term.offset).map(|(a, b)| a - b).collect();
            if let Some(li) = modes.index(&l) {
                let v = a.get(ki, li) + op.entry(term, &k, &l);
                a.set(ki, li, v);
            }
        }
    }
    a
}

fn dense(a: &BandMatrix) -> DMatrix<Complex64> {
    let n = a.dim();
    DMatrix::from_fn(n, n, |i, j| a.get(i, j))
}

/// Null vector of the truncated adjoint generator with `∫μ = 1`.
pub fn solve_stationary_density(problem: &SdeProblem, cutoff: usize) -> Result<SpectralDensity> {
    if cutoff == 0 {
        return Err(Error::InvalidArgument("cutoff must be positive".into()));
    }
    let d = problem.dim();
    let fields = FieldCoeffs::from_problem(problem);
    let modes = ModeBox::new(d, cutoff);
    let z = modes.zero_index();
    let mut a = assemble(&fields, &modes, Operator::Adjoint);

    let dense_gap = (modes.len() <= DENSE_GAP_LIMIT).then(|| {
        let mut sv: Vec<f64> = dense(&a).singular_values().iter().copied().collect();
        sv.sort_by(f64::total_cmp);
        sv.get(1).copied().unwrap_or(f64::INFINITY)
    });

    // the k = 0 row of the adjoint vanishes identically; it becomes the normalization
    for j in 0..modes.len() {
        if a.in_band(z, j) {
            a.set(z, j, ZERO);
        }
    }
    a.set(z, z, Complex64::new(1.0, 0.0));
    let lu = a.factor().map_err(|_| Error::NoSpectralGap { cutoff, sigma: 0.0 })?;
    let gap = match dense_gap {
        Some(g) => g,
        None => lu.min_singular_value(GAP_ITERATIONS),
    };
    if !(gap >= GAP_TOLERANCE) {
        return Err(Error::NoSpectralGap { cutoff, sigma: gap });
    }
    let mut coeffs = vec![ZERO; modes.len()];
    coeffs[z] = Complex64::new(1.0 / torus_volume(d), 0.0);
    lu.solve(&mut coeffs);
    symmetrize(&modes, &mut coeffs);

    let (out_modes, image) = Operator::Adjoint.apply(&fields, &modes, &coeffs);
    let residual_norm = max_abs(&synthesize(&out_modes, &image, residual_grid(cutoff)));
    Ok(SpectralDensity { d, cutoff, coeffs, residual_norm, gap })
}

/// Enforces `c_{−k} = conj(c_k)` (removes round-off asymmetry of a real function).
fn symmetrize(modes: &ModeBox, coeffs: &mut [Complex64]) {
    let n = coeffs.len();
    for i in 0..n {
        let j = n - 1 - i;
        if i < j {
            let avg = 0.5 * (coeffs[i] + coeffs[j].conj());
            coeffs[i] = avg;
            coeffs[j] = avg.conj();
        } else if i == j {
            coeffs[i].im = 0.0;
        }
    }
    debug_assert_eq!(modes.len(), n);
}

fn max_abs(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// `∫φ dμ` as a spectral inner product.
pub fn stationary_average(density: &SpectralDensity, observable: &Observable) -> f64 {
    let vol = torus_volume(density.d);
    observable
        .fourier_coeffs()
        .iter()
        .map(|(k, c)| {
            let neg: Vec<i32> = k.iter().map(|v| -v).collect();
            (c * density.coeff(&neg)).re
        })
        .sum::<f64>()
        * vol
}

/// Solution of `Lψ = φ − φ̄` with `∫ψ dμ = 0`, `ψ(x) = Σ_k c_k e^{ik·x}`.
#[derive(Clone, Debug, Serialize)]
pub struct PoissonSolution {
    pub d: usize,
    pub cutoff: usize,
    #[serde(skip)]
    pub coeffs: Vec<Complex64>,
    pub phi_bar: f64,
    /// `max |Lψ − (φ − φ̄)|` on the residual grid.
    pub residual_norm: f64,
    /// `∫ψ dμ` after gauge fixing.
    pub gauge: f64,
}

impl PoissonSolution {
    pub fn modes(&self) -> ModeBox {
        ModeBox::new(self.d, self.cutoff)
    }

    pub fn coeff(&self, k: &[i32]) -> Complex64 {
        self.modes().index(k).map_or(ZERO, |i| self.coeffs[i])
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let m = self.modes();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let phase: f64 = m.freq(i).iter().zip(x).map(|(k, x)| *k as f64 * x).sum();
                (c * Complex64::from_polar(1.0, phase)).re
            })
            .sum()
    }
}

/// Computes the stationary density and φ̄ at the same cutoff, then solves.
pub fn solve_poisson(problem: &SdeProblem, observable: &Observable, cutoff: usize) -> Result<PoissonSolution> {
    let density = solve_stationary_density(problem, cutoff)?;
    let phi_bar = stationary_average(&density, observable);
    solve_poisson_with(problem, &density, observable, phi_bar)
}

/// Galerkin solve of `Lψ = φ − phi_bar`; fails when `phi_bar` leaves a null-space component.
pub fn solve_poisson_with(
    problem: &SdeProblem,
    density: &SpectralDensity,
    observable: &Observable,
    phi_bar: f64,
) -> Result<PoissonSolution> {
    let d = problem.dim();
    if observable.dim() != d || density.d != d {
        return Err(Error::DimensionMismatch { expected: d, got: observable.dim() });
    }
    let cutoff = density.cutoff;
    let fields = FieldCoeffs::from_problem(problem);
    let modes = density.modes();
    let z = modes.zero_index();
    let mut m = assemble(&fields, &modes, Operator::Forward);
    // the constant mode is annihilated; its column carries the solvability multiplier
    m.set(z, z, Complex64::new(1.0, 0.0));
    let lu = m.factor()?;

    let mut rhs = vec![ZERO; modes.len()];
    for (k, c) in observable.fourier_coeffs() {
        if let Some(i) = modes.index(k) {
            rhs[i] += c;
        }
    }
    rhs[z] -= Complex64::new(phi_bar, 0.0);
    let target = rhs.clone();
    let mut coeffs = rhs;
    lu.solve(&mut coeffs);
    let lambda = coeffs[z].norm();
    if lambda > SOLVABILITY_TOLERANCE {
        return Err(Error::SingularSystem(lambda));
    }
    coeffs[z] = ZERO;
    symmetrize(&modes, &mut coeffs);
    let vol = torus_volume(d);
    let pairing = |coeffs: &[Complex64]| -> f64 {
        coeffs.iter().enumerate().map(|(i, c)| (c * density.coeffs[modes.len() - 1 - i]).re).sum::<f64>() * vol
    };
    coeffs[z] = Complex64::new(-pairing(&coeffs) / (vol * density.coeffs[z].re), 0.0);
    let gauge = pairing(&coeffs);

    let (out_modes, mut image) = Operator::Forward.apply(&fields, &modes, &coeffs);
    for (i, t) in target.iter().enumerate() {
        let k = modes.freq(i);
        image[out_modes.index(&k).expect("output box contains input box")] -= t;
    }
    let residual_norm = max_abs(&synthesize(&out_modes, &image, residual_grid(cutoff)));
    Ok(PoissonSolution { d, cutoff, coeffs, phi_bar, residual_norm, gauge })
}

/// `σ²_∞ = ∫ |gᵀ∇ψ|² dμ` by trapezoidal quadrature.
pub fn asymptotic_variance(problem: &SdeProblem, poisson: &PoissonSolution, density: &SpectralDensity) -> f64 {
    let (d, m) = (problem.dim(), problem.noise_dim());
    let n = residual_grid(poisson.cutoff.max(density.cutoff));
    let modes = poisson.modes();
    let grads: Vec<Vec<Complex64>> = (0..d)
        .map(|j| {
            let c: Vec<Complex64> = poisson
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c * Complex64::new(0.0, modes.freq(i)[j] as f64))
                .collect();
            synthesize(&modes, &c, n)
        })
        .collect();
    let mu = density.grid_values(n);
    let mut g = vec![0.0; d * m];
    let mut total = 0.0;
    for (p, x) in grid_points(d, n).enumerate() {
        problem.diffusion_into(&x, &mut g);
        let q: f64 = (0..m)
            .map(|k| (0..d).map(|i| g[i * m + k] * grads[i][p].re).sum::<f64>().powi(2))
            .sum();
        total += q * mu[p];
    }
    (total * (TAU / n as f64).powi(d as i32)).max(0.0)
}

/// Scalar σ with `g ≡ σ·I`, checked at a few points.
fn scalar_diffusion(problem: &SdeProblem) -> Option<f64> {
    let (d, m) = (problem.dim(), problem.noise_dim());
    if d != m || !problem.has_constant_diffusion() {
        return None;
    }
    let mut g = vec![0.0; d * m];
    problem.diffusion_into(&vec![0.0; d], &mut g);
    let sigma = g[0];
    let ok = sigma > 0.0
        && (0..d).all(|i| (0..m).all(|k| (g[i * m + k] - if i == k { sigma } else { 0.0 }).abs() <= 1e-14 * sigma));
    ok.then_some(sigma)
}

/// `∫φ e^{−2V/σ²} / ∫e^{−2V/σ²}` by the trapezoidal rule on `n_quad` points per axis.
pub fn gibbs_average(problem: &SdeProblem, observable: &Observable, n_quad: usize) -> Result<f64> {
    let v = problem.potential().ok_or(Error::NotGradientProblem("no potential"))?;
    let sigma = scalar_diffusion(problem).ok_or(Error::NotGradientProblem("diffusion is not a constant multiple of the identity"))?;
    if n_quad < MIN_GIBBS_NODES {
        return Err(Error::InvalidArgument(format!("n_quad must be >= {MIN_GIBBS_NODES}")));
    }
    let d = problem.dim();
    if observable.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: observable.dim() });
    }
    let beta = 2.0 / (sigma * sigma);
    let pts: Vec<Vec<f64>> = grid_points(d, n_quad).collect();
    let vs: Vec<f64> = pts.iter().map(|x| v(x)).collect();
    let vmin = vs.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut num, mut den) = (0.0, 0.0);
    for (x, v) in pts.iter().zip(&vs) {
        let w = (-beta * (v - vmin)).exp();
        num += w * observable.eval(x);
        den += w;
    }
    Ok(num / den)
}

/// Oracle summary for one observable.
#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub phi_bar: f64,
    pub residual: f64,
    pub asymptotic_variance: f64,
}

pub fn oracle_report(problem: &SdeProblem, observable: &Observable, cutoff: usize) -> Result<OracleReport> {
    let density = solve_stationary_density(problem, cutoff)?;
    let phi_bar = stationary_average(&density, observable);
    let poisson = solve_poisson_with(problem, &density, observable, phi_bar)?;
    Ok(OracleReport {
        phi_bar,
        residual: poisson.residual_norm,
        asymptotic_variance: asymptotic_variance(problem, &poisson, &density),
    })
}

/// Fourier coefficients of a function sampled on the uniform grid.
pub fn grid_coefficients(values: &[f64], d: usize, n: usize, cutoff: usize) -> Vec<Complex64> {
    let v: Vec<Complex64> = values.iter().map(|x| Complex64::new(*x, 0.0)).collect();
    analyze(&v, n, &ModeBox::new(d, cutoff))
}
