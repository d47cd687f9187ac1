//! One-step integrators behind a common stepper.
//!
//! Every scheme is written as `X_{n+1} = X_n + δ̄(X_n, Δ, ξ_{n+1})`. The
//! increment `δ̄` is computed in unwrapped coordinates; wrapping happens
//! only when the state is advanced.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseKind;
use crate::torus::{wrap_in_place, SdeProblem, TorusPoint};

pub mod order;

pub use order::{weak_order_check, OrderCheckConfig, OrderReport};

/// Largest admissible `Δ · Lip(f)` for the split-step fixed point.
pub const CONTRACTION_LIMIT: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    ExplicitEm,
    SplitStep,
    Weak2,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [SchemeKind::ExplicitEm, SchemeKind::SplitStep, SchemeKind::Weak2];

    pub fn id(self) -> &'static str {
        match self {
            SchemeKind::ExplicitEm => "explicit_em",
            SchemeKind::SplitStep => "split_step",
            SchemeKind::Weak2 => "weak2",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::UnknownId { kind: "scheme", id: s.to_string() })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    /// Weak order p claimed for the scheme.
    pub claimed_order: u32,
    pub implicit_tol: f64,
    pub implicit_max_iters: usize,
}

impl SchemeConfig {
    pub fn new(kind: SchemeKind) -> Self {
        SchemeConfig {
            kind,
            claimed_order: if kind == SchemeKind::Weak2 { 2 } else { 1 },
            implicit_tol: 1e-12,
            implicit_max_iters: 50,
        }
    }

    /// Noise law the scheme is designed around.
    pub fn default_noise(&self) -> NoiseKind {
        match self.kind {
            SchemeKind::Weak2 => NoiseKind::ThreePoint,
            _ => NoiseKind::Gaussian,
        }
    }

    /// Checks the step-size and problem restrictions of the scheme.
    pub fn check_admissible(&self, problem: &SdeProblem, delta: f64) -> Result<()> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
        }
        match self.kind {
            SchemeKind::ExplicitEm => Ok(()),
            SchemeKind::SplitStep => {
                let c = delta * problem.lipschitz_bound();
                if c > CONTRACTION_LIMIT {
                    Err(Error::ContractionViolated(c))
                } else {
                    Ok(())
                }
            }
            SchemeKind::Weak2 => {
                if problem.has_constant_diffusion() {
                    Ok(())
                } else {
                    Err(Error::RequiresConstantDiffusion)
                }
            }
        }
    }
}

impl From<SchemeKind> for SchemeConfig {
    fn from(kind: SchemeKind) -> Self {
        SchemeConfig::new(kind)
    }
}

/// Reusable workspace for repeatedly stepping one problem at a fixed Δ.
pub struct Stepper<'a> {
    problem: &'a SdeProblem,
    cfg: SchemeConfig,
    delta: f64,
    sqrt_delta: f64,
    f: Vec<f64>,
    g: Vec<f64>,
    y: Vec<f64>,
    jac: Vec<f64>,
    hess: Vec<f64>,
    a: Vec<f64>,
    inc: Vec<f64>,
    /// Largest implicit residual accepted so far.
    max_residual: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(problem: &'a SdeProblem, cfg: SchemeConfig, delta: f64) -> Result<Self> {
        cfg.check_admissible(problem, delta)?;
        let (d, m) = (problem.dim(), problem.noise_dim());
        let mut stepper = Stepper {
            problem,
            cfg,
            delta,
            sqrt_delta: delta.sqrt(),
            f: vec![0.0; d],
            g: vec![0.0; d * m],
            y: vec![0.0; d],
            jac: vec![0.0; d * d],
            hess: vec![0.0; d * d * d],
            a: vec![0.0; d * d],
            inc: vec![0.0; d],
            max_residual: 0.0,
        };
        if cfg.kind == SchemeKind::Weak2 {
            // constant diffusion: a = g gᵀ once
            let x0 = vec![0.0; d];
            problem.diffusion_tensor_into(&x0, &mut stepper.g, &mut stepper.a);
        }
        Ok(stepper)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn config(&self) -> SchemeConfig {
        self.cfg
    }

    pub fn max_implicit_residual(&self) -> f64 {
        self.max_residual
    }

    /// Unwrapped increment `δ̄(x, Δ, noise)`.
    pub fn increment(&mut self, x: &[f64], noise: &[f64], out: &mut [f64]) -> Result<()> {
        match self.cfg.kind {
            SchemeKind::ExplicitEm => self.em_increment(x, noise, out),
            SchemeKind::SplitStep => self.split_increment(x, noise, out)?,
            SchemeKind::Weak2 => self.weak2_increment(x, noise, out),
        }
        if out.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::StateBlowUp)
        }
    }

    /// Advances `x` in place by one step and wraps it.
    #[inline]
    pub fn step(&mut self, x: &mut [f64], noise: &[f64]) -> Result<()> {
        let mut inc = std::mem::take(&mut self.inc);
        let res = self.increment(x, noise, &mut inc);
        for (xi, di) in x.iter_mut().zip(&inc) {
            *xi += di;
        }
        self.inc = inc;
        res?;
        wrap_in_place(x).map_err(|_| Error::StateBlowUp)
    }

    #[inline]
    fn em_increment(&mut self, x: &[f64], noise: &[f64], out: &mut [f64]) {
        let (d, m) = (self.problem.dim(), self.problem.noise_dim());
        self.problem.drift_into(x, &mut self.f);
        self.problem.diffusion_into(x, &mut self.g);
        for i in 0..d {
            let gn: f64 = (0..m).map(|k| self.g[i * m + k] * noise[k]).sum();
            out[i] = self.f[i] * self.delta + gn * self.sqrt_delta;
        }
    }

    fn split_increment(&mut self, x: &[f64], noise: &[f64], out: &mut [f64]) -> Result<()> {
        let (d, m) = (self.problem.dim(), self.problem.noise_dim());
        self.y.copy_from_slice(x);
        let mut residual = f64::INFINITY;
        let mut converged = false;
        for _ in 0..=self.cfg.implicit_max_iters {
            self.problem.drift_into(&self.y, &mut self.f);
            residual = 0.0;
            for i in 0..d {
                let r = x[i] + self.f[i] * self.delta - self.y[i];
                residual = f64::max(residual, r.abs());
                self.f[i] = r;
            }
            if residual <= self.cfg.implicit_tol {
                converged = true;
                break;
            }
            for i in 0..d {
                self.y[i] += self.f[i];
            }
        }
        if !converged {
            return Err(Error::ImplicitSolveFailed { residual, iterations: self.cfg.implicit_max_iters });
        }
        self.max_residual = self.max_residual.max(residual);
        self.problem.diffusion_into(&self.y, &mut self.g);
        for i in 0..d {
            let gn: f64 = (0..m).map(|k| self.g[i * m + k] * noise[k]).sum();
            out[i] = self.y[i] - x[i] + gn * self.sqrt_delta;
        }
        Ok(())
    }

    /// `fΔ + gξ√Δ + ½Δ²(f·∇f + ½a:∇∇f) + ½Δ^{3/2}(Df g)ξ`, all at x.
    fn weak2_increment(&mut self, x: &[f64], noise: &[f64], out: &mut [f64]) {
        let (d, m) = (self.problem.dim(), self.problem.noise_dim());
        let dt = self.delta;
        self.problem.drift_into(x, &mut self.f);
        self.problem.diffusion_into(x, &mut self.g);
        self.problem.jacobian_into(x, &mut self.jac);
        self.problem.hessian_into(x, &mut self.hess);
        // y <- g ξ
        for i in 0..d {
            self.y[i] = (0..m).map(|k| self.g[i * m + k] * noise[k]).sum();
        }
        for i in 0..d {
            let jf: f64 = (0..d).map(|j| self.jac[i * d + j] * self.f[j]).sum();
            let mut ah = 0.0;
            for j in 0..d {
                for k in 0..d {
                    ah += self.a[j * d + k] * self.hess[(i * d + j) * d + k];
                }
            }
            let jg: f64 = (0..d).map(|j| self.jac[i * d + j] * self.y[j]).sum();
            out[i] = self.f[i] * dt
                + self.y[i] * self.sqrt_delta
                + 0.5 * dt * dt * (jf + 0.5 * ah)
                + 0.5 * dt * self.sqrt_delta * jg;
        }
    }
}

fn one_step(problem: &SdeProblem, cfg: SchemeConfig, x: &TorusPoint, delta: f64, noise: &[f64]) -> Result<TorusPoint> {
    if noise.len() != problem.noise_dim() {
        return Err(Error::DimensionMismatch { expected: problem.noise_dim(), got: noise.len() });
    }
    let mut stepper = Stepper::new(problem, cfg, delta)?;
    let mut state = x.coords().to_vec();
    stepper.step(&mut state, noise)?;
    TorusPoint::wrap(&state)
}

/// Explicit Euler-Maruyama: `wrap(x + f(x)Δ + g(x)η√Δ)`.
pub fn em_step(problem: &SdeProblem, x: &TorusPoint, delta: f64, eta: &[f64]) -> Result<TorusPoint> {
    one_step(problem, SchemeConfig::new(SchemeKind::ExplicitEm), x, delta, eta)
}

/// Implicit split-step: `y = x + f(y)Δ` by fixed-point iteration from x, then `wrap(y + g(y)η√Δ)`.
pub fn split_step(problem: &SdeProblem, x: &TorusPoint, delta: f64, eta: &[f64], cfg: &SchemeConfig) -> Result<TorusPoint> {
    one_step(problem, SchemeConfig { kind: SchemeKind::SplitStep, ..*cfg }, x, delta, eta)
}

/// Simplified weak order-2 Taylor step for constant diffusion.
pub fn weak2_step(problem: &SdeProblem, x: &TorusPoint, delta: f64, xi: &[f64]) -> Result<TorusPoint> {
    one_step(problem, SchemeConfig::new(SchemeKind::Weak2), x, delta, xi)
}
