//! Monte-Carlo certificate of the local moment conditions of a scheme.
//!
//! For each Δ and start point x the certifier compares mixed moments
//! `E ∏ δ_{αᵢ}` of the true increment `δ = X(Δ) − x` with the scheme's
//! `E ∏ δ̄_{αᵢ}` for every monomial of order `s = 1..2p+1`, and evaluates
//! `E ∏ |δ̄_{αᵢ}|` at order `2p+2`.
//!
//! * Scheme moments are integrated exactly over the noise law by a tensor
//!   quadrature (every scheme increment is a low-degree polynomial in the noise).
//! * True moments come from Euler-Maruyama on substeps `h = Δ/substeps`,
//!   extrapolated with the coupled `2h` path (`2·m_h − m_{2h}`), using the
//!   one-step Gaussian Euler increment on the same Brownian path as a control
//!   variate with exactly known moments, and antithetic path pairs.

use rayon::prelude::*;
use serde::Serialize;

use super::{SchemeConfig, Stepper};
use crate::error::{Error, Result};
use crate::fit::{fit_power_law, FitPoint};
use crate::noise::{fill_gaussian, stream_id, NoiseKind, NoiseModel, RngStream};
use crate::torus::SdeProblem;

/// Euler substeps per Δ in the reference.
pub const DEFAULT_SUBSTEPS: usize = 512;
/// Slack allowed below the target slope `p + 1`.
pub const SLOPE_SLACK: f64 = 0.4;
/// Fewest reference paths per Δ.
pub const MIN_SAMPLES: usize = 100_000;
const PAIRS_PER_CHUNK: usize = 2048;

#[derive(Clone, Debug)]
pub struct OrderCheckConfig {
    pub scheme: SchemeConfig,
    pub noise: NoiseKind,
    pub deltas: Vec<f64>,
    /// Claimed weak order.
    pub p: u32,
    /// Reference paths per Δ, shared out over the start points.
    pub n_samples: usize,
    /// Reference substeps per Δ.
    pub substeps: usize,
    pub stream: RngStream,
    /// Start points; a fixed grid when `None`.
    pub start_points: Option<Vec<Vec<f64>>>,
}

impl OrderCheckConfig {
    pub fn new(scheme: SchemeConfig, deltas: Vec<f64>, n_samples: usize, seed: u64) -> Self {
        OrderCheckConfig {
            scheme,
            noise: scheme.default_noise(),
            p: scheme.claimed_order,
            deltas,
            n_samples,
            substeps: DEFAULT_SUBSTEPS,
            stream: RngStream::new(seed, 0),
            start_points: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderRow {
    pub delta: f64,
    /// Largest `|E∏δ − E∏δ̄|` over start points, orders `1..=2p+1` and index tuples.
    pub max_defect: f64,
    pub defect_stderr: f64,
    /// Monomial order attaining the maximum.
    pub defect_order: usize,
    /// Largest `E∏|δ̄|` at order `2p+2`.
    pub abs_moment: f64,
    pub used_in_fit: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderReport {
    pub scheme: String,
    pub p_claimed: u32,
    pub noise: NoiseKind,
    pub rows: Vec<OrderRow>,
    /// Log-log slope of the max defect against Δ.
    pub slope: f64,
    /// Log-log slope of the order-(2p+2) absolute moments.
    pub abs_moment_slope: f64,
    /// Smallest K with `E∏|δ̄| ≤ K Δ^{p+1}` on the grid.
    pub k_fit: f64,
    pub pass: bool,
}

/// All nondecreasing index tuples of length `s` over `0..d`.
fn monomials(d: usize, s: usize) -> Vec<Vec<usize>> {
    fn rec(d: usize, s: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == s {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            cur.push(i);
            rec(d, s, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, s, 0, &mut Vec::new(), &mut out);
    out
}

fn default_points(d: usize) -> Vec<Vec<f64>> {
    use std::f64::consts::PI;
    match d {
        1 => (0..4).map(|j| vec![(2 * j + 1) as f64 * PI / 4.0]).collect(),
        _ => (0..1usize << d)
            .map(|mask| (0..d).map(|i| PI / 4.0 + if mask >> i & 1 == 1 { PI } else { 0.0 }).collect())
            .collect(),
    }
}

/// Tensor product of a 1-D rule over m dimensions: `(nodes (m each), weights)`.
fn tensor_rule(nodes: &[f64], weights: &[f64], m: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut pts = vec![Vec::new()];
    let mut ws = vec![1.0];
    for _ in 0..m {
        let mut np = Vec::new();
        let mut nw = Vec::new();
        for (p, w) in pts.iter().zip(&ws) {
            for (x, v) in nodes.iter().zip(weights) {
                let mut q = p.clone();
                q.push(*x);
                np.push(q);
                nw.push(w * v);
            }
        }
        pts = np;
        ws = nw;
    }
    (pts, ws)
}

fn product(v: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| v[i]).product()
}

/// Exact moments of a noise-driven increment over a quadrature rule.
fn quadrature_moments(
    rule: &(Vec<Vec<f64>>, Vec<f64>),
    tuples: &[Vec<usize>],
    d: usize,
    mut increment: impl FnMut(&[f64], &mut [f64]) -> Result<()>,
    absolute: bool,
) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; tuples.len()];
    let mut inc = vec![0.0; d];
    for (node, w) in rule.0.iter().zip(&rule.1) {
        increment(node, &mut inc)?;
        if absolute {
            inc.iter_mut().for_each(|v| *v = v.abs());
        }
        for (a, t) in acc.iter_mut().zip(tuples) {
            *a += w * product(&inc, t);
        }
    }
    Ok(acc)
}

struct RefSums {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    n: usize,
}

/// Monte-Carlo part of the reference: sums of `2∏δ_h − ∏δ_{2h} − ∏δ̃` over antithetic pairs.
fn reference_chunk(
    problem: &SdeProblem,
    x: &[f64],
    delta: f64,
    substeps: usize,
    tuples: &[Vec<usize>],
    pairs: usize,
    stream: RngStream,
) -> RefSums {
    let (d, m) = (problem.dim(), problem.noise_dim());
    let h = delta / substeps as f64;
    let sqrt_h = h.sqrt();
    let mut f = vec![0.0; d];
    let mut g = vec![0.0; d * m];
    let mut f0 = vec![0.0; d];
    let mut g0 = vec![0.0; d * m];
    problem.drift_into(x, &mut f0);
    problem.diffusion_into(x, &mut g0);
    let mut z = vec![0.0; substeps * m];
    let mut fine = vec![0.0; d];
    let mut coarse = vec![0.0; d];
    let mut cv = vec![0.0; d];
    let mut w = vec![0.0; m];
    let mut dw = vec![0.0; m];
    let mut sums = RefSums { sum: vec![0.0; tuples.len()], sum_sq: vec![0.0; tuples.len()], n: 0 };
    let mut pair_val = vec![0.0; tuples.len()];
    let mut src = stream.source();

    let euler = |state: &mut [f64], step: f64, dw: &[f64], f: &mut [f64], g: &mut [f64]| {
        problem.drift_into(state, f);
        problem.diffusion_into(state, g);
        for i in 0..d {
            let gn: f64 = (0..m).map(|k| g[i * m + k] * dw[k]).sum();
            state[i] += f[i] * step + gn;
        }
    };

    for _ in 0..pairs {
        fill_gaussian(&mut src, &mut z);
        pair_val.iter_mut().for_each(|v| *v = 0.0);
        for sign in [1.0, -1.0] {
            fine.copy_from_slice(x);
            coarse.copy_from_slice(x);
            w.iter_mut().for_each(|v| *v = 0.0);
            for j in (0..substeps).step_by(2) {
                for k in 0..m {
                    dw[k] = sign * sqrt_h * z[j * m + k];
                    w[k] += dw[k];
                }
                euler(&mut fine, h, &dw, &mut f, &mut g);
                let mut dw2 = [0.0; 8];
                for k in 0..m {
                    dw[k] = sign * sqrt_h * z[(j + 1) * m + k];
                    w[k] += dw[k];
                    dw2[k] = sign * sqrt_h * (z[j * m + k] + z[(j + 1) * m + k]);
                }
                euler(&mut fine, h, &dw, &mut f, &mut g);
                euler(&mut coarse, 2.0 * h, &dw2[..m], &mut f, &mut g);
            }
            for i in 0..d {
                fine[i] -= x[i];
                coarse[i] -= x[i];
                cv[i] = f0[i] * delta + (0..m).map(|k| g0[i * m + k] * w[k]).sum::<f64>();
            }
            for (v, t) in pair_val.iter_mut().zip(tuples) {
                *v += 0.5 * (2.0 * product(&fine, t) - product(&coarse, t) - product(&cv, t));
            }
        }
        for ((s, q), v) in sums.sum.iter_mut().zip(sums.sum_sq.iter_mut()).zip(&pair_val) {
            *s += v;
            *q += v * v;
        }
        sums.n += 1;
    }
    sums
}

/// Certifies the moment conditions of `cfg.scheme` on `problem` over `cfg.deltas`.
pub fn weak_order_check(problem: &SdeProblem, cfg: &OrderCheckConfig) -> Result<OrderReport> {
    if cfg.p < 1 {
        return Err(Error::InvalidOrder(cfg.p));
    }
    if cfg.substeps < 2 || !cfg.substeps.is_multiple_of(2) {
        return Err(Error::InvalidArgument("substeps must be even and >= 2".into()));
    }
    if problem.noise_dim() > 8 {
        return Err(Error::InvalidArgument("noise dimension above 8 is not supported".into()));
    }
    if cfg.deltas.len() < 3 {
        return Err(Error::InvalidArgument("need at least 3 step sizes".into()));
    }
    for w in cfg.deltas.windows(2) {
        if (w[0] / w[1] - 2.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument("delta grid must be geometric with ratio 2".into()));
        }
    }
    if cfg.n_samples < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!("need at least {MIN_SAMPLES} samples per step size")));
    }
    for &delta in &cfg.deltas {
        let h = delta / cfg.substeps as f64;
        let bound = delta.powi(cfg.p as i32 + 1);
        if h > bound {
            return Err(Error::ReferenceTooCoarse { reference: h, bound });
        }
    }
    let p = cfg.p as usize;
    let d = problem.dim();
    let m = problem.noise_dim();
    let points = cfg.start_points.clone().unwrap_or_else(|| default_points(d));
    let pairs_per_point = (cfg.n_samples / (2 * points.len())).max(1);

    let tuples: Vec<Vec<usize>> = (1..=2 * p + 1).flat_map(|s| monomials(d, s)).collect();
    let abs_tuples = monomials(d, 2 * p + 2);
    let noise = NoiseModel::new(cfg.noise);
    let (qn, qw) = noise.quadrature();
    let scheme_rule = tensor_rule(&qn, &qw, m);
    let (gn, gw) = NoiseModel::new(NoiseKind::Gaussian).quadrature();
    let gauss_rule = tensor_rule(&gn, &gw, m);

    let mut rows = Vec::with_capacity(cfg.deltas.len());
    for (di, &delta) in cfg.deltas.iter().enumerate() {
        let substeps = cfg.substeps;
        let mut stepper = Stepper::new(problem, cfg.scheme, delta)?;
        let mut best = (0.0f64, 0.0f64, 0usize);
        let mut abs_moment = 0.0f64;
        for (pi, x) in points.iter().enumerate() {
            let scheme_m = quadrature_moments(&scheme_rule, &tuples, d, |n, out| stepper.increment(x, n, out), false)?;
            let abs_m = quadrature_moments(&scheme_rule, &abs_tuples, d, |n, out| stepper.increment(x, n, out), true)?;
            abs_moment = abs_m.iter().fold(abs_moment, |a, v| a.max(*v));

            let mut f0 = vec![0.0; d];
            let mut g0 = vec![0.0; d * m];
            problem.drift_into(x, &mut f0);
            problem.diffusion_into(x, &mut g0);
            let sqrt_dt = delta.sqrt();
            let cv_m = quadrature_moments(
                &gauss_rule,
                &tuples,
                d,
                |z, out| {
                    for i in 0..d {
                        out[i] = f0[i] * delta + sqrt_dt * (0..m).map(|k| g0[i * m + k] * z[k]).sum::<f64>();
                    }
                    Ok(())
                },
                false,
            )?;

            let n_chunks = pairs_per_point.div_ceil(PAIRS_PER_CHUNK);
            let partials: Vec<RefSums> = (0..n_chunks)
                .into_par_iter()
                .map(|c| {
                    let pairs = PAIRS_PER_CHUNK.min(pairs_per_point - c * PAIRS_PER_CHUNK);
                    let s = RngStream::new(
                        cfg.stream.master_seed,
                        stream_id(&[cfg.stream.stream_id, delta.to_bits(), di as u64, pi as u64, c as u64]),
                    );
                    reference_chunk(problem, x, delta, substeps, &tuples, pairs, s)
                })
                .collect();
            let n: usize = partials.iter().map(|s| s.n).sum();
            for (t, _) in tuples.iter().enumerate() {
                let sum: f64 = partials.iter().map(|s| s.sum[t]).sum();
                let sum_sq: f64 = partials.iter().map(|s| s.sum_sq[t]).sum();
                let mean = sum / n as f64;
                let var = ((sum_sq - n as f64 * mean * mean) / (n as f64 - 1.0).max(1.0)).max(0.0);
                let stderr = (var / n as f64).sqrt();
                let defect = (cv_m[t] + mean - scheme_m[t]).abs();
                if defect > best.0 {
                    best = (defect, stderr, tuples[t].len());
                }
            }
        }
        rows.push(OrderRow {
            delta,
            max_defect: best.0,
            defect_stderr: best.1,
            defect_order: best.2,
            abs_moment,
            used_in_fit: false,
        });
    }

    let fit = fit_power_law(&rows.iter().map(|r| FitPoint::new(r.delta, r.max_defect, r.defect_stderr)).collect::<Vec<_>>())?;
    for (r, u) in rows.iter_mut().zip(&fit.used) {
        r.used_in_fit = *u;
    }
    let abs_fit = fit_power_law(&rows.iter().map(|r| FitPoint::new(r.delta, r.abs_moment, 0.0)).collect::<Vec<_>>())?;
    let k_fit = rows.iter().map(|r| r.abs_moment / r.delta.powi(cfg.p as i32 + 1)).fold(0.0, f64::max);
    let target = (cfg.p + 1) as f64 - SLOPE_SLACK;
    Ok(OrderReport {
        scheme: cfg.scheme.kind.id().to_string(),
        p_claimed: cfg.p,
        noise: cfg.noise,
        rows,
        slope: fit.slope,
        abs_moment_slope: abs_fit.slope,
        k_fit,
        pass: fit.slope >= target && abs_fit.slope >= target,
    })
}
