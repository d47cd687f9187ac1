//! Frequency boxes, trigonometric synthesis and Fourier coefficients of the SDE fields.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::torus::SdeProblem;

/// Grid points per axis used to recover field coefficients.
pub const FIELD_GRID: usize = 32;
/// Coefficients below this magnitude are treated as zero.
const FIELD_COEFF_TOL: f64 = 1e-13;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// The frequencies `[−K, K]^d` in lexicographic order (first axis slowest).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModeBox {
    pub d: usize,
    pub cutoff: usize,
}

impl ModeBox {
    pub fn new(d: usize, cutoff: usize) -> Self {
        ModeBox { d, cutoff }
    }

    pub fn side(&self) -> usize {
        2 * self.cutoff + 1
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, k: &[i32]) -> Option<usize> {
        let c = self.cutoff as i32;
        let mut idx = 0usize;
        for &ki in k {
            if ki.abs() > c {
                return None;
            }
            idx = idx * self.side() + (ki + c) as usize;
        }
        Some(idx)
    }

    pub fn freq(&self, mut idx: usize) -> Vec<i32> {
        let mut k = vec![0i32; self.d];
        for i in (0..self.d).rev() {
            k[i] = (idx % self.side()) as i32 - self.cutoff as i32;
            idx /= self.side();
        }
        k
    }

    pub fn zero_index(&self) -> usize {
        (self.len() - 1) / 2
    }

    /// Largest `|idx(k) − idx(l)|` when `‖k − l‖∞ ≤ bandwidth`.
    pub fn index_bandwidth(&self, bandwidth: usize) -> usize {
        bandwidth * (self.len() - 1) / (2 * self.cutoff).max(1)
    }

    /// Copies coefficients into a larger (or smaller) box, truncating as needed.
    pub fn embed(&self, coeffs: &[Complex64], target: &ModeBox) -> Vec<Complex64> {
        let mut out = vec![ZERO; target.len()];
        for (i, c) in coeffs.iter().enumerate() {
            if let Some(j) = target.index(&self.freq(i)) {
                out[j] = *c;
            }
        }
        out
    }
}

/// Applies a dense `(n_out × n_in)` matrix along one axis of a row-major array.
fn apply_axis(data: &[Complex64], shape: &[usize], axis: usize, mat: &[Complex64], n_out: usize) -> (Vec<Complex64>, Vec<usize>) {
    let n_in = shape[axis];
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out = vec![ZERO; outer * n_out * inner];
    for o in 0..outer {
        for p in 0..n_out {
            let row = &mat[p * n_in..(p + 1) * n_in];
            let dst = (o * n_out + p) * inner;
            for (q, m) in row.iter().enumerate() {
                if m.re == 0.0 && m.im == 0.0 {
                    continue;
                }
                let src = (o * n_in + q) * inner;
                for r in 0..inner {
                    out[dst + r] += m * data[src + r];
                }
            }
        }
    }
    let mut new_shape = shape.to_vec();
    new_shape[axis] = n_out;
    (out, new_shape)
}

pub fn grid_coord(p: usize, n: usize) -> f64 {
    TAU * p as f64 / n as f64
}

/// Values `Σ c_k e^{ik·x}` on the uniform grid with `n` points per axis
/// (row-major, first axis slowest).
pub fn synthesize(modes: &ModeBox, coeffs: &[Complex64], n: usize) -> Vec<Complex64> {
    let side = modes.side();
    let c = modes.cutoff as i32;
    let mat: Vec<Complex64> = (0..n)
        .flat_map(|p| (0..side).map(move |q| Complex64::from_polar(1.0, (q as i32 - c) as f64 * grid_coord(p, n))))
        .collect();
    let mut data = coeffs.to_vec();
    let mut shape = vec![side; modes.d];
    for axis in 0..modes.d {
        (data, shape) = apply_axis(&data, &shape, axis, &mat, n);
    }
    data
}

/// Coefficients in `modes` of grid samples (the inverse of [`synthesize`] when `n > 2K`).
pub fn analyze(values: &[Complex64], n: usize, modes: &ModeBox) -> Vec<Complex64> {
    let side = modes.side();
    let c = modes.cutoff as i32;
    let mat: Vec<Complex64> = (0..side)
        .flat_map(|q| {
            (0..n).map(move |p| Complex64::from_polar(1.0 / n as f64, -(q as i32 - c) as f64 * grid_coord(p, n)))
        })
        .collect();
    let mut data = values.to_vec();
    let mut shape = vec![n; modes.d];
    for axis in 0..modes.d {
        (data, shape) = apply_axis(&data, &shape, axis, &mat, side);
    }
    data
}

/// Grid points in row-major order.
pub fn grid_points(d: usize, n: usize) -> impl Iterator<Item = Vec<f64>> {
    (0..n.pow(d as u32)).map(move |mut idx| {
        let mut x = vec![0.0; d];
        for i in (0..d).rev() {
            x[i] = grid_coord(idx % n, n);
            idx /= n;
        }
        x
    })
}

/// One frequency offset `e` carrying `f̂_j(e)` and `â_ij(e)`.
#[derive(Clone, Debug)]
pub struct FieldTerm {
    pub offset: Vec<i32>,
    pub drift: Vec<Complex64>,
    pub diffusion: Vec<Complex64>,
}

/// Trigonometric coefficients of the drift and of `a = g gᵀ`.
#[derive(Clone, Debug)]
pub struct FieldCoeffs {
    pub d: usize,
    pub bandwidth: usize,
    pub terms: Vec<FieldTerm>,
}

impl FieldCoeffs {
    pub fn from_problem(problem: &SdeProblem) -> Self {
        let (d, m) = (problem.dim(), problem.noise_dim());
        let n = FIELD_GRID;
        let probe = ModeBox::new(d, n / 2 - 1);
        let npts = n.pow(d as u32);
        let mut f_vals = vec![vec![ZERO; npts]; d];
        let mut a_vals = vec![vec![ZERO; npts]; d * d];
        let mut f = vec![0.0; d];
        let mut g = vec![0.0; d * m];
        let mut a = vec![0.0; d * d];
        for (p, x) in grid_points(d, n).enumerate() {
            problem.drift_into(&x, &mut f);
            problem.diffusion_tensor_into(&x, &mut g, &mut a);
            for j in 0..d {
                f_vals[j][p] = f[j].into();
            }
            for ij in 0..d * d {
                a_vals[ij][p] = a[ij].into();
            }
        }
        let f_hat: Vec<Vec<Complex64>> = f_vals.iter().map(|v| analyze(v, n, &probe)).collect();
        let a_hat: Vec<Vec<Complex64>> = a_vals.iter().map(|v| analyze(v, n, &probe)).collect();
        let scale = f_hat.iter().chain(&a_hat).flatten().map(|c| c.norm()).fold(1.0, f64::max);
        let clean = |c: Complex64| if c.norm() > FIELD_COEFF_TOL * scale { c } else { ZERO };

        let mut terms = BTreeMap::new();
        let mut bandwidth = 0usize;
        for idx in 0..probe.len() {
            let drift: Vec<Complex64> = f_hat.iter().map(|c| clean(c[idx])).collect();
            let diffusion: Vec<Complex64> = a_hat.iter().map(|c| clean(c[idx])).collect();
            if drift.iter().chain(&diffusion).any(|c| c.norm() > 0.0) {
                let offset = probe.freq(idx);
                bandwidth = bandwidth.max(offset.iter().map(|k| k.unsigned_abs() as usize).max().unwrap_or(0));
                terms.insert(offset.clone(), FieldTerm { offset, drift, diffusion });
            }
        }
        FieldCoeffs { d, bandwidth, terms: terms.into_values().collect() }
    }
}

/// Which Galerkin operator to assemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Operator {
    /// `L* μ = −∇·(f μ) + ½ ∇∇:(a μ)`.
    Adjoint,
    /// `L ψ = f·∇ψ + ½ a:∇∇ψ`.
    Forward,
}

impl Operator {
    /// Matrix entry coupling output mode `k` to input mode `l = k − e`.
    #[inline]
    pub fn entry(self, term: &FieldTerm, k: &[i32], l: &[i32]) -> Complex64 {
        let d = k.len();
        let w = match self {
            Operator::Adjoint => k,
            Operator::Forward => l,
        };
        let mut drift = ZERO;
        let mut diff = ZERO;
        for j in 0..d {
            drift += term.drift[j] * w[j] as f64;
            for i in 0..d {
                diff += term.diffusion[i * d + j] * (w[i] as f64 * w[j] as f64);
            }
        }
        let sign = if self == Operator::Adjoint { -1.0 } else { 1.0 };
        Complex64::new(0.0, sign) * drift - 0.5 * diff
    }

    /// Exact image of a truncated expansion: output lives in the box widened by the bandwidth.
    pub fn apply(self, fields: &FieldCoeffs, modes: &ModeBox, coeffs: &[Complex64]) -> (ModeBox, Vec<Complex64>) {
        let out_modes = ModeBox::new(modes.d, modes.cutoff + fields.bandwidth);
        let mut out = vec![ZERO; out_modes.len()];
        for (li, c) in coeffs.iter().enumerate() {
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            let l = modes.freq(li);
            for term in &fields.terms {
                let k: Vec<i32> = l.iter().zip(&term.offset).map(|(a, b)| a + b).collect();
                let ki = out_modes.index(&k).expect("widened box holds every image mode");
                out[ki] += self.entry(term, &k, &l) * c;
            }
        }
        (out_modes, out)
    }
}
