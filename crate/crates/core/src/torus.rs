//! State space, SDE problem descriptions and hypoellipticity diagnostics.
//!
//! Points live on the flat torus `[0, 2π)^d`. Coefficient fields are
//! evaluated through borrowed slices so the integrators never allocate on
//! the hot path.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Period of every torus coordinate.
pub const PERIOD: f64 = TAU;

/// Central finite-difference step for Jacobians that are not supplied analytically.
pub const JACOBIAN_FD_STEP: f64 = 1e-5;

/// Singular values above this count towards the Hörmander rank.
pub const RANK_TOLERANCE: f64 = 1e-8;

/// Reduces one coordinate to `[0, 2π)`. A result that rounds to `2π` maps to `0`.
#[inline]
pub fn wrap_coord(x: f64) -> f64 {
    // one-period shifts are the common case and agree bit-for-bit with rem_euclid
    if (0.0..PERIOD).contains(&x) {
        return x;
    }
    if (-PERIOD..0.0).contains(&x) {
        let r = x + PERIOD;
        return if r >= PERIOD { 0.0 } else { r };
    }
    if (PERIOD..2.0 * PERIOD).contains(&x) {
        return x - PERIOD;
    }
    let r = x.rem_euclid(PERIOD);
    if r >= PERIOD {
        0.0
    } else {
        r
    }
}

/// Wraps a raw state in place, failing on non-finite entries.
#[inline]
pub fn wrap_in_place(x: &mut [f64]) -> Result<()> {
    for c in x.iter_mut() {
        if !c.is_finite() {
            return Err(Error::NonFiniteState);
        }
        *c = wrap_coord(*c);
    }
    Ok(())
}

/// A point on the d-dimensional torus; every coordinate lies in `[0, 2π)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TorusPoint(Vec<f64>);

impl TorusPoint {
    /// Wraps an arbitrary finite vector onto the torus.
    pub fn wrap(raw: &[f64]) -> Result<Self> {
        let mut coords = raw.to_vec();
        wrap_in_place(&mut coords)?;
        Ok(TorusPoint(coords))
    }

    pub fn origin(d: usize) -> Self {
        TorusPoint(vec![0.0; d])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for TorusPoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Writes a vector- or matrix-valued field at `x` into `out`.
pub type FieldFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Scalar field on the torus.
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// An Itô SDE `dX = f(X) dt + g(X) dW` on the torus.
///
/// Matrix-valued outputs are row-major: the diffusion writes `g[i * m + k]`,
/// the Jacobian `J[i * d + j] = ∂f_i/∂x_j` and the Hessian
/// `H[(i * d + j) * d + k] = ∂²f_i/∂x_j∂x_k`.
#[derive(Clone)]
pub struct SdeProblem {
    id: String,
    d: usize,
    m: usize,
    drift: FieldFn,
    diffusion: FieldFn,
    drift_jacobian: Option<FieldFn>,
    drift_hessian: Option<FieldFn>,
    potential: Option<ScalarFn>,
    lipschitz_bound: f64,
    constant_diffusion: bool,
}

impl fmt::Debug for SdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeProblem")
            .field("id", &self.id)
            .field("d", &self.d)
            .field("m", &self.m)
            .field("lipschitz_bound", &self.lipschitz_bound)
            .field("constant_diffusion", &self.constant_diffusion)
            .field("has_potential", &self.potential.is_some())
            .finish()
    }
}

impl SdeProblem {
    pub fn new(id: impl Into<String>, d: usize, m: usize, drift: FieldFn, diffusion: FieldFn) -> Self {
        assert!(d >= 1 && m >= 1, "dimensions must be positive");
        SdeProblem {
            id: id.into(),
            d,
            m,
            drift,
            diffusion,
            drift_jacobian: None,
            drift_hessian: None,
            potential: None,
            lipschitz_bound: f64::INFINITY,
            constant_diffusion: false,
        }
    }

    pub fn with_jacobian(mut self, jac: FieldFn) -> Self {
        self.drift_jacobian = Some(jac);
        self
    }

    pub fn with_hessian(mut self, hess: FieldFn) -> Self {
        self.drift_hessian = Some(hess);
        self
    }

    pub fn with_potential(mut self, v: ScalarFn) -> Self {
        self.potential = Some(v);
        self
    }

    /// Certified Lipschitz constant of the drift in the max-norm.
    pub fn with_lipschitz_bound(mut self, l: f64) -> Self {
        self.lipschitz_bound = l;
        self
    }

    /// Declares that `g` does not depend on the state.
    pub fn with_constant_diffusion(mut self) -> Self {
        self.constant_diffusion = true;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn noise_dim(&self) -> usize {
        self.m
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    pub fn has_constant_diffusion(&self) -> bool {
        self.constant_diffusion
    }

    pub fn potential(&self) -> Option<&ScalarFn> {
        self.potential.as_ref()
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.drift_jacobian.is_some()
    }

    #[inline]
    pub fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out)
    }

    #[inline]
    pub fn diffusion_into(&self, x: &[f64], out: &mut [f64]) {
        (self.diffusion)(x, out)
    }

    /// `f(x)`.
    pub fn eval_drift(&self, x: &TorusPoint) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.drift_into(x.coords(), &mut out);
        out
    }

    /// `g(x)` as a d×m matrix.
    pub fn eval_diffusion(&self, x: &[f64]) -> DMatrix<f64> {
        let mut out = vec![0.0; self.d * self.m];
        self.diffusion_into(x, &mut out);
        DMatrix::from_row_slice(self.d, self.m, &out)
    }

    /// `a(x) = g(x) g(x)ᵀ`, row-major d×d.
    pub fn diffusion_tensor_into(&self, x: &[f64], g_buf: &mut [f64], out: &mut [f64]) {
        let (d, m) = (self.d, self.m);
        self.diffusion_into(x, g_buf);
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = (0..m).map(|k| g_buf[i * m + k] * g_buf[j * m + k]).sum();
            }
        }
    }

    /// Drift Jacobian, analytic when available and central differences otherwise.
    pub fn jacobian_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.drift_jacobian {
            Some(jac) => jac(x, out),
            None => {
                let d = self.d;
                let drift = self.drift.clone();
                let j = fd_jacobian(&|y: &[f64]| {
                    let mut v = vec![0.0; d];
                    drift(y, &mut v);
                    v
                }, x, JACOBIAN_FD_STEP);
                out.copy_from_slice(&j);
            }
        }
    }

    /// Second derivatives of the drift, analytic or differenced from the Jacobian.
    pub fn hessian_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.drift_hessian {
            Some(h) => h(x, out),
            None => {
                let d = self.d;
                let mut xp = x.to_vec();
                let mut jp = vec![0.0; d * d];
                let mut jm = vec![0.0; d * d];
                for k in 0..d {
                    xp[k] = x[k] + JACOBIAN_FD_STEP;
                    let hi = xp[k];
                    self.jacobian_into(&xp, &mut jp);
                    xp[k] = x[k] - JACOBIAN_FD_STEP;
                    let lo = xp[k];
                    self.jacobian_into(&xp, &mut jm);
                    xp[k] = x[k];
                    for i in 0..d {
                        for j in 0..d {
                            out[(i * d + j) * d + k] = (jp[i * d + j] - jm[i * d + j]) / (hi - lo);
                        }
                    }
                }
            }
        }
    }

    /// Largest deviation `|f(x) + ∇V(x)|` using central differences of the potential.
    /// `None` when the problem has no potential.
    pub fn gradient_defect(&self, x: &[f64], step: f64) -> Option<f64> {
        let v = self.potential.as_ref()?;
        let mut f = vec![0.0; self.d];
        self.drift_into(x, &mut f);
        let mut y = x.to_vec();
        let mut worst: f64 = 0.0;
        for i in 0..self.d {
            y[i] = x[i] + step;
            let (hi, vp) = (y[i], v(&y));
            y[i] = x[i] - step;
            let (lo, vm) = (y[i], v(&y));
            y[i] = x[i];
            let grad = (vp - vm) / (hi - lo);
            worst = worst.max((f[i] + grad).abs());
        }
        Some(worst)
    }
}

/// Central-difference Jacobian `J[i * d + j] = ∂h_i/∂x_j`.
pub fn fd_jacobian(h: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], step: f64) -> Vec<f64> {
    let d = x.len();
    let mut out = vec![0.0; d * d];
    let mut y = x.to_vec();
    for j in 0..d {
        y[j] = x[j] + step;
        let hi = y[j];
        let fp = h(&y);
        y[j] = x[j] - step;
        let lo = y[j];
        let fm = h(&y);
        y[j] = x[j];
        for i in 0..d {
            out[i * d + j] = (fp[i] - fm[i]) / (hi - lo);
        }
    }
    out
}

type EvalFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A vector field on the torus with an optional analytic Jacobian.
#[derive(Clone)]
pub struct VectorField {
    eval: EvalFn,
    jacobian: Option<EvalFn>,
}

impl VectorField {
    pub fn new(eval: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        VectorField { eval: Arc::new(eval), jacobian: None }
    }

    pub fn with_jacobian(mut self, jac: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    /// A constant field.
    pub fn constant(v: Vec<f64>) -> Self {
        let d = v.len();
        VectorField::new(move |_| v.clone()).with_jacobian(move |_| vec![0.0; d * d])
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.eval)(x)
    }

    pub fn jacobian(&self, x: &[f64]) -> Vec<f64> {
        match &self.jacobian {
            Some(j) => j(x),
            None => fd_jacobian(&*self.eval, x, JACOBIAN_FD_STEP),
        }
    }

    /// The field `[a, b]`.
    pub fn bracket(a: &VectorField, b: &VectorField) -> VectorField {
        let (a, b) = (a.clone(), b.clone());
        VectorField::new(move |x| lie_bracket(&a, &b, x))
    }
}

/// `[h, h̃](x) = (h·∇)h̃ − (h̃·∇)h`.
pub fn lie_bracket(h: &VectorField, ht: &VectorField, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let hv = h.eval(x);
    let htv = ht.eval(x);
    let jh = h.jacobian(x);
    let jht = ht.jacobian(x);
    (0..d)
        .map(|j| (0..d).map(|i| hv[i] * jht[j * d + i] - htv[i] * jh[j * d + i]).sum())
        .collect()
}

impl SdeProblem {
    /// The drift as a standalone vector field.
    pub fn drift_field(&self) -> VectorField {
        let d = self.d;
        let drift = self.drift.clone();
        let field = VectorField::new(move |x| {
            let mut v = vec![0.0; d];
            drift(x, &mut v);
            v
        });
        match &self.drift_jacobian {
            Some(jac) => {
                let jac = jac.clone();
                field.with_jacobian(move |x| {
                    let mut j = vec![0.0; d * d];
                    jac(x, &mut j);
                    j
                })
            }
            None => field,
        }
    }

    /// Column `k` of the diffusion as a vector field.
    pub fn diffusion_column(&self, k: usize) -> VectorField {
        let (d, m) = (self.d, self.m);
        let diffusion = self.diffusion.clone();
        let field = VectorField::new(move |x| {
            let mut g = vec![0.0; d * m];
            diffusion(x, &mut g);
            (0..d).map(|i| g[i * m + k]).collect()
        });
        if self.constant_diffusion {
            field.with_jacobian(move |_| vec![0.0; d * d])
        } else {
            field
        }
    }
}

/// Numerical rank of `Λ_depth(x)`, where `Λ₀ = span{f, g⁽¹⁾, …, g⁽ᵐ⁾}` and
/// `Λ_{n+1} = span{h, [h̄, h] : h ∈ Λ_n, h̄ ∈ Λ₀}`.
pub fn hormander_rank(problem: &SdeProblem, x: &[f64], depth: usize) -> usize {
    let base: Vec<VectorField> = std::iter::once(problem.drift_field())
        .chain((0..problem.noise_dim()).map(|k| problem.diffusion_column(k)))
        .collect();
    let mut fields = base.clone();
    let mut frontier = base.clone();
    for _ in 0..depth {
        let mut next = Vec::with_capacity(base.len() * frontier.len());
        for h in &frontier {
            for hb in &base {
                next.push(VectorField::bracket(hb, h));
            }
        }
        fields.extend(next.iter().cloned());
        frontier = next;
    }
    let d = problem.dim();
    let cols: Vec<f64> = fields.iter().flat_map(|h| h.eval(x)).collect();
    let mat = DMatrix::from_column_slice(d, fields.len(), &cols);
    mat.svd(false, false)
        .singular_values
        .iter()
        .filter(|s| **s > RANK_TOLERANCE)
        .count()
}

/// Fixed test problems addressable by string id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CatalogProblem {
    /// `f = −sin x`, `g = 1`, `V = −cos x`.
    Grad1d,
    /// `f = 0`, `g = 1`.
    Zero1d,
    /// `f = (−sin x₁ + 0.3 sin(x₂ − x₁), −sin x₂)`, `g = I`.
    Nongrad2d,
    /// `f = (sin x₂, 0.5)`, `g = (0, 1)ᵀ`.
    Hypo2d,
}

const NONGRAD_COUPLING: f64 = 0.3;
const HYPO_DRIFT: f64 = 0.5;

impl CatalogProblem {
    pub const ALL: [CatalogProblem; 4] =
        [CatalogProblem::Grad1d, CatalogProblem::Zero1d, CatalogProblem::Nongrad2d, CatalogProblem::Hypo2d];

    pub fn id(self) -> &'static str {
        match self {
            CatalogProblem::Grad1d => "grad1d",
            CatalogProblem::Zero1d => "zero1d",
            CatalogProblem::Nongrad2d => "nongrad2d",
            CatalogProblem::Hypo2d => "hypo2d",
        }
    }

    pub fn build(self) -> SdeProblem {
        match self {
            CatalogProblem::Grad1d => SdeProblem::new(
                self.id(),
                1,
                1,
                Arc::new(|x, f| f[0] = -x[0].sin()),
                Arc::new(|_, g| g[0] = 1.0),
            )
            .with_jacobian(Arc::new(|x, j| j[0] = -x[0].cos()))
            .with_hessian(Arc::new(|x, h| h[0] = x[0].sin()))
            .with_potential(Arc::new(|x| -x[0].cos()))
            .with_lipschitz_bound(1.0)
            .with_constant_diffusion(),
            CatalogProblem::Zero1d => SdeProblem::new(
                self.id(),
                1,
                1,
                Arc::new(|_, f| f[0] = 0.0),
                Arc::new(|_, g| g[0] = 1.0),
            )
            .with_jacobian(Arc::new(|_, j| j[0] = 0.0))
            .with_hessian(Arc::new(|_, h| h[0] = 0.0))
            .with_potential(Arc::new(|_| 0.0))
            .with_lipschitz_bound(0.0)
            .with_constant_diffusion(),
            CatalogProblem::Nongrad2d => SdeProblem::new(
                self.id(),
                2,
                2,
                Arc::new(|x, f| {
                    f[0] = -x[0].sin() + NONGRAD_COUPLING * (x[1] - x[0]).sin();
                    f[1] = -x[1].sin();
                }),
                Arc::new(|_, g| g.copy_from_slice(&[1.0, 0.0, 0.0, 1.0])),
            )
            .with_jacobian(Arc::new(|x, j| {
                let c = NONGRAD_COUPLING * (x[1] - x[0]).cos();
                j[0] = -x[0].cos() - c;
                j[1] = c;
                j[2] = 0.0;
                j[3] = -x[1].cos();
            }))
            .with_hessian(Arc::new(|x, h| {
                // f₁: ∂²/∂x₁² = sin x₁ − c s, ∂²/∂x₁∂x₂ = c s, ∂²/∂x₂² = −c s with s = sin(x₂ − x₁)
                let s = NONGRAD_COUPLING * (x[1] - x[0]).sin();
                h[0] = x[0].sin() - s;
                h[1] = s;
                h[2] = s;
                h[3] = -s;
                h[4] = 0.0;
                h[5] = 0.0;
                h[6] = 0.0;
                h[7] = x[1].sin();
            }))
            // max row sum of |J|: (1 + 0.3) + 0.3
            .with_lipschitz_bound(1.0 + 2.0 * NONGRAD_COUPLING)
            .with_constant_diffusion(),
            CatalogProblem::Hypo2d => SdeProblem::new(
                self.id(),
                2,
                1,
                Arc::new(|x, f| {
                    f[0] = x[1].sin();
                    f[1] = HYPO_DRIFT;
                }),
                Arc::new(|_, g| {
                    g[0] = 0.0;
                    g[1] = 1.0;
                }),
            )
            .with_jacobian(Arc::new(|x, j| {
                j[0] = 0.0;
                j[1] = x[1].cos();
                j[2] = 0.0;
                j[3] = 0.0;
            }))
            .with_hessian(Arc::new(|x, h| {
                h.fill(0.0);
                h[3] = -x[1].sin();
            }))
            .with_lipschitz_bound(1.0)
            .with_constant_diffusion(),
        }
    }
}

impl FromStr for CatalogProblem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CatalogProblem::ALL
            .into_iter()
            .find(|p| p.id() == s)
            .ok_or_else(|| Error::UnknownId { kind: "problem", id: s.to_string() })
    }
}

/// Looks up a catalog problem by id.
pub fn catalog_problem(id: &str) -> Result<SdeProblem> {
    Ok(id.parse::<CatalogProblem>()?.build())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn wrap_examples() {
        assert_eq!(TorusPoint::wrap(&[TAU + 0.5]).unwrap().coords()[0], (TAU + 0.5) - TAU);
        assert!((TorusPoint::wrap(&[-0.3]).unwrap().coords()[0] - (TAU - 0.3)).abs() < 1e-15);
        let p = TorusPoint::wrap(&[1.0, 7.0]).unwrap();
        assert_eq!(p.coords(), &[1.0, 7.0 - TAU]);
    }

    #[test]
    fn wrap_ties_and_errors() {
        assert_eq!(wrap_coord(TAU), 0.0);
        assert_eq!(wrap_coord(-1e-300), 0.0);
        assert!(wrap_coord(-1e-17) < TAU);
        assert!(matches!(TorusPoint::wrap(&[f64::NAN]), Err(Error::NonFiniteState)));
        assert!(matches!(TorusPoint::wrap(&[0.0, f64::INFINITY]), Err(Error::NonFiniteState)));
    }

    #[test]
    fn drift_examples() {
        let grad = CatalogProblem::Grad1d.build();
        assert_eq!(grad.eval_drift(&TorusPoint::wrap(&[FRAC_PI_2]).unwrap()), vec![-1.0]);
        assert_eq!(grad.eval_drift(&TorusPoint::origin(1)), vec![0.0]);
        let hypo = CatalogProblem::Hypo2d.build();
        assert_eq!(hypo.eval_drift(&TorusPoint::wrap(&[0.0, FRAC_PI_2]).unwrap()), vec![1.0, 0.5]);
    }

    #[test]
    fn diffusion_shapes() {
        for p in CatalogProblem::ALL {
            let prob = p.build();
            let g = prob.eval_diffusion(&vec![0.3; prob.dim()]);
            assert_eq!((g.nrows(), g.ncols()), (prob.dim(), prob.noise_dim()));
        }
    }

    #[test]
    fn bracket_examples() {
        let hypo = CatalogProblem::Hypo2d.build();
        let e2 = VectorField::constant(vec![0.0, 1.0]);
        let f = hypo.drift_field();
        let b = lie_bracket(&e2, &f, &[0.0, 0.0]);
        assert!((b[0] - 1.0).abs() < 1e-12 && b[1].abs() < 1e-12);
        let same = lie_bracket(&f, &f, &[0.4, 1.1]);
        assert!(same.iter().all(|v| v.abs() < 1e-12));
        let c = lie_bracket(&e2, &VectorField::constant(vec![3.0, -1.0]), &[2.0, 5.0]);
        assert_eq!(c, vec![0.0, 0.0]);
    }

    #[test]
    fn bracket_with_fd_jacobian_matches_analytic() {
        let hypo = CatalogProblem::Hypo2d.build();
        let f = hypo.drift_field();
        let f_fd = VectorField::new(move |x| vec![x[1].sin(), 0.5]);
        let e2 = VectorField::constant(vec![0.0, 1.0]);
        let x = [0.7, 2.2];
        let a = lie_bracket(&e2, &f, &x);
        let b = lie_bracket(&e2, &f_fd, &x);
        assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
    }

    #[test]
    fn hormander_examples() {
        let hypo = CatalogProblem::Hypo2d.build();
        assert_eq!(hormander_rank(&hypo, &[0.0, 0.0], 0), 1);
        assert_eq!(hormander_rank(&hypo, &[0.0, 0.0], 1), 2);
        assert_eq!(hormander_rank(&hypo, &[0.0, FRAC_PI_2], 0), 2);
        let zero = CatalogProblem::Zero1d.build();
        assert_eq!(hormander_rank(&zero, &[1.0], 0), 1);
    }

    #[test]
    fn fd_hessian_matches_analytic() {
        let p = CatalogProblem::Nongrad2d.build();
        let fd = SdeProblem::new("fd", 2, 2, p.drift.clone(), p.diffusion.clone())
            .with_jacobian(p.drift_jacobian.clone().unwrap());
        let x = [0.9, 4.1];
        let mut a = vec![0.0; 8];
        let mut b = vec![0.0; 8];
        p.hessian_into(&x, &mut a);
        fd.hessian_into(&x, &mut b);
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-8, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn catalog_ids_round_trip() {
        for p in CatalogProblem::ALL {
            assert_eq!(p.id().parse::<CatalogProblem>().unwrap(), p);
            assert_eq!(catalog_problem(p.id()).unwrap().id(), p.id());
        }
        assert!(matches!(catalog_problem("grad3d"), Err(Error::UnknownId { .. })));
    }

    #[test]
    fn lipschitz_bounds_dominate_jacobian() {
        for p in CatalogProblem::ALL {
            let prob = p.build();
            let d = prob.dim();
            let mut j = vec![0.0; d * d];
            for s in 0..200 {
                let x: Vec<f64> = (0..d).map(|i| (s as f64 * 0.37 + i as f64 * 1.3) % TAU).collect();
                prob.jacobian_into(&x, &mut j);
                let row_max = (0..d)
                    .map(|i| (0..d).map(|k| j[i * d + k].abs()).sum::<f64>())
                    .fold(0.0, f64::max);
                assert!(row_max <= prob.lipschitz_bound() + 1e-12);
            }
        }
    }
}
