//! Trigonometric test functions φ on the torus.
//!
//! An observable is a real trigonometric polynomial stored by its Fourier
//! coefficients `φ(x) = Σ_k c_k e^{i k·x}` with `c_{−k} = conj(c_k)`.
//! Ids are products of factors separated by `*`:
//!
//! ```text
//! one | const:<c> | cos[:k1,k2,..] | sin[:k1,k2,..]
//! ```
//!
//! `cos` alone means `cos x₁`; missing frequency entries are zero, so in two
//! dimensions `cos:0,1` is `cos x₂` and `cos:1*cos:0,1` is `cos x₁ cos x₂`.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
struct TrigTerm {
    k: Vec<i32>,
    cos: f64,
    sin: f64,
}

#[derive(Clone, PartialEq)]
pub struct Observable {
    label: String,
    d: usize,
    coeffs: BTreeMap<Vec<i32>, Complex64>,
    constant: f64,
    terms: Vec<TrigTerm>,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Observable({})", self.label)
    }
}

fn is_positive_half(k: &[i32]) -> bool {
    k.iter().find(|c| **c != 0).is_some_and(|c| *c > 0)
}

impl Observable {
    /// Builds an observable from Fourier coefficients; negative frequencies
    /// are filled in by conjugate symmetry from the positive half.
    pub fn from_coeffs(label: impl Into<String>, d: usize, coeffs: BTreeMap<Vec<i32>, Complex64>) -> Self {
        let mut sym: BTreeMap<Vec<i32>, Complex64> = BTreeMap::new();
        for (k, c) in &coeffs {
            assert_eq!(k.len(), d, "frequency dimension");
            let neg: Vec<i32> = k.iter().map(|v| -v).collect();
            if k == &neg {
                *sym.entry(k.clone()).or_default() += Complex64::new(c.re, 0.0);
            } else if is_positive_half(k) {
                *sym.entry(k.clone()).or_default() += c;
                *sym.entry(neg).or_default() += c.conj();
            }
        }
        sym.retain(|_, c| c.norm() > 1e-300);
        let zero = vec![0; d];
        let constant = sym.get(&zero).map_or(0.0, |c| c.re);
        let terms = sym
            .iter()
            .filter(|(k, _)| is_positive_half(k))
            .map(|(k, c)| TrigTerm { k: k.clone(), cos: 2.0 * c.re, sin: -2.0 * c.im })
            .collect();
        Observable { label: label.into(), d, coeffs: sym, constant, terms }
    }

    pub fn constant(d: usize, c: f64) -> Self {
        let mut m = BTreeMap::new();
        m.insert(vec![0; d], Complex64::new(c, 0.0));
        let label = if c == 1.0 { "one".to_string() } else { format!("const:{c}") };
        Observable::from_coeffs(label, d, m)
    }

    /// `cos(k·x)`.
    pub fn cos(k: &[i32]) -> Self {
        let mut m = BTreeMap::new();
        let (pos, _) = positive_representative(k);
        m.insert(pos, Complex64::new(0.5, 0.0));
        Observable::from_coeffs(format!("cos:{}", join(k)), k.len(), m)
    }

    /// `sin(k·x)`.
    pub fn sin(k: &[i32]) -> Self {
        let mut m = BTreeMap::new();
        let (pos, sign) = positive_representative(k);
        if pos.iter().any(|v| *v != 0) {
            // sin(k·x) = (e^{ik·x} − e^{−ik·x}) / 2i
            m.insert(pos, Complex64::new(0.0, -0.5 * sign));
        }
        Observable::from_coeffs(format!("sin:{}", join(k)), k.len(), m)
    }

    /// Parses an observable id for a d-dimensional torus.
    pub fn parse(id: &str, d: usize) -> Result<Self> {
        let unknown = || Error::UnknownId { kind: "observable", id: id.to_string() };
        let mut acc: Option<Observable> = None;
        for factor in id.split('*').map(str::trim) {
            let (head, arg) = match factor.split_once(':') {
                Some((h, a)) => (h, Some(a)),
                None => (factor, None),
            };
            let obs = match (head, arg) {
                ("one", None) => Observable::constant(d, 1.0),
                ("const", Some(a)) => Observable::constant(d, a.parse::<f64>().map_err(|_| unknown())?),
                ("cos" | "sin", _) => {
                    let mut k = vec![0i32; d];
                    match arg {
                        None => k[0] = 1,
                        Some(a) => {
                            let parts: Vec<i32> = a
                                .split(',')
                                .map(|s| s.trim().parse::<i32>())
                                .collect::<std::result::Result<_, _>>()
                                .map_err(|_| unknown())?;
                            if parts.len() > d {
                                return Err(Error::DimensionMismatch { expected: d, got: parts.len() });
                            }
                            k[..parts.len()].copy_from_slice(&parts);
                        }
                    }
                    if head == "cos" {
                        Observable::cos(&k)
                    } else {
                        Observable::sin(&k)
                    }
                }
                _ => return Err(unknown()),
            };
            acc = Some(match acc {
                None => obs,
                Some(prev) => prev.product(&obs),
            });
        }
        let mut obs = acc.ok_or_else(unknown)?;
        obs.label = id.to_string();
        Ok(obs)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = self.constant;
        for t in &self.terms {
            let phase: f64 = t.k.iter().zip(x).map(|(k, x)| *k as f64 * x).sum();
            if t.sin == 0.0 {
                v += t.cos * phase.cos();
            } else if t.cos == 0.0 {
                v += t.sin * phase.sin();
            } else {
                let (s, c) = phase.sin_cos();
                v += t.cos * c + t.sin * s;
            }
        }
        v
    }

    /// Fourier coefficients over all (positive and negative) frequencies.
    pub fn fourier_coeffs(&self) -> &BTreeMap<Vec<i32>, Complex64> {
        &self.coeffs
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest `|k|∞` present.
    pub fn max_frequency(&self) -> usize {
        self.coeffs.keys().flat_map(|k| k.iter().map(|v| v.unsigned_abs() as usize)).max().unwrap_or(0)
    }

    /// Upper bound on `|φ|∞` (sum of coefficient magnitudes).
    pub fn sup_bound(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).sum()
    }

    /// Upper bound on the `W^{order,∞}` norm: `Σ_k |c_k| max(1, |k|∞)^order`.
    pub fn sobolev_bound(&self, order: u32) -> f64 {
        self.coeffs
            .iter()
            .map(|(k, c)| {
                let kmax = k.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0).max(1) as f64;
                c.norm() * kmax.powi(order as i32)
            })
            .sum()
    }

    pub fn scale(&self, factor: f64) -> Observable {
        let coeffs = self.coeffs.iter().map(|(k, c)| (k.clone(), c * factor)).collect();
        Observable::from_coeffs(format!("{factor}*({})", self.label), self.d, coeffs)
    }

    pub fn add(&self, other: &Observable) -> Observable {
        assert_eq!(self.d, other.d);
        let mut coeffs = self.coeffs.clone();
        for (k, c) in &other.coeffs {
            *coeffs.entry(k.clone()).or_default() += c;
        }
        Observable::from_coeffs(format!("{}+{}", self.label, other.label), self.d, coeffs)
    }

    pub fn product(&self, other: &Observable) -> Observable {
        assert_eq!(self.d, other.d);
        let mut coeffs: BTreeMap<Vec<i32>, Complex64> = BTreeMap::new();
        for (ka, ca) in &self.coeffs {
            for (kb, cb) in &other.coeffs {
                let k: Vec<i32> = ka.iter().zip(kb).map(|(a, b)| a + b).collect();
                *coeffs.entry(k).or_default() += ca * cb;
            }
        }
        Observable::from_coeffs(format!("{}*{}", self.label, other.label), self.d, coeffs)
    }
}

fn positive_representative(k: &[i32]) -> (Vec<i32>, f64) {
    if is_positive_half(k) || k.iter().all(|v| *v == 0) {
        (k.to_vec(), 1.0)
    } else {
        (k.iter().map(|v| -v).collect(), -1.0)
    }
}

fn join(k: &[i32]) -> String {
    k.iter().map(i32::to_string).collect::<Vec<_>>().join(",")
}

/// Eight trigonometric observables normalized to unit `W^{2p,∞}` bound.
///
/// One dimension: `cos jx, sin jx` for `j = 1..4`. Two dimensions: cosines
/// and sines of `x₁, x₂, x₁ + x₂, x₁ − x₂`.
pub fn default_dictionary(d: usize, p: u32) -> Result<Vec<Observable>> {
    let freqs: Vec<Vec<i32>> = match d {
        1 => (1..=4).map(|j| vec![j]).collect(),
        2 => vec![vec![1, 0], vec![0, 1], vec![1, 1], vec![1, -1]],
        _ => return Err(Error::InvalidArgument(format!("no default dictionary for d = {d}"))),
    };
    Ok(freqs
        .iter()
        .flat_map(|k| [Observable::cos(k), Observable::sin(k)])
        .map(|obs| {
            let norm = obs.sobolev_bound(2 * p);
            let label = obs.label().to_string();
            obs.scale(1.0 / norm).with_label(label)
        })
        .collect())
}
