//! Complex banded LU with partial pivoting, LAPACK band layout.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A square band matrix held in column-major band storage with `kl` extra
/// rows on top for pivoting fill-in: `A(i, j)` lives at `ab[(kl + ku + i − j) + j·ldab]`.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<Complex64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, ldab, ab: vec![Complex64::new(0.0, 0.0); ldab * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn pos(&self, i: usize, j: usize) -> usize {
        self.kl + self.ku + i - j + j * self.ldab
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i + self.ku >= j && j + self.kl >= i
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if self.in_band(i, j) {
            self.ab[self.pos(i, j)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// Panics outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let p = self.pos(i, j);
        self.ab[p] = v;
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.n];
        for j in 0..self.n {
            for i in j.saturating_sub(self.ku)..(j + self.kl + 1).min(self.n) {
                y[i] += self.ab[self.pos(i, j)] * x[j];
            }
        }
        y
    }

    /// Factorizes in place.
    pub fn factor(mut self) -> Result<BandLu> {
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let kv = kl + ku;
        let ab = &mut self.ab;
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ldab;
            let mut jp = 0;
            let mut best = -1.0;
            for ii in 0..=km {
                let v = ab[col + kv + ii].norm();
                if v > best {
                    best = v;
                    jp = ii;
                }
            }
            ipiv[j] = j + jp;
            if best == 0.0 {
                return Err(Error::SingularSystem(0.0));
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a = kv + j - c + c * ldab;
                    let b = kv + j + jp - c + c * ldab;
                    ab.swap(a, b);
                }
            }
            let inv = Complex64::new(1.0, 0.0) / ab[col + kv];
            for ii in 1..=km {
                ab[col + kv + ii] *= inv;
            }
            for c in j + 1..=ju {
                let t = ab[kv + j - c + c * ldab];
                if t.re == 0.0 && t.im == 0.0 {
                    continue;
                }
                for ii in 1..=km {
                    let l = ab[col + kv + ii];
                    ab[kv + j + ii - c + c * ldab] -= l * t;
                }
            }
        }
        Ok(BandLu { m: self, ipiv })
    }
}

#[derive(Clone, Debug)]
pub struct BandLu {
    m: BandMatrix,
    ipiv: Vec<usize>,
}

impl BandLu {
    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [Complex64]) {
        let BandMatrix { n, kl, ku, ldab, ref ab } = self.m;
        let kv = kl + ku;
        for j in 0..n.saturating_sub(1) {
            let km = kl.min(n - 1 - j);
            b.swap(j, self.ipiv[j]);
            let t = b[j];
            for ii in 1..=km {
                b[j + ii] -= ab[kv + ii + j * ldab] * t;
            }
        }
        for j in (0..n).rev() {
            b[j] /= ab[kv + j * ldab];
            let t = b[j];
            for i in j.saturating_sub(kv)..j {
                b[i] -= ab[kv + i - j + j * ldab] * t;
            }
        }
    }

    /// Solves `Aᴴ x = b` in place.
    pub fn solve_adjoint(&self, b: &mut [Complex64]) {
        let BandMatrix { n, kl, ku, ldab, ref ab } = self.m;
        let kv = kl + ku;
        for j in 0..n {
            let mut s = b[j];
            for i in j.saturating_sub(kv)..j {
                s -= ab[kv + i - j + j * ldab].conj() * b[i];
            }
            b[j] = s / ab[kv + j * ldab].conj();
        }
        for j in (0..n.saturating_sub(1)).rev() {
            let km = kl.min(n - 1 - j);
            let mut s = b[j];
            for ii in 1..=km {
                s -= ab[kv + ii + j * ldab].conj() * b[j + ii];
            }
            b[j] = s;
            b.swap(j, self.ipiv[j]);
        }
    }

    /// Estimate of the smallest singular value by inverse iteration on `AᴴA`.
    pub fn min_singular_value(&self, iterations: usize) -> f64 {
        let n = self.m.n;
        let mut v: Vec<Complex64> =
            (0..n).map(|i| Complex64::new(1.0 + (i % 7) as f64 * 0.1, (i % 3) as f64 * 0.2 - 0.2)).collect();
        let mut lambda = 0.0;
        for _ in 0..iterations {
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v.iter_mut().for_each(|z| *z /= norm);
            self.solve_adjoint(&mut v);
            self.solve(&mut v);
            lambda = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        }
        1.0 / lambda.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample(n: usize, kl: usize, ku: usize) -> (BandMatrix, DMatrix<Complex64>) {
        let mut b = BandMatrix::zeros(n, kl, ku);
        let mut d = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                if b.in_band(i, j) {
                    // weak diagonal forces pivoting
                    let v = c(((3 * i + 7 * j) % 11) as f64 - 5.0, ((i * j) % 5) as f64 - 2.0)
                        + if i == j { c(0.01, 0.0) } else { c(0.0, 0.0) };
                    b.set(i, j, v);
                    d[(i, j)] = v;
                }
            }
        }
        (b, d)
    }

    #[test]
    fn solves_match_dense() {
        for (n, kl, ku) in [(1, 0, 0), (5, 1, 1), (12, 2, 3), (20, 4, 1), (9, 0, 2)] {
            let (b, d) = sample(n, kl, ku);
            let rhs: Vec<Complex64> = (0..n).map(|i| c(i as f64 + 1.0, -(i as f64) * 0.5)).collect();
            let lu = b.clone().factor().unwrap();
            let mut x = rhs.clone();
            lu.solve(&mut x);
            let ax = d.clone() * nalgebra::DVector::from_vec(x.clone());
            for i in 0..n {
                assert!((ax[i] - rhs[i]).norm() < 1e-9, "n={n} kl={kl} ku={ku}");
            }
            let mut y = rhs.clone();
            lu.solve_adjoint(&mut y);
            let ahy = d.adjoint() * nalgebra::DVector::from_vec(y);
            for i in 0..n {
                assert!((ahy[i] - rhs[i]).norm() < 1e-9);
            }
            let bx = b.mul_vec(&x);
            for i in 0..n {
                assert!((bx[i] - rhs[i]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn min_singular_value_matches_svd() {
        let (b, d) = sample(15, 2, 2);
        let sv = d.svd(false, false).singular_values;
        let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        let est = b.factor().unwrap().min_singular_value(200);
        assert!((est - min).abs() < 1e-6 * min.max(1.0), "{est} vs {min}");
    }

    #[test]
    fn singular_matrix_is_reported() {
        let b = BandMatrix::zeros(3, 1, 1);
        assert!(matches!(b.factor(), Err(Error::SingularSystem(_))));
    }
}
