//! Scheme increments η (and ξ) with exact moment tables, drawn from
//! counter-based streams.
//!
//! A stream is identified by `(master_seed, stream_id)` and a position
//! `counter` measured in 64-bit words. Every draw consumes a fixed number of
//! words, so trajectory `j`, step `n` always reads the same words no matter
//! how work is scheduled.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;
/// Highest order kept in the exact moment table (z-scores of order k need order 2k).
pub const MOMENT_TABLE_LEN: usize = 16;
/// Nodes of the Gauss-Hermite rule standing in for the Gaussian law (exact to degree 19).
const GAUSS_HERMITE_NODES: usize = 10;
/// Sample moments further than this many standard errors from the exact value fail.
pub const MOMENT_Z_LIMIT: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    /// `P(η = ±1) = 1/2`.
    Rademacher,
    /// `P(η = ±√3) = 1/6`, `P(η = 0) = 2/3`; matches Gaussian moments through order 5.
    ThreePoint,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [NoiseKind::Gaussian, NoiseKind::Rademacher, NoiseKind::ThreePoint];

    pub fn id(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Rademacher => "rademacher",
            NoiseKind::ThreePoint => "three_point",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NoiseKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::UnknownId { kind: "noise", id: s.to_string() })
    }
}

/// Law of the i.i.d. increment components together with its moments.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    kind: NoiseKind,
    /// `exact_moments[k - 1] = E η^k`.
    exact_moments: [f64; MOMENT_TABLE_LEN],
}

impl NoiseModel {
    pub fn new(kind: NoiseKind) -> Self {
        let mut exact_moments = [0.0; MOMENT_TABLE_LEN];
        for k in (2..=MOMENT_TABLE_LEN).step_by(2) {
            exact_moments[k - 1] = match kind {
                // (k - 1)!!
                NoiseKind::Gaussian => (1..k).step_by(2).map(|j| j as f64).product(),
                NoiseKind::Rademacher => 1.0,
                NoiseKind::ThreePoint => 3f64.powi(k as i32 / 2 - 1),
            };
        }
        NoiseModel { kind, exact_moments }
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    /// `E η^k` for `1 <= k <= 16`.
    pub fn exact_moment(&self, k: usize) -> f64 {
        assert!((1..=MOMENT_TABLE_LEN).contains(&k), "moment order {k} outside table");
        self.exact_moments[k - 1]
    }

    /// Number of 64-bit words one draw of an m-vector consumes.
    pub fn words_per_draw(&self, m: usize) -> u64 {
        match self.kind {
            NoiseKind::Gaussian => 2 * m.div_ceil(2) as u64,
            NoiseKind::Rademacher | NoiseKind::ThreePoint => m as u64,
        }
    }

    /// A one-dimensional quadrature rule `(nodes, weights)` that integrates
    /// polynomials of degree ≤ 19 exactly against this law.
    pub fn quadrature(&self) -> (Vec<f64>, Vec<f64>) {
        match self.kind {
            NoiseKind::Rademacher => (vec![-1.0, 1.0], vec![0.5, 0.5]),
            NoiseKind::ThreePoint => (vec![-SQRT3, 0.0, SQRT3], vec![1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]),
            NoiseKind::Gaussian => gauss_hermite(GAUSS_HERMITE_NODES),
        }
    }

    /// One draw of an m-vector at the stream's current position; advances the
    /// counter by [`NoiseModel::words_per_draw`].
    pub fn sample_increment(&self, stream: &mut RngStream, out: &mut [f64]) {
        let mut src = stream.source();
        self.fill(&mut src, out);
        *stream = src.position();
    }

    /// Draws into `out` from an open source (hot-path form of `sample_increment`).
    #[inline]
    pub fn fill(&self, src: &mut StreamSource, out: &mut [f64]) {
        match self.kind {
            NoiseKind::Gaussian => fill_gaussian(src, out),
            NoiseKind::Rademacher => {
                for v in out.iter_mut() {
                    *v = if src.next_u64() >> 63 == 0 { -1.0 } else { 1.0 };
                }
            }
            NoiseKind::ThreePoint => {
                const SIXTH: u64 = u64::MAX / 6;
                for v in out.iter_mut() {
                    let u = src.next_u64();
                    *v = if u < SIXTH {
                        -SQRT3
                    } else if u < 2 * SIXTH {
                        SQRT3
                    } else {
                        0.0
                    };
                }
            }
        }
    }
}

/// Box-Muller on consecutive word pairs; an odd trailing component discards its partner.
#[inline]
pub fn fill_gaussian(src: &mut StreamSource, out: &mut [f64]) {
    for chunk in out.chunks_mut(2) {
        // (0, 1] keeps the logarithm finite
        let u1 = 1.0 - src.next_f64();
        let u2 = src.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        chunk[0] = r * c;
        if chunk.len() > 1 {
            chunk[1] = r * s;
        }
    }
}

/// Probabilists' Gauss-Hermite rule via the Golub-Welsch eigenproblem.
fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // the rule is symmetric; remove the eigensolver's round-off asymmetry
    let sym: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let (a, b) = (pairs[i], pairs[n - 1 - i]);
            (0.5 * (a.0 - b.0), 0.5 * (a.1 + b.1))
        })
        .collect();
    let total: f64 = sym.iter().map(|p| p.1).sum();
    (sym.iter().map(|p| p.0).collect(), sym.iter().map(|p| p.1 / total).collect())
}

/// Position in a counter-based random stream. Output is a pure function of
/// `(master_seed, stream_id, counter)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
    /// Number of 64-bit words already consumed.
    pub counter: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        RngStream { master_seed, stream_id, counter: 0 }
    }

    pub fn at(self, counter: u64) -> Self {
        RngStream { counter, ..self }
    }

    /// A fresh stream for the `index`-th child of this one.
    pub fn child(&self, index: u64) -> RngStream {
        RngStream::new(self.master_seed, stream_id(&[self.stream_id, index]))
    }

    /// Opens a generator positioned at `counter`.
    pub fn source(&self) -> StreamSource {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng.set_word_pos(2 * self.counter as u128);
        StreamSource { rng, base: *self, consumed: 0 }
    }
}

/// An open generator reading sequentially from an [`RngStream`].
#[derive(Clone, Debug)]
pub struct StreamSource {
    rng: ChaCha8Rng,
    base: RngStream,
    consumed: u64,
}

impl StreamSource {
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.consumed += 1;
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// The stream value after the words read so far.
    pub fn position(&self) -> RngStream {
        self.base.at(self.base.counter + self.consumed)
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit hash of a label (FNV-1a).
pub fn label_hash(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Combines parts into a stream id; stable across platforms and releases.
pub fn stream_id(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5eed_u64, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentRow {
    pub order: usize,
    pub sample: f64,
    pub exact: f64,
    pub z_score: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentReport {
    pub kind: NoiseKind,
    pub n_samples: usize,
    pub rows: Vec<MomentRow>,
    pub pass: bool,
}

/// Compares sample moments of `n_samples` scalar draws against the exact table.
pub fn validate_moments(
    model: &NoiseModel,
    max_order: usize,
    n_samples: usize,
    stream: RngStream,
) -> Result<MomentReport> {
    if n_samples < 10_000 {
        return Err(Error::InvalidArgument(format!("n_samples must be >= 1e4, got {n_samples}")));
    }
    if max_order == 0 || 2 * max_order > MOMENT_TABLE_LEN {
        return Err(Error::InvalidArgument(format!("max_order must be in 1..=8, got {max_order}")));
    }
    let mut src = stream.source();
    let mut sums = vec![0.0; max_order];
    let mut buf = [0.0];
    for _ in 0..n_samples {
        model.fill(&mut src, &mut buf);
        let mut p = 1.0;
        for s in sums.iter_mut() {
            p *= buf[0];
            *s += p;
        }
    }
    let n = n_samples as f64;
    let rows: Vec<MomentRow> = (1..=max_order)
        .map(|k| {
            let sample = sums[k - 1] / n;
            let exact = model.exact_moment(k);
            let se = ((model.exact_moment(2 * k) - exact * exact) / n).max(0.0).sqrt();
            let dev = sample - exact;
            let z_score = if se > 0.0 {
                dev / se
            } else if dev.abs() <= 1e-12 {
                0.0
            } else {
                f64::INFINITY
            };
            MomentRow { order: k, sample, exact, z_score, pass: z_score.abs() <= MOMENT_Z_LIMIT }
        })
        .collect();
    let pass = rows.iter().all(|r| r.pass);
    Ok(MomentReport { kind: model.kind(), n_samples, rows, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moment_tables() {
        let g = NoiseModel::new(NoiseKind::Gaussian);
        assert_eq!((1..=8).map(|k| g.exact_moment(k)).collect::<Vec<_>>(), [0., 1., 0., 3., 0., 15., 0., 105.]);
        let r = NoiseModel::new(NoiseKind::Rademacher);
        assert_eq!((1..=8).map(|k| r.exact_moment(k)).collect::<Vec<_>>(), [0., 1., 0., 1., 0., 1., 0., 1.]);
        let t = NoiseModel::new(NoiseKind::ThreePoint);
        assert_eq!((1..=8).map(|k| t.exact_moment(k)).collect::<Vec<_>>(), [0., 1., 0., 3., 0., 9., 0., 27.]);
    }

    #[test]
    fn quadrature_reproduces_moments() {
        for kind in NoiseKind::ALL {
            let model = NoiseModel::new(kind);
            let (x, w) = model.quadrature();
            for k in 1..=MOMENT_TABLE_LEN.min(18) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                let exact = model.exact_moment(k);
                assert!((q - exact).abs() <= 1e-9 * exact.abs().max(1.0), "{kind} order {k}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn supports() {
        let mut s = RngStream::new(7, 1);
        let mut v = [0.0; 5];
        let rad = NoiseModel::new(NoiseKind::Rademacher);
        let three = NoiseModel::new(NoiseKind::ThreePoint);
        for _ in 0..200 {
            rad.sample_increment(&mut s, &mut v);
            assert!(v.iter().all(|x| *x == 1.0 || *x == -1.0));
            three.sample_increment(&mut s, &mut v);
            assert!(v.iter().all(|x| *x == SQRT3 || *x == -SQRT3 || *x == 0.0));
        }
    }

    #[test]
    fn deterministic_and_fixed_consumption() {
        for kind in NoiseKind::ALL {
            let model = NoiseModel::new(kind);
            for m in 1..4 {
                let s0 = RngStream::new(42, 9).at(17);
                let (mut a, mut b) = (s0, s0);
                let mut va = vec![0.0; m];
                let mut vb = vec![0.0; m];
                model.sample_increment(&mut a, &mut va);
                model.sample_increment(&mut b, &mut vb);
                assert_eq!(va, vb);
                assert_eq!(a.counter - s0.counter, model.words_per_draw(m));
                // a later draw is addressable directly by its counter
                let mut c = s0;
                model.sample_increment(&mut c, &mut va);
                model.sample_increment(&mut c, &mut va);
                let mut direct = s0.at(s0.counter + model.words_per_draw(m));
                model.sample_increment(&mut direct, &mut vb);
                assert_eq!(va, vb);
            }
        }
    }

    #[test]
    fn rademacher_second_moment_is_exact() {
        let report = validate_moments(&NoiseModel::new(NoiseKind::Rademacher), 2, 10_000, RngStream::new(1, 2)).unwrap();
        assert_eq!(report.rows[1].sample, 1.0);
        assert_eq!(report.rows[1].z_score, 0.0);
    }

    #[test]
    fn validate_rejects_small_samples() {
        let m = NoiseModel::new(NoiseKind::Gaussian);
        assert!(validate_moments(&m, 4, 100, RngStream::new(0, 0)).is_err());
        assert!(validate_moments(&m, 9, 10_000, RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn stream_ids_are_distinct() {
        let ids: std::collections::HashSet<u64> = (0..10_000).map(|i| stream_id(&[3, i])).collect();
        assert_eq!(ids.len(), 10_000);
        assert_ne!(label_hash("grad1d"), label_hash("zero1d"));
    }
}
