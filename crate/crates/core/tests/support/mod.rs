//! Independent reference computations for the integration tests.
//!
//! Products are formed directly in double-double arithmetic (about 32
//! significant digits) and their singular values are extracted with a
//! one-sided Jacobi iteration in the same arithmetic. None of this shares code
//! with the library's log-scaled recursion.

#![allow(dead_code)]

use std::ops::{Add, Div, Mul, Neg, Sub};

use faer::{Mat, MatRef};
use lyapunov_lab::ProductStream;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    fn renorm(hi: f64, lo: f64) -> Self {
        let (hi, lo) = quick_two_sum(hi, lo);
        Dd { hi, lo }
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let q = self.hi.sqrt();
        let r = self - Dd::from_f64(q) * Dd::from_f64(q);
        Dd::renorm(q, r.hi / (2.0 * q))
    }

    /// Natural log, to full double precision.
    pub fn ln(self) -> f64 {
        self.hi.ln() + (self.lo / self.hi).ln_1p()
    }

    pub fn signum(self) -> f64 {
        if self.hi < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Dd::renorm(s, e + f)
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        Dd::renorm(p, e + (self.hi * o.lo + self.lo * o.hi))
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * Dd::from_f64(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::from_f64(q2);
        let q3 = r.hi / o.hi;
        Dd::renorm(q1, q2) + Dd::from_f64(q3)
    }
}

/// Dense matrix in double-double, column-major as a list of columns.
#[derive(Debug, Clone)]
pub struct DdMat {
    pub cols: Vec<Vec<Dd>>,
}

impl DdMat {
    pub fn from_f64(m: MatRef<'_, f64>) -> Self {
        let cols = (0..m.ncols())
            .map(|j| (0..m.nrows()).map(|i| Dd::from_f64(m[(i, j)])).collect())
            .collect();
        DdMat { cols }
    }

    pub fn nrows(&self) -> usize {
        self.cols.first().map_or(0, Vec::len)
    }

    /// `w * self` for an f64 matrix `w`.
    pub fn left_mul(&self, w: MatRef<'_, f64>) -> DdMat {
        let cols = self
            .cols
            .iter()
            .map(|c| {
                (0..w.nrows())
                    .map(|i| {
                        c.iter()
                            .enumerate()
                            .fold(Dd::ZERO, |acc, (l, x)| acc + Dd::from_f64(w[(i, l)]) * *x)
                    })
                    .collect()
            })
            .collect();
        DdMat { cols }
    }

    fn max_abs(&self) -> f64 {
        self.cols
            .iter()
            .flatten()
            .map(|x| x.hi.abs())
            .fold(0.0, f64::max)
    }

    fn scale(&mut self, f: f64) {
        for x in self.cols.iter_mut().flatten() {
            *x = *x * Dd::from_f64(f);
        }
    }
}

fn dot(a: &[Dd], b: &[Dd]) -> Dd {
    a.iter().zip(b).fold(Dd::ZERO, |acc, (x, y)| acc + *x * *y)
}

/// Logs of the singular values of `m`, in decreasing order, by one-sided
/// Jacobi on its columns.
pub fn dd_log_singular_values(m: &DdMat) -> Vec<f64> {
    let mut a = m.cols.clone();
    let k = a.len();
    for _ in 0..80 {
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let alpha = dot(&a[p], &a[p]);
                let beta = dot(&a[q], &a[q]);
                let gamma = dot(&a[p], &a[q]);
                if gamma.hi.abs() <= 1e-30 * (alpha.hi * beta.hi).sqrt() {
                    continue;
                }
                rotated = true;
                let two = Dd::from_f64(2.0);
                let zeta = (beta - alpha) / (two * gamma);
                let t = Dd::from_f64(zeta.signum()) / (zeta.abs() + (Dd::ONE + zeta * zeta).sqrt());
                let c = Dd::ONE / (Dd::ONE + t * t).sqrt();
                let s = c * t;
                for i in 0..a[p].len() {
                    let (x, y) = (a[p][i], a[q][i]);
                    a[p][i] = c * x - s * y;
                    a[q][i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut out: Vec<f64> = a.iter().map(|c| 0.5 * dot(c, c).ln()).collect();
    out.sort_by(|x, y| y.total_cmp(x));
    out
}

/// Factors of `stream`, in multiplication order, from a fresh replay.
pub fn factors(stream: &ProductStream) -> Vec<Mat<f64>> {
    let mut s = stream.replay();
    let mut out = Vec::new();
    let mut buf = Mat::zeros(0, 0);
    while s.next_into(&mut buf) {
        out.push(buf.clone());
    }
    out
}

/// `W_N ... W_1 * start`, with a scalar rescaling after every factor; returns
/// the rescaled product and the accumulated log of the scalings.
pub fn dd_product(factors: &[Mat<f64>], start: MatRef<'_, f64>) -> (DdMat, f64) {
    let mut x = DdMat::from_f64(start);
    let mut log_scale = 0.0;
    for w in factors {
        x = x.left_mul(w.as_ref());
        let m = x.max_abs();
        // power of two keeps the rescaling exact
        let e = m.log2().floor();
        x.scale((-e).exp2());
        log_scale += e * std::f64::consts::LN_2;
    }
    (x, log_scale)
}

/// Lyapunov exponents `(1/N) log s_i(W_N ... W_1)` from the direct product.
pub fn reference_spectrum(factors: &[Mat<f64>]) -> Vec<f64> {
    let n = factors[0].nrows();
    let (x, log_scale) = dd_product(factors, Mat::<f64>::identity(n, n).as_ref());
    let big_n = factors.len() as f64;
    dd_log_singular_values(&x)
        .into_iter()
        .map(|l| (l + log_scale) / big_n)
        .collect()
}

/// `(1/N) log ||W_N ... W_1 U||_(k)` from the direct product.
pub fn reference_pointwise(factors: &[Mat<f64>], u: MatRef<'_, f64>) -> f64 {
    let (x, log_scale) = dd_product(factors, u);
    let k = u.ncols() as f64;
    let total: f64 = dd_log_singular_values(&x).iter().sum();
    (total + k * log_scale) / factors.len() as f64
}
