//! Log-scaled factorization of a long matrix product.
//!
//! The running product is stored as `X = Q * diag(exp(L)) * T` with `Q`
//! orthogonal, `L` a vector of log-scales and `T` a matrix with unit-norm
//! rows. Multiplying by a new factor `W` re-factors `W * Q * diag(exp(L))` by
//! a QR decomposition whose columns are pre-sorted by their scaled norm, so
//! the triangular factor stays graded and `T` stays well conditioned. No
//! quantity spanning the dynamic range of `X` is ever formed in floating
//! point: the scales live in `L`.
//!
//! The singular values of `X` equal those of `diag(exp(L)) * T`; they are
//! extracted with a one-sided Jacobi iteration on the scaled rows, which is
//! accurate to relative precision for row-graded matrices.

use std::collections::HashMap;

use faer::linalg::matmul::matmul;
use faer::linalg::matmul::triangular::{self, BlockStructure};
use faer::{Accum, Mat, Par};

use crate::error::{LabError, Result};
use crate::matprod::wedge::is_numerically_singular;

const MAX_SWEEPS: usize = 100;
// beyond this log-scale gap a rotation degenerates to a projection of the
// smaller row and exp() of the gap would overflow
const LOG_GAP_LIMIT: f64 = 600.0;
const BUCKET_WIDTH: f64 = 64.0;
const SAFE_EXP: f64 = 600.0;

#[derive(Debug, Clone)]
pub(crate) struct GradedProduct {
    n: usize,
    q: Mat<f64>,
    log_scale: Vec<f64>,
    t: Mat<f64>,
    steps: usize,
    wq: Mat<f64>,
    next_t: Mat<f64>,
}

impl GradedProduct {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            q: Mat::identity(n, n),
            log_scale: vec![0.0; n],
            t: Mat::identity(n, n),
            steps: 0,
            wq: Mat::zeros(n, n),
            next_t: Mat::zeros(n, n),
        }
    }

    /// Number of factors absorbed so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Left-multiply the product by `w`.
    pub fn push(&mut self, w: faer::MatRef<'_, f64>) -> Result<()> {
        let n = self.n;
        if w.nrows() != n || w.ncols() != n {
            return Err(LabError::invalid("w", format!("expected {n}x{n} factor")));
        }
        matmul(self.wq.as_mut(), Accum::Replace, w, self.q.as_ref(), 1.0, Par::Seq);

        // order columns of W Q diag(exp L) by decreasing scaled norm
        let keys: Vec<f64> = (0..n)
            .map(|j| self.wq.col(j).norm_l2().ln() + self.log_scale[j])
            .collect();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]));

        let permuted = Mat::from_fn(n, n, |i, j| self.wq[(i, perm[j])]);
        let qr = permuted.qr();
        let r = qr.thin_R();

        let diag: Vec<f64> = (0..n).map(|i| r[(i, i)].abs()).collect();
        let (lo, hi) = diag
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
        if is_numerically_singular(lo, hi, n) {
            return Err(LabError::RankDeficient {
                step: self.steps,
                ratio: if hi > 0.0 { lo / hi } else { 0.0 },
            });
        }

        // S = diag(|r_ii| e^{L_p(i)})^{-1} * R * diag(e^{L_p(j)}), upper triangular
        let lp: Vec<f64> = perm.iter().map(|&p| self.log_scale[p]).collect();
        let inv_diag: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
        let mut s = Mat::<f64>::zeros(n, n);
        // e^{lp_j - lp_i} = e^{lp_j - c} e^{c - lp_i} with c the bucket of lp_j;
        // row factors are shared by every column in the same bucket
        let mut row_factors: HashMap<i64, Vec<f64>> = HashMap::new();
        for j in 0..n {
            let bucket = (lp[j] / BUCKET_WIDTH).floor() as i64;
            let c = bucket as f64 * BUCKET_WIDTH;
            let cf = (lp[j] - c).exp();
            let rf = row_factors
                .entry(bucket)
                .or_insert_with(|| lp.iter().map(|l| (c - l).exp()).collect());
            let rcol = r.col(j);
            let scol = s.col_as_slice_mut(j);
            for i in 0..=j {
                let rij = rcol[i];
                if rij == 0.0 {
                    continue;
                }
                scol[i] = if c - lp[i] < SAFE_EXP {
                    rij * inv_diag[i] * rf[i] * cf
                } else {
                    (rij.abs().ln() - diag[i].ln() + lp[j] - lp[i]).exp().copysign(rij)
                };
            }
        }
        let t_perm = Mat::from_fn(n, n, |i, j| self.t[(perm[i], j)]);
        triangular::matmul(
            self.next_t.as_mut(),
            BlockStructure::Rectangular,
            Accum::Replace,
            s.as_ref(),
            BlockStructure::TriangularUpper,
            t_perm.as_ref(),
            BlockStructure::Rectangular,
            1.0,
            Par::Seq,
        );

        for i in 0..n {
            self.log_scale[i] = diag[i].ln() + lp[i];
        }
        normalize_rows(&mut self.next_t, &mut self.log_scale);
        std::mem::swap(&mut self.t, &mut self.next_t);
        self.q = qr.compute_thin_Q();
        self.steps += 1;
        Ok(())
    }

    /// `log s_i` of the accumulated product, in decreasing order.
    pub fn log_singular_values(&self) -> Vec<f64> {
        let mut out = scaled_row_jacobi(&self.t, &self.log_scale);
        out.sort_by(|a, b| b.total_cmp(a));
        out
    }

    /// `log |det X|`.
    #[cfg(test)]
    pub fn log_abs_det(&self) -> f64 {
        // det T is not 1 in general; go through the singular values
        self.log_singular_values().iter().sum()
    }
}

fn normalize_rows(t: &mut Mat<f64>, log_scale: &mut [f64]) {
    let n = t.nrows();
    let mut sq = vec![0.0; n];
    for j in 0..t.ncols() {
        for (acc, x) in sq.iter_mut().zip(t.col_as_slice(j)) {
            *acc += x * x;
        }
    }
    let inv: Vec<f64> = sq.iter().map(|s| 1.0 / s.sqrt()).collect();
    for j in 0..t.ncols() {
        for (x, f) in t.col_as_slice_mut(j).iter_mut().zip(&inv) {
            *x *= f;
        }
    }
    for (l, s) in log_scale.iter_mut().zip(&sq) {
        *l += 0.5 * s.ln();
    }
}

/// Singular values (as logs, unsorted) of `diag(exp(log_scale)) * rows`,
/// where `rows` has unit-norm rows.
///
/// One-sided Jacobi: pairs of rows are rotated until all are mutually
/// orthogonal, after which the row norms are the singular values. Each row is
/// kept as (log-scale, unit vector) so rows differing by more than the
/// floating-point range never meet in a single floating-point expression.
pub(crate) fn scaled_row_jacobi(rows: &Mat<f64>, log_scale: &[f64]) -> Vec<f64> {
    let n = rows.nrows();
    let m = rows.ncols();
    // column-major copy of rows^T: vector i occupies v[i*m .. (i+1)*m]
    let mut v = vec![0.0; n * m];
    for j in 0..m {
        for i in 0..n {
            v[i * m + j] = rows[(i, j)];
        }
    }
    let mut l = log_scale.to_vec();
    // start from decreasing scale; speeds up convergence for graded input
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| l[b].total_cmp(&l[a]));
    let mut sorted = vec![0.0; n * m];
    for (dst, &src) in order.iter().enumerate() {
        sorted[dst * m..(dst + 1) * m].copy_from_slice(&v[src * m..(src + 1) * m]);
    }
    v = sorted;
    l = order.iter().map(|&i| l[i]).collect();

    let tol = f64::EPSILON * (m.max(1) as f64);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                if l[p] == f64::NEG_INFINITY || l[q] == f64::NEG_INFINITY {
                    continue;
                }
                let (head, tail) = v.split_at_mut(q * m);
                let u = &mut head[p * m..(p + 1) * m];
                let w = &mut tail[..m];
                let g = dot(u, w);
                if g.abs() <= tol {
                    continue;
                }
                rotated = true;
                let gap = l[p] - l[q];
                // new_p = e^{l_p} (a_u u + a_w w), new_q = e^{l_q} (b_u u + b_w w)
                let (a_u, a_w, b_u, b_w) = if gap.abs() <= LOG_GAP_LIMIT {
                    let zeta = -gap.sinh() / g;
                    let t = zeta.signum() / (zeta.abs() + zeta.hypot(1.0));
                    let c = 1.0 / t.hypot(1.0);
                    let s = c * t;
                    (c, -s * (-gap).exp(), s * gap.exp(), c)
                } else if gap > 0.0 {
                    (1.0, 0.0, -g, 1.0)
                } else {
                    (1.0, -g, 0.0, 1.0)
                };
                let (nu, nw) = rotate(u, w, [a_u, a_w, b_u, b_w]);
                l[p] += 0.5 * nu.ln();
                l[q] += 0.5 * nw.ln();
                let (su, sw) = (1.0 / nu.sqrt(), 1.0 / nw.sqrt());
                if nu > 0.0 {
                    u.iter_mut().for_each(|x| *x *= su);
                }
                if nw > 0.0 {
                    w.iter_mut().for_each(|x| *x *= sw);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    l
}

const LANES: usize = 8;

// several independent accumulators so the reduction vectorizes
fn dot(u: &[f64], w: &[f64]) -> f64 {
    let mut acc = [0.0; LANES];
    let (uc, ur) = u.split_at(u.len() - u.len() % LANES);
    let (wc, wr) = w.split_at(uc.len());
    for (a, b) in uc.chunks_exact(LANES).zip(wc.chunks_exact(LANES)) {
        for k in 0..LANES {
            acc[k] += a[k] * b[k];
        }
    }
    let tail: f64 = ur.iter().zip(wr).map(|(a, b)| a * b).sum();
    acc.iter().sum::<f64>() + tail
}

/// `(u, w) <- (a_u u + a_w w, b_u u + b_w w)`; returns the new squared norms.
fn rotate(u: &mut [f64], w: &mut [f64], [a_u, a_w, b_u, b_w]: [f64; 4]) -> (f64, f64) {
    let mut nu = [0.0; LANES];
    let mut nw = [0.0; LANES];
    let split = u.len() - u.len() % LANES;
    let (uc, ur) = u.split_at_mut(split);
    let (wc, wr) = w.split_at_mut(split);
    for (x, y) in uc.chunks_exact_mut(LANES).zip(wc.chunks_exact_mut(LANES)) {
        for k in 0..LANES {
            let (xu, yw) = (x[k], y[k]);
            x[k] = a_u * xu + a_w * yw;
            y[k] = b_u * xu + b_w * yw;
            nu[k] += x[k] * x[k];
            nw[k] += y[k] * y[k];
        }
    }
    let (mut tu, mut tw) = (0.0, 0.0);
    for (x, y) in ur.iter_mut().zip(wr.iter_mut()) {
        let (xu, yw) = (*x, *y);
        *x = a_u * xu + a_w * yw;
        *y = b_u * xu + b_w * yw;
        tu += *x * *x;
        tw += *y * *y;
    }
    (nu.iter().sum::<f64>() + tu, nw.iter().sum::<f64>() + tw)
}
