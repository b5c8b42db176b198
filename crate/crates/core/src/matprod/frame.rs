use faer::{Mat, MatRef};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{LabError, Result};

/// Maximum tolerated `||U^T U - I||_F` for a matrix to be accepted as a frame.
pub const FRAME_TOLERANCE: f64 = 1e-10;

/// An `n x k` matrix with orthonormal columns, `1 <= k <= n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    m: Mat<f64>,
}

impl Frame {
    pub fn new(m: Mat<f64>) -> Result<Self> {
        let (n, k) = m.shape();
        if k == 0 || n == 0 {
            return Err(LabError::invalid("k", "a frame needs at least one column"));
        }
        if k > n {
            return Err(LabError::invalid("k", format!("k = {k} exceeds n = {n}")));
        }
        let residual = orthonormality_residual(m.as_ref());
        if !(residual <= FRAME_TOLERANCE) {
            return Err(LabError::NotAFrame { residual });
        }
        Ok(Self { m })
    }

    pub(crate) fn from_orthonormal(m: Mat<f64>) -> Self {
        debug_assert!(orthonormality_residual(m.as_ref()) <= 1e-8);
        Self { m }
    }

    /// The frame of the first `k` standard basis vectors.
    pub fn canonical(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(LabError::invalid("k", format!("need 1 <= k <= n, got k = {k}, n = {n}")));
        }
        Ok(Self {
            m: Mat::from_fn(n, k, |i, j| if i == j { 1.0 } else { 0.0 }),
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::canonical(n, n)
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn k(&self) -> usize {
        self.m.ncols()
    }

    pub fn as_ref(&self) -> MatRef<'_, f64> {
        self.m.as_ref()
    }

    pub fn into_inner(self) -> Mat<f64> {
        self.m
    }
}

/// `||U^T U - I||_F`.
pub fn orthonormality_residual(u: MatRef<'_, f64>) -> f64 {
    let gram = u.transpose() * u;
    let k = gram.nrows();
    let mut acc = 0.0;
    for j in 0..k {
        for i in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            acc += (gram[(i, j)] - target).powi(2);
        }
    }
    acc.sqrt()
}

/// A Haar-distributed element of the space of `k`-frames in `R^n`.
///
/// Orthonormalizes an `n x k` standard Gaussian matrix by QR and flips column
/// signs so that the triangular factor has a positive diagonal; with that
/// normalization the law of the orthonormal factor is exactly Haar.
pub fn haar_frame<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Frame> {
    if k == 0 || k > n {
        return Err(LabError::invalid("k", format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    loop {
        let g = Mat::<f64>::from_fn(n, k, |_, _| rng.sample(StandardNormal));
        let qr = g.qr();
        let r = qr.thin_R();
        let diag_min = (0..k).map(|i| r[(i, i)].abs()).fold(f64::INFINITY, f64::min);
        if diag_min <= 1e-12 * (n as f64).sqrt() {
            // numerically rank deficient draw; probability zero in exact arithmetic
            continue;
        }
        let mut q = qr.compute_thin_Q();
        for j in 0..k {
            if r[(j, j)] < 0.0 {
                for x in q.col_mut(j).iter_mut() {
                    *x = -*x;
                }
            }
        }
        return Ok(Frame::from_orthonormal(q));
    }
}

/// Output of [`frame_diagonalize`]: `reduced = P * U * C`, where `P` moves row
/// `perm[i]` of `U * C` to row `i`, and the top `k x k` block of `reduced` is
/// diagonal.
#[derive(Debug, Clone)]
pub struct FrameDiagonalization {
    pub reduced: Mat<f64>,
    pub perm: Vec<usize>,
    pub elimination: Mat<f64>,
}

impl FrameDiagonalization {
    /// `||reduced - P * U * C||_F`.
    pub fn reconstruction_residual(&self, u: &Frame) -> f64 {
        let uc = u.as_ref() * self.elimination.as_ref();
        let (n, k) = self.reduced.shape();
        let mut acc = 0.0;
        for j in 0..k {
            for i in 0..n {
                acc += (self.reduced[(i, j)] - uc[(self.perm[i], j)]).powi(2);
            }
        }
        acc.sqrt()
    }

    /// Smallest `|reduced[t, t]|` over the diagonal block.
    pub fn min_abs_diagonal(&self) -> f64 {
        (0..self.reduced.ncols())
            .map(|t| self.reduced[(t, t)].abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest off-diagonal magnitude inside the top `k x k` block.
    pub fn max_abs_off_diagonal(&self) -> f64 {
        let k = self.reduced.ncols();
        let mut worst: f64 = 0.0;
        for j in 0..k {
            for i in 0..k {
                if i != j {
                    worst = worst.max(self.reduced[(i, j)].abs());
                }
            }
        }
        worst
    }
}

/// Column-by-column diagonalization of a frame using row exchanges and
/// column eliminations.
///
/// At step `t` the row holding the largest `|entry|` of column `t` (lowest
/// index on ties) is exchanged into row `t`, then multiples of column `t` are
/// added to every other column so that row `t` vanishes off the diagonal.
/// Column `t` has norm at least one when it is pivoted, so every diagonal
/// entry ends up with magnitude at least `1/sqrt(n)`.
pub fn frame_diagonalize(u: &Frame) -> FrameDiagonalization {
    let (n, k) = (u.n(), u.k());
    let mut a = u.as_ref().to_owned();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = Mat::<f64>::identity(k, k);

    for t in 0..k {
        // rows < t of column t are already exactly zero
        let mut pivot_row = t;
        let mut best = a[(t, t)].abs();
        for i in t + 1..n {
            let v = a[(i, t)].abs();
            if v > best {
                best = v;
                pivot_row = i;
            }
        }
        if pivot_row != t {
            for j in 0..k {
                let tmp = a[(t, j)];
                a[(t, j)] = a[(pivot_row, j)];
                a[(pivot_row, j)] = tmp;
            }
            perm.swap(t, pivot_row);
        }

        let pivot = a[(t, t)];
        for j in 0..k {
            if j == t {
                continue;
            }
            let factor = a[(t, j)] / pivot;
            if factor == 0.0 {
                continue;
            }
            for i in 0..n {
                a[(i, j)] -= factor * a[(i, t)];
            }
            a[(t, j)] = 0.0;
            for i in 0..k {
                c[(i, j)] -= factor * c[(i, t)];
            }
        }
    }

    FrameDiagonalization {
        reduced: a,
        perm,
        elimination: c,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    #[test]
    fn rejects_degenerate_shapes() {
        assert!(Frame::canonical(3, 0).is_err());
        assert!(Frame::canonical(3, 4).is_err());
        assert!(Frame::new(Mat::from_fn(2, 1, |_, _| 1.0)).is_err());
        assert!(Frame::new(Mat::<f64>::zeros(3, 0)).is_err());
    }

    #[test]
    fn square_haar_frame_is_orthogonal() {
        let mut rng = rng_from_seed(1);
        let f = haar_frame(7, 7, &mut rng).unwrap();
        assert!(orthonormality_residual(f.as_ref()) < 1e-12);
        let det = f.as_ref().determinant();
        assert!((det.abs() - 1.0).abs() < 1e-10, "det {det}");
    }

    #[test]
    fn haar_frame_is_seeded() {
        let a = haar_frame(5, 2, &mut rng_from_seed(9)).unwrap();
        let b = haar_frame(5, 2, &mut rng_from_seed(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn haar_first_row_second_moment() {
        // E ||P^T e_1||^2 = k / n for a Haar frame P
        let (n, k, trials) = (10, 3, 100_000);
        let mut rng = rng_from_seed(2024);
        let vals: Vec<f64> = (0..trials)
            .map(|_| {
                let f = haar_frame(n, k, &mut rng).unwrap();
                (0..k).map(|j| f.as_ref()[(0, j)].powi(2)).sum()
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / trials as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let se = (var / trials as f64).sqrt();
        assert!((mean - 0.3).abs() <= 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn canonical_frame_is_fixed_point() {
        let u = Frame::canonical(6, 3).unwrap();
        let d = frame_diagonalize(&u);
        assert_eq!(d.reduced, u.as_ref().to_owned());
        assert_eq!(d.perm, (0..6).collect::<Vec<_>>());
        assert_eq!(d.elimination, Mat::<f64>::identity(3, 3));
    }

    #[test]
    fn equal_entries_pick_lowest_row() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u = Frame::new(Mat::from_fn(2, 1, |_, _| s)).unwrap();
        let d = frame_diagonalize(&u);
        assert_eq!(d.perm, vec![0, 1]);
        assert_eq!(d.reduced[(0, 0)], s);
        assert!((d.min_abs_diagonal() - 1.0 / 2.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn haar_frames_diagonalize() {
        let mut rng = rng_from_seed(77);
        for &(n, k) in &[(4, 2), (9, 9), (30, 7), (50, 20)] {
            for _ in 0..20 {
                let u = haar_frame(n, k, &mut rng).unwrap();
                let d = frame_diagonalize(&u);
                assert!(d.reconstruction_residual(&u) <= 1e-9);
                assert!(d.min_abs_diagonal() >= 1.0 / (n as f64).sqrt() - 1e-12);
                assert_eq!(d.max_abs_off_diagonal(), 0.0);
            }
        }
    }
}
