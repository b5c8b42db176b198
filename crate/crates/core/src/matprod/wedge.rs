use faer::{Mat, MatRef};

use crate::error::{LabError, Result};
use crate::matprod::frame::Frame;

/// `log ||A||_(k)`: the sum of the logs of the `k` largest singular values.
///
/// Returns `f64::NEG_INFINITY` when `s_k(A) = 0`, meaning `s_k` is below the
/// rounding level `max(m, p) * eps * s_1` of the decomposition.
pub fn log_wedge_norm(a: MatRef<'_, f64>, k: usize) -> Result<f64> {
    let (m, p) = a.shape();
    if k == 0 {
        return Err(LabError::invalid("k", "k must be >= 1"));
    }
    if m < k || p < k {
        return Err(LabError::invalid(
            "k",
            format!("matrix is {m}x{p}, cannot take {k} singular values"),
        ));
    }
    let s = a
        .singular_values()
        .map_err(|e| LabError::invalid("a", format!("svd failed: {e:?}")))?;
    if is_numerically_singular(s[k - 1], s[0], m.max(p)) {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(s[..k].iter().map(|x| x.ln()).sum())
}

/// One step of the frame recursion.
#[derive(Debug, Clone)]
pub struct SvdStep {
    /// Left singular vectors of `W U`, columns ordered by decreasing singular value.
    pub frame: Frame,
    /// `log s_i(W U)`, descending.
    pub log_svs: Vec<f64>,
}

impl SvdStep {
    pub fn log_wedge(&self) -> f64 {
        self.log_svs.iter().sum()
    }
}

/// Rank test used by the recursion: `s_k <= n * eps * s_1` counts as singular.
pub(crate) fn is_numerically_singular(smallest: f64, largest: f64, n: usize) -> bool {
    !(smallest > 0.0) || smallest <= (n as f64) * f64::EPSILON * largest
}

/// Singular value decomposition of `W U`, returning the next frame and the log
/// singular values.
///
/// The sign of each left singular vector is fixed so that its first nonzero
/// entry is positive. `step` is only used to label rank-deficiency errors.
pub fn svd_step(w: MatRef<'_, f64>, u: &Frame, step: usize) -> Result<SvdStep> {
    let n = u.n();
    if w.nrows() != n || w.ncols() != n {
        return Err(LabError::invalid(
            "w",
            format!("expected {n}x{n} factor, got {}x{}", w.nrows(), w.ncols()),
        ));
    }
    let k = u.k();
    let b = w * u.as_ref();
    let svd = b
        .thin_svd()
        .map_err(|e| LabError::invalid("w", format!("svd failed: {e:?}")))?;
    let s = svd.S().column_vector();
    let (s1, sk) = (s[0], s[k - 1]);
    if is_numerically_singular(sk, s1, n) {
        return Err(LabError::RankDeficient {
            step,
            ratio: if s1 > 0.0 { sk / s1 } else { 0.0 },
        });
    }
    let mut left: Mat<f64> = svd.U().to_owned();
    for j in 0..k {
        let first = left.col(j).iter().copied().find(|x| *x != 0.0).unwrap_or(1.0);
        if first < 0.0 {
            for x in left.col_mut(j).iter_mut() {
                *x = -*x;
            }
        }
    }
    Ok(SvdStep {
        frame: Frame::from_orthonormal(left),
        log_svs: (0..k).map(|i| s[i].ln()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{sample_entries, EntryDistribution};
    use crate::matprod::frame::haar_frame;
    use crate::seed::rng_from_seed;

    #[test]
    fn identity_and_diagonal() {
        let i3 = Mat::<f64>::identity(3, 3);
        assert_eq!(log_wedge_norm(i3.as_ref(), 2).unwrap(), 0.0);
        let d = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => 2.0,
            (1, 1) => 0.5,
            _ => 0.0,
        });
        assert!(log_wedge_norm(d.as_ref(), 2).unwrap().abs() < 1e-15);
        assert!((log_wedge_norm(d.as_ref(), 1).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn singular_input_gives_negative_infinity() {
        let a = Mat::from_fn(3, 3, |i, _| i as f64);
        assert_eq!(log_wedge_norm(a.as_ref(), 3).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn shape_errors() {
        let a = Mat::<f64>::identity(3, 2);
        assert!(log_wedge_norm(a.as_ref(), 3).is_err());
        assert!(log_wedge_norm(a.as_ref(), 0).is_err());
    }

    #[test]
    fn matches_gram_determinant() {
        // 0.5 * log det(A^T A) for A = W U, W Gaussian / sqrt 5, U a 3-frame
        let mut rng = rng_from_seed(5);
        let g = EntryDistribution::gaussian();
        for _ in 0..20 {
            let w = sample_entries(&g, 5, 5, &mut rng) * faer::Scale(1.0 / 5f64.sqrt());
            let u = haar_frame(5, 3, &mut rng).unwrap();
            let a = &w * u.as_ref();
            let gram = a.transpose() * &a;
            let oracle = 0.5 * gram.determinant().ln();
            let got = log_wedge_norm(a.as_ref(), 3).unwrap();
            assert!((got - oracle).abs() <= 1e-10 * oracle.abs().max(1.0), "{got} vs {oracle}");
        }
    }

    #[test]
    fn identity_step_preserves_span() {
        let mut rng = rng_from_seed(3);
        let u = haar_frame(6, 3, &mut rng).unwrap();
        let step = svd_step(Mat::<f64>::identity(6, 6).as_ref(), &u, 0).unwrap();
        for x in &step.log_svs {
            assert!(x.abs() < 1e-14);
        }
        // same span: projector residual
        let p_old = u.as_ref() * u.as_ref().transpose();
        let p_new = step.frame.as_ref() * step.frame.as_ref().transpose();
        assert!((&p_old - &p_new).norm_l2() < 1e-12);
    }

    #[test]
    fn axis_aligned_step() {
        let mut w = Mat::<f64>::identity(4, 4);
        w[(0, 0)] = 3.0;
        let u = Frame::canonical(4, 1).unwrap();
        let step = svd_step(w.as_ref(), &u, 0).unwrap();
        assert!((step.log_svs[0] - 3f64.ln()).abs() < 1e-15);
        assert!((step.frame.as_ref()[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn step_is_consistent_with_wedge_norm() {
        let mut rng = rng_from_seed(8);
        let g = EntryDistribution::gaussian();
        for k in 1..=6 {
            let w = sample_entries(&g, 6, 6, &mut rng);
            let u = haar_frame(6, k, &mut rng).unwrap();
            let step = svd_step(w.as_ref(), &u, 0).unwrap();
            let direct = log_wedge_norm((&w * u.as_ref()).as_ref(), k).unwrap();
            assert!((step.log_wedge() - direct).abs() < 1e-10);
            let first_nonzero = step.frame.as_ref().col(0).iter().copied().find(|x| *x != 0.0);
            assert!(first_nonzero.unwrap() > 0.0);
        }
    }

    #[test]
    fn rank_deficiency_is_reported_with_step() {
        let w = Mat::from_fn(3, 3, |i, _| if i == 0 { 1.0 } else { 0.0 });
        let u = Frame::canonical(3, 2).unwrap();
        match svd_step(w.as_ref(), &u, 17) {
            Err(LabError::RankDeficient { step, .. }) => assert_eq!(step, 17),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }
}
