//! Empirical singular-value measures, the exact Kolmogorov-Smirnov distance
//! to the uniform law on `[0, 1]`, centering constants and power-law fits.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::digamma;

use crate::error::{LabError, Result};
use crate::matprod::LyapunovSpectrum;

/// Probability measure with mass `1/n` on each atom; atoms sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    atoms: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(mut atoms: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(LabError::invalid("atoms", "measure needs at least one atom"));
        }
        if atoms.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(LabError::invalid("atoms", "atoms must be finite and >= 0"));
        }
        atoms.sort_by(f64::total_cmp);
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn n(&self) -> usize {
        self.atoms.len()
    }

    /// `F_n(t)`: fraction of atoms `<= t`.
    pub fn cdf(&self, t: f64) -> f64 {
        self.atoms.partition_point(|a| *a <= t) as f64 / self.n() as f64
    }
}

/// Atoms `s_i(X)^{2/N} = exp(2 lambda_i)`.
pub fn rescaled_measure(spec: &LyapunovSpectrum) -> EmpiricalMeasure {
    let atoms = spec.lambdas().iter().rev().map(|l| (2.0 * l).exp()).collect();
    EmpiricalMeasure { atoms }
}

/// `sup_t |F_n(t) - U(t)|` with `U(t) = min(max(t, 0), 1)`.
///
/// The supremum is attained at a jump of `F_n`, so with `u_(i)` the sorted
/// atoms clamped into `[0, 1]` it equals
/// `max_i max(i/n - u_(i), u_(i) - (i-1)/n)`.
pub fn ks_to_uniform(m: &EmpiricalMeasure) -> f64 {
    let n = m.n() as f64;
    m.atoms
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let u = a.clamp(0.0, 1.0);
            let i = i as f64;
            ((i + 1.0) / n - u).max(u - i / n)
        })
        .fold(0.0, f64::max)
}

fn check_nk(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(LabError::invalid("k", format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    Ok(())
}

/// `1/2 * sum_{j=1}^k log((n - j + 1) / n)`, the log of the square root of
/// `E ||W U||_(k)^2` for one step.
pub fn theoretical_partial_mean(n: usize, k: usize) -> Result<f64> {
    check_nk(n, k)?;
    let nf = n as f64;
    Ok(0.5 * (1..=k).map(|j| ((nf - j as f64 + 1.0) / nf).ln()).sum::<f64>())
}

/// `E log ||W U||_(k)` for one step with Gaussian entries, which is the exact
/// per-step mean of `(1/N) log ||X U||_(k)` for every `N`:
/// `1/2 * sum_{j=1}^k (psi((n - j + 1)/2) + log(2/n))`.
///
/// Differs from [`theoretical_partial_mean`] by `E log` versus `log E` of a
/// chi-square, roughly `-sum_j 1/(2(n - j + 1))`.
pub fn gaussian_partial_log_mean(n: usize, k: usize) -> Result<f64> {
    check_nk(n, k)?;
    let nf = n as f64;
    let shift = (2.0 / nf).ln();
    Ok(0.5 * (1..=k).map(|j| digamma((nf - j as f64 + 1.0) / 2.0) + shift).sum::<f64>())
}

/// Centered cumulative sums `d_k = (1/n) |sum_{i<=k} lambda_i - c_k|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationProfile {
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
}

/// Deviations from `c_k = theoretical_partial_mean(n, k)`.
pub fn deviation_profile(spec: &LyapunovSpectrum) -> DeviationProfile {
    let n = spec.n();
    let centers: Vec<f64> = (1..=n)
        .map(|k| theoretical_partial_mean(n, k).expect("1 <= k <= n"))
        .collect();
    deviation_profile_with_centers(spec, &centers).expect("one center per k")
}

/// Deviations from caller-supplied centers `c_1, ..., c_n`.
pub fn deviation_profile_with_centers(spec: &LyapunovSpectrum, centers: &[f64]) -> Result<DeviationProfile> {
    let n = spec.n();
    if centers.len() != n {
        return Err(LabError::invalid("centers", format!("need {n} centers, got {}", centers.len())));
    }
    let mut acc = 0.0;
    let deviations: Vec<f64> = spec
        .lambdas()
        .iter()
        .zip(centers)
        .map(|(l, c)| {
            acc += l;
            (acc - c).abs() / n as f64
        })
        .collect();
    let max_deviation = deviations.iter().copied().fold(0.0, f64::max);
    Ok(DeviationProfile {
        deviations,
        max_deviation,
    })
}

/// Least-squares line through `(log x, log y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(LabError::RateFit(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some((x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(LabError::RateFit(format!("coordinates must be positive, got ({x}, {y})")));
    }
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    if xs.windows(2).any(|w| w[0] == w[1]) {
        return Err(LabError::RateFit("x values must be distinct".into()));
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    Ok(linear_fit(&lx, &ly))
}

pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> RateFit {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    RateFit { slope, intercept, r2 }
}

/// Sample quantile with linear interpolation between order statistics
/// (`h = (n - 1) p`). `sorted` must be ascending and nonempty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let m = mean(values);
    let k = values.len() as f64;
    if values.len() < 2 {
        return (m, f64::NAN);
    }
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (k - 1.0);
    (m, (var / k).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(l: Vec<f64>) -> LyapunovSpectrum {
        LyapunovSpectrum::from_lambdas(l, 1, None, None).unwrap()
    }

    fn brute_force_ks(m: &EmpiricalMeasure, grid: usize) -> f64 {
        let hi = m.atoms().last().copied().unwrap().max(1.0) + 1e-9;
        let mut worst: f64 = 0.0;
        for i in 0..=grid {
            let t = -1e-9 + (hi + 1e-9) * i as f64 / grid as f64;
            worst = worst.max((m.cdf(t) - t.clamp(0.0, 1.0)).abs());
        }
        worst
    }

    #[test]
    fn rescaled_atoms() {
        let m = rescaled_measure(&spec(vec![0.0; 4]));
        assert_eq!(m.atoms(), &[1.0; 4]);
        let m = rescaled_measure(&spec(vec![2f64.ln(), -(2f64.ln())]));
        assert!((m.atoms()[0] - 0.25).abs() < 1e-15);
        assert!((m.atoms()[1] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn ks_closed_form_cases() {
        assert_eq!(ks_to_uniform(&EmpiricalMeasure::new(vec![0.25, 0.75]).unwrap()), 0.25);
        for n in [1usize, 2, 7, 100] {
            let atoms = (0..n).map(|i| (2 * i + 1) as f64 / (2 * n) as f64).collect();
            let d = ks_to_uniform(&EmpiricalMeasure::new(atoms).unwrap());
            assert!((d - 0.5 / n as f64).abs() < 1e-15);
        }
        let d = ks_to_uniform(&EmpiricalMeasure::new(vec![1.5, 2.0, 7.0]).unwrap());
        assert_eq!(d, 1.0);
        let d = ks_to_uniform(&EmpiricalMeasure::new(vec![0.0, 0.0]).unwrap());
        assert_eq!(d, 1.0);
    }

    #[test]
    fn rejects_bad_atoms() {
        assert!(EmpiricalMeasure::new(vec![]).is_err());
        assert!(EmpiricalMeasure::new(vec![-0.1]).is_err());
        assert!(EmpiricalMeasure::new(vec![f64::NAN]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn ks_matches_grid(atoms in prop::collection::vec(0.0f64..1.6, 1..40)) {
            let m = EmpiricalMeasure::new(atoms).unwrap();
            let exact = ks_to_uniform(&m);
            let grid = brute_force_ks(&m, 1_000_000);
            prop_assert!(grid <= exact + 1e-12);
            prop_assert!(exact - grid <= 1e-6 * 1.6 + 1e-12, "exact {} grid {}", exact, grid);
        }

        #[test]
        fn partial_mean_decreases(n in 2usize..300) {
            let v: Vec<f64> = (1..=n).map(|k| theoretical_partial_mean(n, k).unwrap()).collect();
            prop_assert_eq!(v[0], 0.0);
            prop_assert!(v.windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn partial_mean_values() {
        assert!((theoretical_partial_mean(3, 2).unwrap() - (-0.202_732_554_054_082_2)).abs() < 1e-12);
        for n in [1usize, 5, 20] {
            let log_fact: f64 = (1..=n).map(|i| (i as f64).ln()).sum();
            let want = 0.5 * (log_fact - n as f64 * (n as f64).ln());
            assert!((theoretical_partial_mean(n, n).unwrap() - want).abs() < 1e-12);
        }
        assert!(theoretical_partial_mean(3, 0).is_err());
        assert!(theoretical_partial_mean(3, 4).is_err());
    }

    #[test]
    fn gaussian_log_mean_against_chi_square() {
        // E log chi2_1 = psi(1/2) + log 2 = -gamma - log 2
        let euler = 0.577_215_664_901_532_9;
        let got = gaussian_partial_log_mean(1, 1).unwrap();
        assert!((got - 0.5 * (-euler - 2f64.ln())).abs() < 1e-12);
        // log E exceeds E log
        for (n, k) in [(10, 3), (128, 16), (50, 50)] {
            assert!(gaussian_partial_log_mean(n, k).unwrap() < theoretical_partial_mean(n, k).unwrap());
        }
    }

    #[test]
    fn deviation_profile_cases() {
        let n = 6;
        let incr: Vec<f64> = (1..=n).map(|j| 0.5 * ((n - j + 1) as f64 / n as f64).ln()).collect();
        let p = deviation_profile(&spec(incr));
        assert!(p.max_deviation < 1e-15);

        let p = deviation_profile(&spec(vec![0.0; 3]));
        let want = (0.5 * (6.0f64 / 27.0).ln()).abs() / 3.0;
        assert!((p.deviations[2] - want).abs() < 1e-15);
        assert!((want - 0.2507).abs() < 1e-4);
        assert_eq!(p.max_deviation, want);
        assert!(p.deviations.iter().all(|d| *d >= 0.0));
    }

    #[test]
    fn rate_fit_cases() {
        let pts: Vec<(f64, f64)> = [64.0, 256.0, 1024.0].iter().map(|n: &f64| (*n, 3.0 / n.sqrt())).collect();
        let f = rate_fit(&pts).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        let f = rate_fit(&[(1.0, 2.0), (2.0, 2.0), (5.0, 2.0)]).unwrap();
        assert_eq!(f.slope, 0.0);
        assert!(rate_fit(&[(1.0, 1.0), (2.0, 1.0)]).is_err());
        assert!(rate_fit(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
        assert!(rate_fit(&[(1.0, 1.0), (1.0, 2.0), (3.0, 1.0)]).is_err());
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(median(&v), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&[7.0], 0.3), 7.0);
        let (m, se) = mean_se(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }
}
