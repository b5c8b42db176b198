//! Entry laws for the random factors.
//!
//! Every law is normalized to mean 0 and variance 1 and carries its declared
//! fourth moment and density bound. Rademacher is kept as a control that
//! violates the bounded-density requirement; consumers that need the entry
//! condition call [`EntryDistribution::require_condition`].

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use faer::Mat;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Default half-width of the uniform smoothing in [`DistKind::SmoothedRademacher`].
pub const DEFAULT_SMOOTHING_WIDTH: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistKind {
    Gaussian,
    /// Uniform on [-sqrt 3, sqrt 3].
    Uniform,
    /// (Rademacher + Uniform[-w, w]) / sqrt(1 + w^2/3).
    SmoothedRademacher { width: f64 },
    /// Laplace with scale 1/sqrt 2.
    Laplace,
    /// Atoms at +-1. No density.
    Rademacher,
}

/// An entry law together with its declared moment and density metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryDistribution {
    kind: DistKind,
    m4: f64,
    /// `None` when the law has no bounded density.
    k_inf: Option<f64>,
}

impl EntryDistribution {
    pub fn new(kind: DistKind) -> Result<Self> {
        let (m4, k_inf) = match kind {
            DistKind::Gaussian => (3.0, Some(1.0 / (2.0 * PI).sqrt())),
            DistKind::Uniform => (9.0 / 5.0, Some(1.0 / (2.0 * SQRT_3))),
            DistKind::SmoothedRademacher { width: w } => {
                if !(w.is_finite() && w > 0.0) {
                    return Err(LabError::invalid(
                        "width",
                        format!("smoothing width must be finite and > 0, got {w}"),
                    ));
                }
                let var = 1.0 + w * w / 3.0;
                let m4 = (1.0 + 2.0 * w * w + w.powi(4) / 5.0) / (var * var);
                // the two uniform bumps overlap once w > 1
                let raw_density = if w <= 1.0 { 1.0 / (4.0 * w) } else { 1.0 / (2.0 * w) };
                (m4, Some(raw_density * var.sqrt()))
            }
            DistKind::Laplace => (6.0, Some(1.0 / SQRT_2)),
            DistKind::Rademacher => (1.0, None),
        };
        Ok(Self { kind, m4, k_inf })
    }

    pub fn gaussian() -> Self {
        Self::new(DistKind::Gaussian).expect("valid")
    }

    pub fn uniform() -> Self {
        Self::new(DistKind::Uniform).expect("valid")
    }

    pub fn smoothed_rademacher(width: f64) -> Result<Self> {
        Self::new(DistKind::SmoothedRademacher { width })
    }

    pub fn laplace() -> Self {
        Self::new(DistKind::Laplace).expect("valid")
    }

    pub fn rademacher() -> Self {
        Self::new(DistKind::Rademacher).expect("valid")
    }

    /// The laws that satisfy the entry condition, with default parameters.
    pub fn condition_satisfying() -> Vec<Self> {
        vec![
            Self::gaussian(),
            Self::uniform(),
            Self::smoothed_rademacher(DEFAULT_SMOOTHING_WIDTH).expect("valid"),
            Self::laplace(),
        ]
    }

    pub fn kind(&self) -> DistKind {
        self.kind
    }

    /// Declared fourth moment.
    pub fn m4(&self) -> f64 {
        self.m4
    }

    /// Declared essential supremum of the density, `None` if unbounded.
    pub fn k_inf(&self) -> Option<f64> {
        self.k_inf
    }

    pub fn satisfies_condition(&self) -> bool {
        self.k_inf.is_some() && self.m4.is_finite()
    }

    /// Refuse laws outside the entry condition unless `allow_violation` is set.
    pub fn require_condition(&self, allow_violation: bool) -> Result<()> {
        if self.satisfies_condition() || allow_violation {
            Ok(())
        } else {
            Err(LabError::ConditionViolation(self.to_string()))
        }
    }

    /// Draw one entry.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            DistKind::Gaussian => rng.sample(StandardNormal),
            DistKind::Uniform => rng.random_range(-SQRT_3..SQRT_3),
            DistKind::SmoothedRademacher { width } => {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let jitter = rng.random_range(-width..width);
                (sign + jitter) / (1.0 + width * width / 3.0).sqrt()
            }
            DistKind::Laplace => {
                let e: f64 = rng.sample(Exp1);
                let mag = e / SQRT_2;
                if rng.random::<bool>() {
                    mag
                } else {
                    -mag
                }
            }
            DistKind::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

impl EntryDistribution {
    /// Lebesgue density at `x`, `None` for laws without one.
    pub fn density(&self, x: f64) -> Option<f64> {
        let d = match self.kind {
            DistKind::Gaussian => (-0.5 * x * x).exp() / (2.0 * PI).sqrt(),
            DistKind::Uniform => {
                if x.abs() <= SQRT_3 {
                    1.0 / (2.0 * SQRT_3)
                } else {
                    0.0
                }
            }
            DistKind::SmoothedRademacher { width } => {
                let sd = (1.0 + width * width / 3.0).sqrt();
                let y = x * sd;
                let bump = |c: f64| if (y - c).abs() <= width { 1.0 / (4.0 * width) } else { 0.0 };
                (bump(1.0) + bump(-1.0)) * sd
            }
            DistKind::Laplace => (-SQRT_2 * x.abs()).exp() / SQRT_2,
            DistKind::Rademacher => return None,
        };
        Some(d)
    }
}

impl fmt::Display for EntryDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            DistKind::Gaussian => f.write_str("gaussian"),
            DistKind::Uniform => f.write_str("uniform"),
            DistKind::SmoothedRademacher { width } => write!(f, "smoothed-rademacher({width})"),
            DistKind::Laplace => f.write_str("laplace"),
            DistKind::Rademacher => f.write_str("rademacher"),
        }
    }
}

impl FromStr for EntryDistribution {
    type Err = LabError;

    /// Accepts `gaussian`, `uniform`, `laplace`, `rademacher`,
    /// `smoothed-rademacher`, `smoothed-rademacher(0.2)` and
    /// `smoothed-rademacher:0.2`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (name, arg) = match s.find(['(', ':']) {
            Some(pos) => {
                let arg = s[pos + 1..].trim_end_matches(')').trim();
                (s[..pos].trim(), Some(arg.to_string()))
            }
            None => (s.as_str(), None),
        };
        let kind = match (name, arg) {
            ("gaussian" | "normal", None) => DistKind::Gaussian,
            ("uniform", None) => DistKind::Uniform,
            ("laplace", None) => DistKind::Laplace,
            ("rademacher", None) => DistKind::Rademacher,
            ("smoothed-rademacher", None) => DistKind::SmoothedRademacher {
                width: DEFAULT_SMOOTHING_WIDTH,
            },
            ("smoothed-rademacher", Some(a)) => {
                let width = a.parse::<f64>().map_err(|_| {
                    LabError::invalid("dist", format!("bad smoothing width `{a}`"))
                })?;
                DistKind::SmoothedRademacher { width }
            }
            _ => return Err(LabError::invalid("dist", format!("unknown distribution `{s}`"))),
        };
        Self::new(kind)
    }
}

impl Serialize for EntryDistribution {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EntryDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A `rows x cols` matrix of i.i.d. draws (no 1/sqrt(n) scaling).
pub fn sample_entries<R: Rng + ?Sized>(
    dist: &EntryDistribution,
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Mat<f64> {
    let mut m = Mat::<f64>::zeros(rows, cols);
    for j in 0..cols {
        for x in m.col_mut(j).iter_mut() {
            *x = dist.sample(rng);
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentReport {
    pub trials: usize,
    pub mean_hat: f64,
    pub var_hat: f64,
    pub m4_hat: f64,
    pub se_mean: f64,
    pub se_var: f64,
    pub se_m4: f64,
}

impl MomentReport {
    /// Whether all three estimates are within `z` standard errors of the
    /// declared values (mean 0, variance 1, fourth moment `m4`).
    pub fn consistent_with(&self, dist: &EntryDistribution, z: f64) -> bool {
        self.mean_hat.abs() <= z * self.se_mean
            && (self.var_hat - 1.0).abs() <= z * self.se_var
            && (self.m4_hat - dist.m4()).abs() <= z * self.se_m4
    }
}

/// Empirical mean, variance and fourth moment with standard errors.
pub fn moment_report<R: Rng + ?Sized>(
    dist: &EntryDistribution,
    trials: usize,
    rng: &mut R,
) -> Result<MomentReport> {
    if trials < 10_000 {
        return Err(LabError::invalid("trials", format!("need at least 10^4 trials, got {trials}")));
    }
    // running sums of x, x^2, x^4, x^8 (the last two give the SE of m4)
    let (mut s1, mut s2, mut s4, mut s8) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..trials {
        let x = dist.sample(rng);
        let x2 = x * x;
        let x4 = x2 * x2;
        s1 += x;
        s2 += x2;
        s4 += x4;
        s8 += x4 * x4;
    }
    let t = trials as f64;
    let mean = s1 / t;
    let m2 = s2 / t;
    let m4 = s4 / t;
    let m8 = s8 / t;
    let var_hat = (m2 - mean * mean) * t / (t - 1.0);
    Ok(MomentReport {
        trials,
        mean_hat: mean,
        var_hat,
        m4_hat: m4,
        se_mean: (var_hat / t).sqrt(),
        se_var: ((m4 - m2 * m2).max(0.0) / t).sqrt(),
        se_m4: ((m8 - m4 * m4).max(0.0) / t).sqrt(),
    })
}
