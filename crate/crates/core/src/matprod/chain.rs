use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::distributions::EntryDistribution;
use crate::error::{LabError, Result};
use crate::matprod::frame::Frame;
use crate::matprod::graded::GradedProduct;
use crate::matprod::stream::ProductStream;
use crate::matprod::wedge::svd_step;

/// Lyapunov exponents `lambda_i = (1/N) log s_i(X)` of one realized product,
/// in nats per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSpectrum {
    lambdas: Vec<f64>,
    n: usize,
    steps: usize,
    seed: Option<u64>,
    dist: Option<EntryDistribution>,
}

impl LyapunovSpectrum {
    pub fn from_lambdas(
        lambdas: Vec<f64>,
        steps: usize,
        seed: Option<u64>,
        dist: Option<EntryDistribution>,
    ) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(LabError::invalid("lambdas", "spectrum must be nonempty"));
        }
        if steps == 0 {
            return Err(LabError::invalid("N", "number of factors must be >= 1"));
        }
        if lambdas.iter().any(|x| !x.is_finite()) {
            return Err(LabError::invalid("lambdas", "entries must be finite"));
        }
        if lambdas.windows(2).any(|w| w[0] < w[1]) {
            return Err(LabError::invalid("lambdas", "must be non-increasing"));
        }
        Ok(Self {
            n: lambdas.len(),
            lambdas,
            steps,
            seed,
            dist,
        })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of factors `N`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn dist(&self) -> Option<EntryDistribution> {
        self.dist
    }

    /// `lambda_1 + ... + lambda_k`.
    pub fn top_sum(&self, k: usize) -> f64 {
        self.lambdas[..k.min(self.n)].iter().sum()
    }
}

/// All Lyapunov exponents of the product emitted by `stream`.
///
/// The product is accumulated in log-scaled form and its singular values are
/// resolved to full relative accuracy, so the smallest exponents are exact
/// even when `s_n / s_1` is far below the floating-point range. The stream is
/// consumed from its current position to the end.
pub fn lyapunov_spectrum(stream: &mut ProductStream) -> Result<LyapunovSpectrum> {
    let n = stream.n();
    let mut prod = GradedProduct::new(n);
    let mut w = Mat::zeros(n, n);
    while stream.next_into(&mut w) {
        prod.push(w.as_ref()).map_err(|e| relabel(e, stream.cursor()))?;
    }
    if prod.steps() == 0 {
        return Err(LabError::invalid("N", "stream is exhausted"));
    }
    let steps = prod.steps() as f64;
    let lambdas = prod
        .log_singular_values()
        .into_iter()
        .map(|l| l / steps)
        .collect();
    LyapunovSpectrum::from_lambdas(lambdas, prod.steps(), stream.seed(), stream.dist())
}

fn relabel(e: LabError, cursor: usize) -> LabError {
    match e {
        LabError::RankDeficient { ratio, .. } => LabError::RankDeficient {
            step: cursor.saturating_sub(1),
            ratio,
        },
        other => other,
    }
}

/// `(1/N) log ||X U_0||_(k)` along the frame recursion `U_{t+1} = svd(W_t U_t)`.
///
/// Natural log of the unsquared wedge norm; the squared quantity is twice
/// this. The stream is consumed from its current position to the end.
pub fn pointwise_log_wedge(u0: &Frame, stream: &mut ProductStream) -> Result<f64> {
    if u0.n() != stream.n() {
        return Err(LabError::invalid(
            "u0",
            format!("frame has n = {}, stream has n = {}", u0.n(), stream.n()),
        ));
    }
    let mut u = u0.clone();
    let mut total = 0.0;
    let mut steps = 0usize;
    let mut w = Mat::zeros(stream.n(), stream.n());
    while stream.next_into(&mut w) {
        let step = svd_step(w.as_ref(), &u, steps)?;
        total += step.log_wedge();
        u = step.frame;
        steps += 1;
    }
    if steps == 0 {
        return Err(LabError::invalid("N", "stream is exhausted"));
    }
    Ok(total / steps as f64)
}

/// Supremum-versus-pointwise comparison for one realized product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointwiseGap {
    /// `(1/n) |sup_sum - pointwise|`.
    pub gap: f64,
    /// `sup_sum - pointwise`, before the absolute value; nonnegative up to rounding.
    pub signed: f64,
    /// `lambda_1 + ... + lambda_k`.
    pub sup_sum: f64,
    /// `(1/N) log ||X U_0||_(k)`.
    pub pointwise: f64,
}

/// Runs the spectrum and the frame recursion on two replays of the same
/// stream and compares them.
pub fn sup_pointwise_gap(u0: &Frame, stream: &ProductStream) -> Result<PointwiseGap> {
    let k = u0.k();
    let spectrum = lyapunov_spectrum(&mut stream.replay())?;
    let pointwise = pointwise_log_wedge(u0, &mut stream.replay())?;
    let sup_sum = spectrum.top_sum(k);
    let signed = sup_sum - pointwise;
    Ok(PointwiseGap {
        gap: signed.abs() / stream.n() as f64,
        signed,
        sup_sum,
        pointwise,
    })
}
