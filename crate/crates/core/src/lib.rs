//! Stable Lyapunov spectra of products of i.i.d. random matrices, the
//! statistics of their rescaled singular values, Monte-Carlo checks of the
//! supporting lemmas, and seeded experiment sweeps.
//!
//! The usual entry point is [`lyapunov_spectrum`] on a seeded
//! [`ProductStream`], followed by [`rescaled_measure`] and [`ks_to_uniform`];
//! [`experiment::run`] drives whole seeded sweeps.

pub mod distributions;
pub mod error;
pub mod experiment;
pub mod matprod;
pub mod oracles;
pub mod seed;
pub mod stats;

pub use distributions::{DistKind, EntryDistribution};
pub use error::{LabError, Result};
pub use matprod::{
    frame_diagonalize, haar_frame, log_wedge_norm, lyapunov_spectrum, pointwise_log_wedge, sup_pointwise_gap,
    svd_step, Frame, LyapunovSpectrum, ProductStream,
};
pub use stats::{ks_to_uniform, rate_fit, rescaled_measure, EmpiricalMeasure};
