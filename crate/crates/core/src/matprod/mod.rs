//! Products `X = W_N ... W_1` of scaled random matrices: frames, wedge norms,
//! the frame recursion and Lyapunov spectra.

mod chain;
mod frame;
mod graded;
mod stream;
mod wedge;

pub use chain::{lyapunov_spectrum, pointwise_log_wedge, sup_pointwise_gap, LyapunovSpectrum, PointwiseGap};
pub use frame::{
    frame_diagonalize, haar_frame, orthonormality_residual, Frame, FrameDiagonalization, FRAME_TOLERANCE,
};
pub use stream::ProductStream;
pub use wedge::{log_wedge_norm, svd_step, SvdStep};
