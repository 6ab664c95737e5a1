//! Minimal dense numeric layer: activations, dense and LSTM layers with
//! analytic backward passes, the Gaussian emission head, Adam, and the
//! central-difference gradient oracle.

mod adam;
mod dense;
mod gaussian;
mod gradcheck;
mod lstm;

pub use adam::AdamState;
pub use dense::{DenseLayer, DenseTape};
pub use gaussian::{gaussian_log_density, GaussianHead, HeadGrad, LOG_VAR_MAX, LOG_VAR_MIN};
pub use gradcheck::{finite_difference_gradient, max_relative_error, FD_STEP};
pub use lstm::{LstmCell, LstmState, LstmStepCache};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
