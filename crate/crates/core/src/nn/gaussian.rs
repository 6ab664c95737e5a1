use crate::error::{NaraError, Result};

pub const LOG_VAR_MIN: f64 = -10.0;
pub const LOG_VAR_MAX: f64 = 10.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Parameters of a univariate Gaussian: mean and log-variance `ln σ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianHead {
    pub mean: f64,
    pub log_var: f64,
}

/// Gradient of the negative log-density with respect to the head.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HeadGrad {
    pub d_mean: f64,
    pub d_log_var: f64,
}

impl GaussianHead {
    pub fn new(mean: f64, log_var: f64) -> Self {
        Self { mean, log_var }
    }

    /// Builds a head from raw network outputs, clamping the log-variance.
    pub fn from_raw(mean: f64, raw_log_var: f64) -> Self {
        Self {
            mean,
            log_var: raw_log_var.clamp(LOG_VAR_MIN, LOG_VAR_MAX),
        }
    }

    pub fn std_dev(&self) -> f64 {
        (0.5 * self.log_var).exp()
    }

    pub fn log_density(&self, x: f64) -> Result<f64> {
        gaussian_log_density(x, self)
    }

    /// `x = μ + σ·z` for a standard-normal draw `z`.
    pub fn sample_with(&self, z: f64) -> f64 {
        self.mean + self.std_dev() * z
    }

    /// Negative log-density and its gradient with respect to `(μ, λ)`.
    pub fn nll_with_grad(&self, x: f64) -> (f64, HeadGrad) {
        let inv_var = (-self.log_var).exp();
        let diff = x - self.mean;
        let nll = HALF_LN_2PI + 0.5 * self.log_var + 0.5 * diff * diff * inv_var;
        let grad = HeadGrad {
            d_mean: -diff * inv_var,
            d_log_var: 0.5 - 0.5 * diff * diff * inv_var,
        };
        (nll, grad)
    }
}

/// `ln N(x; μ, e^λ) = −½ln(2π) − ½λ − (x−μ)²/(2e^λ)`.
pub fn gaussian_log_density(x: f64, head: &GaussianHead) -> Result<f64> {
    if !x.is_finite() || !head.mean.is_finite() || !head.log_var.is_finite() {
        return Err(NaraError::NonFinite);
    }
    if !(LOG_VAR_MIN..=LOG_VAR_MAX).contains(&head.log_var) {
        return Err(NaraError::Invalid(format!(
            "log-variance {} outside [{LOG_VAR_MIN}, {LOG_VAR_MAX}]",
            head.log_var
        )));
    }
    let diff = x - head.mean;
    Ok(-HALF_LN_2PI - 0.5 * head.log_var - 0.5 * diff * diff * (-head.log_var).exp())
}
