use crate::error::Result;

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Central-difference gradient `(f(p+δeᵢ) − f(p−δeᵢ)) / 2δ` for every coordinate.
pub fn finite_difference_gradient<F>(mut f: F, params: &[f64], delta: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut p = params.to_vec();
    let mut grad = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + delta;
        let up = f(&p)?;
        p[i] = orig - delta;
        let down = f(&p)?;
        p[i] = orig;
        grad.push((up - down) / (2.0 * delta));
    }
    Ok(grad)
}

/// Largest coordinate-wise relative error `|a − b| / max(|a|, |b|, floor)`.
///
/// The floor keeps coordinates whose true gradient is essentially zero from
/// dividing round-off noise by round-off noise.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_three() {
        let g = finite_difference_gradient(|p| Ok(p[0] * p[0]), &[3.0], 1e-5).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let g = finite_difference_gradient(|_| Ok(4.2), &[1.0, -2.0, 0.5], 1e-5).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn relative_error_uses_floor() {
        assert_eq!(max_relative_error(&[1.0], &[1.0], 1e-6), 0.0);
        assert!((max_relative_error(&[2.0], &[1.0], 1e-6) - 0.5).abs() < 1e-15);
        assert!(max_relative_error(&[1e-12], &[0.0], 1e-6) < 1e-5);
    }
}
