//! Prior predictor f_W: maps the trailing window of observations to a chunk
//! of prior values for the next `M` positions.

use crate::error::{NaraError, Result};
use crate::nn::DenseLayer;
use crate::tensor::{Parameters, Tensor};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct PriorPredictor {
    pub layer: DenseLayer,
}

/// Prior values for the `M` positions following `position`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorChunk {
    pub values: Vec<f64>,
    pub position: usize,
}

/// Last `o` samples of `history`, left-padded with zeros when shorter.
pub fn trailing_window(history: &[f64], o: usize) -> Vec<f64> {
    let mut w = vec![0.0; o];
    let take = history.len().min(o);
    w[o - take..].copy_from_slice(&history[history.len() - take..]);
    w
}

/// One evaluation case: observed window and the ground-truth continuation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalWindow {
    pub window: Vec<f64>,
    pub future: Vec<f64>,
}

impl PriorPredictor {
    pub fn init<R: Rng + ?Sized>(context_len: usize, chunk_len: usize, rng: &mut R) -> Self {
        Self {
            layer: DenseLayer::init(context_len, chunk_len, rng),
        }
    }

    pub fn zeros(context_len: usize, chunk_len: usize) -> Self {
        Self {
            layer: DenseLayer::zeros(context_len, chunk_len),
        }
    }

    pub fn context_len(&self) -> usize {
        self.layer.input_size()
    }

    pub fn chunk_len(&self) -> usize {
        self.layer.output_size()
    }

    pub fn predict_priors(&self, window: &[f64], position: usize) -> Result<PriorChunk> {
        if window.len() != self.context_len() {
            return Err(NaraError::shape(
                format!("window of {}", self.context_len()),
                window.len(),
            ));
        }
        if window.iter().any(|v| !v.is_finite()) {
            return Err(NaraError::NonFinite);
        }
        Ok(PriorChunk {
            values: self.layer.forward(window)?,
            position,
        })
    }

    /// Priors from an arbitrary-length history (padded or truncated to `o`).
    pub fn predict_from_history(&self, history: &[f64]) -> Result<PriorChunk> {
        self.predict_priors(&trailing_window(history, self.context_len()), history.len())
    }
}

/// Mean absolute error between predicted priors and ground-truth futures.
/// Futures shorter than `M` are compared on their available prefix.
pub fn prior_l1(prior: &PriorPredictor, cases: &[EvalWindow]) -> Result<f64> {
    if cases.is_empty() {
        return Err(NaraError::Empty("evaluation windows"));
    }
    let mut total = 0.0;
    let mut n = 0usize;
    for case in cases {
        let chunk = prior.predict_priors(&case.window, 0)?;
        for (m, x) in chunk.values.iter().zip(&case.future) {
            total += (m - x).abs();
            n += 1;
        }
    }
    if n == 0 {
        return Err(NaraError::Empty("evaluation futures"));
    }
    Ok(total / n as f64)
}

impl Parameters for PriorPredictor {
    fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        self.layer
            .named_tensors()
            .into_iter()
            .map(|(n, t)| (format!("dense.{n}"), t))
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layer.tensors_mut()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;

    #[test]
    fn zero_weights_return_bias() {
        let mut p = PriorPredictor::zeros(4, 3);
        p.layer.bias.data_mut().copy_from_slice(&[0.1, 0.2, 0.3]);
        let c = p.predict_priors(&[1.0, 2.0, 3.0, 4.0], 7).unwrap();
        assert_eq!(c.values, vec![0.1, 0.2, 0.3]);
        assert_eq!(c.position, 7);
    }

    #[test]
    fn window_is_left_padded() {
        assert_eq!(trailing_window(&[1.0, 2.0], 4), vec![0.0, 0.0, 1.0, 2.0]);
        assert_eq!(trailing_window(&[1.0, 2.0, 3.0, 4.0, 5.0], 3), vec![3.0, 4.0, 5.0]);
    }

    #[test]
    fn wrong_window_length_is_rejected() {
        let p = PriorPredictor::zeros(4, 3);
        assert!(p.predict_priors(&[1.0; 3], 0).is_err());
    }

    #[test]
    fn l1_of_exact_priors_is_zero() {
        let mut p = PriorPredictor::zeros(2, 2);
        p.layer.bias.data_mut().copy_from_slice(&[0.5, -0.5]);
        let cases = vec![EvalWindow { window: vec![0.0, 0.0], future: vec![0.5, -0.5] }];
        assert_eq!(prior_l1(&p, &cases).unwrap(), 0.0);
    }

    #[test]
    fn l1_of_zero_predictor_on_sinusoid_is_two_over_pi() {
        let o = 8;
        let m = 20;
        let x: Vec<f64> = (0..o + 4000).map(|t| (2.0 * std::f64::consts::PI * t as f64 / 200.0).sin()).collect();
        // futures tile exactly 20 periods
        let cases: Vec<EvalWindow> = (o..x.len())
            .step_by(m)
            .map(|p| EvalWindow { window: x[p - o..p].to_vec(), future: x[p..p + m].to_vec() })
            .collect();
        let l1 = prior_l1(&PriorPredictor::zeros(o, m), &cases).unwrap();
        assert!((l1 - 2.0 / std::f64::consts::PI).abs() < 1e-3, "{l1}");
    }

    #[test]
    fn empty_dataset_is_an_error() {
        assert!(prior_l1(&PriorPredictor::zeros(2, 2), &[]).is_err());
    }

    proptest! {
        #[test]
        fn priors_depend_only_on_window(seed in 0u64..1000, vals in proptest::collection::vec(-3.0f64..3.0, 6)) {
            let p = PriorPredictor::init(6, 4, &mut seeded(seed));
            let a = p.predict_priors(&vals, 0).unwrap();
            // unrelated generator activity must not change the output
            let _ = PriorPredictor::init(6, 4, &mut seeded(seed + 1));
            let b = p.predict_priors(&vals, 0).unwrap();
            prop_assert_eq!(a.values.len(), 4);
            prop_assert_eq!(a.values, b.values);
        }
    }
}
