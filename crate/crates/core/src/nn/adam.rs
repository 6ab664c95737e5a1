use crate::error::{NaraError, Result};
use crate::tensor::{Parameters, Tensor};

/// Adam with bias correction. Moments are kept per parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new<P: Parameters>(params: &P, lr: f64) -> Self {
        let zeros: Vec<Tensor> = params.tensors().into_iter().map(Tensor::zeros_like).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Tensor] {
        &self.v
    }

    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let gs = grads.tensors();
        if gs.iter().any(|g| !g.is_finite()) {
            return Err(NaraError::Diverged(format!(
                "non-finite gradient at Adam step {}",
                self.t + 1
            )));
        }
        let ps = params.tensors_mut();
        if ps.len() != gs.len() || ps.len() != self.m.len() {
            return Err(NaraError::shape(self.m.len(), gs.len()));
        }
        for ((p, g), m) in ps.iter().zip(&gs).zip(&self.m) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(NaraError::shape(format!("{:?}", p.shape()), format!("{:?}", g.shape())));
            }
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (((p, g), m), v) in ps.into_iter().zip(gs).zip(&mut self.m).zip(&mut self.v) {
            let (pd, gd) = (p.data_mut(), g.data());
            let (md, vd) = (m.data_mut(), v.data_mut());
            for k in 0..pd.len() {
                md[k] = self.beta1 * md[k] + (1.0 - self.beta1) * gd[k];
                vd[k] = self.beta2 * vd[k] + (1.0 - self.beta2) * gd[k] * gd[k];
                let m_hat = md[k] / bc1;
                let v_hat = vd[k] / bc2;
                pd[k] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
