use super::sigmoid;
use crate::error::{NaraError, Result};
use crate::tensor::{Parameters, Tensor};
use rand::Rng;

/// One LSTM layer. The four gates are stacked row-wise in the order
/// input, forget, cell candidate, output: rows `[k·h, (k+1)·h)` belong to gate `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub w_ih: Tensor,
    pub w_hh: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Everything the backward pass of one step needs.
#[derive(Debug, Clone)]
pub struct LstmStepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    // activated gates, stacked like the weight rows
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl LstmCell {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_ih: Tensor::zeros(&[4 * hidden, input]),
            w_hh: Tensor::zeros(&[4 * hidden, hidden]),
            bias: Tensor::zeros(&[4 * hidden]),
        }
    }

    /// Uniform `±1/√h` initialisation.
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        Self {
            w_ih: Tensor::uniform(&[4 * hidden, input], bound, rng),
            w_hh: Tensor::uniform(&[4 * hidden, hidden], bound, rng),
            bias: Tensor::uniform(&[4 * hidden], bound, rng),
        }
    }

    pub fn input_size(&self) -> usize {
        self.w_ih.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_hh.cols()
    }

    fn check(&self, state: &LstmState, x: &[f64]) -> Result<()> {
        if x.len() != self.input_size() {
            return Err(NaraError::shape(format!("input {}", self.input_size()), x.len()));
        }
        let h = self.hidden_size();
        if state.h.len() != h || state.c.len() != h {
            return Err(NaraError::shape(
                format!("state {h}"),
                format!("h {} / c {}", state.h.len(), state.c.len()),
            ));
        }
        Ok(())
    }

    fn gates(&self, state: &LstmState, x: &[f64]) -> Vec<f64> {
        let h = self.hidden_size();
        let mut pre = self.bias.data().to_vec();
        let mut tmp = vec![0.0; 4 * h];
        self.w_ih.matvec_into(x, &mut tmp);
        crate::tensor::axpy(1.0, &tmp, &mut pre);
        self.w_hh.matvec_into(&state.h, &mut tmp);
        crate::tensor::axpy(1.0, &tmp, &mut pre);
        for (k, v) in pre.iter_mut().enumerate() {
            *v = if k / h == 2 { v.tanh() } else { sigmoid(*v) };
        }
        pre
    }

    fn combine(&self, state: &LstmState, gates: &[f64]) -> (LstmState, Vec<f64>) {
        let h = self.hidden_size();
        let (i, rest) = gates.split_at(h);
        let (f, rest) = rest.split_at(h);
        let (g, o) = rest.split_at(h);
        let mut c = vec![0.0; h];
        let mut hn = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        for k in 0..h {
            c[k] = f[k] * state.c[k] + i[k] * g[k];
            tanh_c[k] = c[k].tanh();
            hn[k] = o[k] * tanh_c[k];
        }
        (LstmState { h: hn, c }, tanh_c)
    }

    /// One recurrence step. The layer output is the new hidden state.
    pub fn step(&self, state: &LstmState, x: &[f64]) -> Result<LstmState> {
        self.check(state, x)?;
        let gates = self.gates(state, x);
        Ok(self.combine(state, &gates).0)
    }

    pub fn step_cached(&self, state: &LstmState, x: &[f64]) -> Result<(LstmState, LstmStepCache)> {
        self.check(state, x)?;
        let gates = self.gates(state, x);
        let (next, tanh_c) = self.combine(state, &gates);
        let cache = LstmStepCache {
            x: x.to_vec(),
            h_prev: state.h.clone(),
            c_prev: state.c.clone(),
            gates,
            tanh_c,
        };
        Ok((next, cache))
    }

    /// Backward through one step given `dL/dh'` and `dL/dc'`.
    ///
    /// Accumulates into `grads` and returns `(dL/dx, dL/dh, dL/dc)` for the
    /// step's input and previous state.
    pub fn backward_step(
        &self,
        cache: &LstmStepCache,
        dh: &[f64],
        dc: &[f64],
        grads: &mut LstmCell,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let h = self.hidden_size();
        let gates = &cache.gates;
        let mut da = vec![0.0; 4 * h];
        let mut dc_prev = vec![0.0; h];
        for k in 0..h {
            let (i, f, g, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
            let tc = cache.tanh_c[k];
            let dct = dc[k] + dh[k] * o * (1.0 - tc * tc);
            da[k] = dct * g * i * (1.0 - i);
            da[h + k] = dct * cache.c_prev[k] * f * (1.0 - f);
            da[2 * h + k] = dct * i * (1.0 - g * g);
            da[3 * h + k] = dh[k] * tc * o * (1.0 - o);
            dc_prev[k] = dct * f;
        }
        grads.w_ih.add_outer(&da, &cache.x);
        grads.w_hh.add_outer(&da, &cache.h_prev);
        grads.bias.add_slice(&da);
        let mut dx = vec![0.0; cache.x.len()];
        self.w_ih.matvec_t_acc(&da, &mut dx);
        let mut dh_prev = vec![0.0; h];
        self.w_hh.matvec_t_acc(&da, &mut dh_prev);
        (dx, dh_prev, dc_prev)
    }
}

impl Parameters for LstmCell {
    fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("w_ih".into(), &self.w_ih),
            ("w_hh".into(), &self.w_hh),
            ("bias".into(), &self.bias),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w_ih, &mut self.w_hh, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{finite_difference_gradient, max_relative_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    // scalar-by-scalar evaluation of the gate equations, written independently
    fn hand_step(cell: &LstmCell, h: &[f64], c: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = cell.hidden_size();
        let pre = |gate: usize, k: usize| -> f64 {
            let row = gate * n + k;
            let mut s = cell.bias.data()[row];
            for (j, xv) in x.iter().enumerate() {
                s += cell.w_ih.row(row)[j] * xv;
            }
            for (j, hv) in h.iter().enumerate() {
                s += cell.w_hh.row(row)[j] * hv;
            }
            s
        };
        let mut h_out = Vec::new();
        let mut c_out = Vec::new();
        for k in 0..n {
            let i = sig(pre(0, k));
            let f = sig(pre(1, k));
            let g = pre(2, k).tanh();
            let o = sig(pre(3, k));
            let cn = f * c[k] + i * g;
            c_out.push(cn);
            h_out.push(o * cn.tanh());
        }
        (h_out, c_out)
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let cell = LstmCell::zeros(2, 3);
        let s = cell.step(&LstmState::zeros(3), &[5.0, -1.0]).unwrap();
        assert!(s.h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cell = LstmCell::init(2, 4, &mut rng);
        let st = LstmState { h: vec![0.1, -0.2, 0.3, 0.0], c: vec![0.5; 4] };
        assert_eq!(cell.step(&st, &[1.0, 2.0]).unwrap(), cell.step(&st, &[1.0, 2.0]).unwrap());
    }

    #[test]
    fn matches_hand_evaluation() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cell = LstmCell::init(2, 3, &mut rng);
            let st = LstmState { h: vec![0.2, -0.4, 0.1], c: vec![-0.3, 0.6, 0.9] };
            let x = [0.7, -1.3];
            let got = cell.step(&st, &x).unwrap();
            let (h, c) = hand_step(&cell, &st.h, &st.c, &x);
            for k in 0..3 {
                assert!((got.h[k] - h[k]).abs() < 1e-14);
                assert!((got.c[k] - c[k]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn shape_mismatch() {
        let cell = LstmCell::zeros(2, 3);
        assert!(cell.step(&LstmState::zeros(3), &[1.0]).is_err());
        assert!(cell.step(&LstmState::zeros(2), &[1.0, 1.0]).is_err());
    }

    #[test]
    fn unrolled_backward_matches_finite_difference() {
        // loss = Σ_t w·h_t + ½|c_T|² over a short unroll, differentiated wrt
        // weights, inputs and initial state
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let cell = LstmCell::init(2, 3, &mut rng);
            let xs = [[0.5, -0.2], [1.0, 0.3], [-0.4, 0.8], [0.1, 0.1]];
            let w = [0.7, -1.1, 0.4];
            let init = LstmState { h: vec![0.1, 0.2, -0.3], c: vec![0.4, -0.5, 0.2] };
            let loss = |cell: &LstmCell, xs: &[[f64; 2]], init: &LstmState| -> f64 {
                let mut s = init.clone();
                let mut l = 0.0;
                for x in xs {
                    s = cell.step(&s, x).unwrap();
                    l += s.h.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
                }
                l + 0.5 * s.c.iter().map(|v| v * v).sum::<f64>()
            };

            let mut s = init.clone();
            let mut caches = Vec::new();
            for x in &xs {
                let (n, cache) = cell.step_cached(&s, x).unwrap();
                caches.push(cache);
                s = n;
            }
            let mut grads = cell.zeros_like();
            let mut dh = vec![0.0; 3];
            let mut dc = s.c.clone();
            let mut dxs = vec![Vec::new(); xs.len()];
            for (t, cache) in caches.iter().enumerate().rev() {
                for k in 0..3 {
                    dh[k] += w[k];
                }
                let (dx, dhp, dcp) = cell.backward_step(cache, &dh, &dc, &mut grads);
                dxs[t] = dx;
                dh = dhp;
                dc = dcp;
            }

            let mut analytic = grads.flatten();
            analytic.extend(dxs.iter().flatten());
            analytic.extend(&dh);
            analytic.extend(&dc);

            let np = cell.num_params();
            let mut flat = cell.flatten();
            flat.extend(xs.iter().flatten());
            flat.extend(&init.h);
            flat.extend(&init.c);
            let numeric = finite_difference_gradient(
                |p| {
                    let mut c2 = cell.clone();
                    c2.assign_flat(&p[..np]);
                    let xs2: Vec<[f64; 2]> =
                        p[np..np + 8].chunks(2).map(|c| [c[0], c[1]]).collect();
                    let st = LstmState { h: p[np + 8..np + 11].to_vec(), c: p[np + 11..].to_vec() };
                    Ok(loss(&c2, &xs2, &st))
                },
                &flat,
                1e-5,
            )
            .unwrap();
            let err = max_relative_error(&analytic, &numeric, 1e-4);
            assert!(err < 1e-4, "seed {seed}: rel err {err}");
        }
    }
}
