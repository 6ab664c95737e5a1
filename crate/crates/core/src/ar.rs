//! The base autoregressive model: a stacked LSTM over scalar samples with a
//! Gaussian emission head.
//!
//! Position `t` of a sequence is predicted from the hidden state after the
//! inputs `[0, x_1, …, x_{t-1}]`; the leading constant `0` is the start token.

use crate::error::{NaraError, Result};
use crate::nn::{DenseLayer, GaussianHead, HeadGrad, LstmCell, LstmState, LstmStepCache};
use crate::nn::{LOG_VAR_MAX, LOG_VAR_MIN};
use crate::tensor::{Parameters, Tensor};
use rand::Rng;
use rand_distr::StandardNormal;

/// Input fed before the first sample.
pub const START_TOKEN: f64 = 0.0;

/// Ordered, non-empty list of finite scalar samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence(Vec<f64>);

impl Sequence {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(NaraError::Empty("sequence"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(NaraError::NonFinite);
        }
        Ok(Self(samples))
    }

    pub fn samples(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Sequence {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Recurrent state after consuming the start token and `position` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ArState {
    pub layers: Vec<LstmState>,
    pub position: usize,
}

/// Gradient with respect to an [`ArState`], one `(dh, dc)` pair per layer.
pub type ArStateGrad = Vec<LstmState>;

/// Parameters θ of the AR model.
#[derive(Debug, Clone, PartialEq)]
pub struct ArModel {
    pub layers: Vec<LstmCell>,
    /// hidden → (μ, raw log-variance)
    pub head: DenseLayer,
}

/// Recorded forward pass, replayable by [`ArModel::backward`].
#[derive(Debug, Clone)]
pub struct ArTrace {
    caches: Vec<Vec<LstmStepCache>>,
    tops: Vec<Vec<f64>>,
    raw_log_var: Vec<f64>,
    /// `heads[t]` is the conditional after consuming `inputs[t]`.
    pub heads: Vec<GaussianHead>,
    pub states: Vec<ArState>,
}

impl ArTrace {
    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn final_state(&self) -> Option<&ArState> {
        self.states.last()
    }
}

impl ArModel {
    pub fn init<R: Rng + ?Sized>(hidden: usize, layers: usize, rng: &mut R) -> Result<Self> {
        if hidden == 0 || layers == 0 {
            return Err(NaraError::Invalid("hidden size and layer count must be positive".into()));
        }
        let cells = (0..layers)
            .map(|l| LstmCell::init(if l == 0 { 1 } else { hidden }, hidden, rng))
            .collect();
        Ok(Self {
            layers: cells,
            head: DenseLayer::init(hidden, 2, rng),
        })
    }

    pub fn zeros(hidden: usize, layers: usize) -> Self {
        Self {
            layers: (0..layers)
                .map(|l| LstmCell::zeros(if l == 0 { 1 } else { hidden }, hidden))
                .collect(),
            head: DenseLayer::zeros(hidden, 2),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.layers[0].hidden_size()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// All-zero state before the start token.
    pub fn zero_state(&self) -> ArState {
        ArState {
            layers: vec![LstmState::zeros(self.hidden_size()); self.layers.len()],
            position: 0,
        }
    }

    /// State after the start token; conditions the first sample.
    pub fn start_state(&self) -> ArState {
        let mut s = self.zero_state();
        self.advance(&mut s, START_TOKEN).expect("start state shapes are consistent");
        s.position = 0;
        s
    }

    fn check_state(&self, state: &ArState) -> Result<()> {
        let h = self.hidden_size();
        if state.layers.len() != self.layers.len()
            || state.layers.iter().any(|l| l.h.len() != h || l.c.len() != h)
        {
            return Err(NaraError::shape(
                format!("{} layers of width {h}", self.layers.len()),
                format!("{} layers", state.layers.len()),
            ));
        }
        Ok(())
    }

    fn advance(&self, state: &mut ArState, x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(NaraError::NonFinite);
        }
        let mut input = vec![x];
        for (cell, st) in self.layers.iter().zip(state.layers.iter_mut()) {
            *st = cell.step(st, &input)?;
            input.clone_from(&st.h);
        }
        state.position += 1;
        Ok(())
    }

    /// Feeds one observed sample.
    pub fn step(&self, state: &ArState, x: f64) -> Result<ArState> {
        self.check_state(state)?;
        let mut s = state.clone();
        self.advance(&mut s, x)?;
        Ok(s)
    }

    /// Teacher-forces `values` starting from `state`.
    pub fn feed(&self, state: &ArState, values: &[f64]) -> Result<ArState> {
        self.check_state(state)?;
        let mut s = state.clone();
        for &x in values {
            self.advance(&mut s, x)?;
        }
        Ok(s)
    }

    /// State after a teacher-forced pass over `context`.
    pub fn warmup(&self, context: &[f64]) -> Result<ArState> {
        if context.is_empty() {
            return Err(NaraError::Empty("context"));
        }
        self.feed(&self.start_state(), context)
    }

    fn head_from_top(&self, top: &[f64]) -> (GaussianHead, f64) {
        let out = self.head.forward(top).expect("head width matches hidden size");
        (GaussianHead::from_raw(out[0], out[1]), out[1])
    }

    /// Conditional distribution of the next sample.
    pub fn next_dist(&self, state: &ArState) -> GaussianHead {
        self.head_from_top(&state.layers.last().expect("at least one layer").h).0
    }

    /// Draws the next sample with one standard-normal draw and feeds it back.
    pub fn sample_next<R: Rng + ?Sized>(&self, state: &ArState, rng: &mut R) -> Result<(f64, ArState)> {
        let z: f64 = rng.sample(StandardNormal);
        self.sample_next_with(state, z)
    }

    /// As [`sample_next`](Self::sample_next) with the normal draw supplied.
    pub fn sample_next_with(&self, state: &ArState, z: f64) -> Result<(f64, ArState)> {
        let x = self.next_dist(state).sample_with(z);
        if !x.is_finite() {
            return Err(NaraError::Diverged(format!("non-finite sample at position {}", state.position + 1)));
        }
        Ok((x, self.step(state, x)?))
    }

    /// `−Σ_t ln p_θ(x_t | x_{<t})` under teacher forcing from the start token.
    pub fn sequence_nll(&self, x: &Sequence) -> Result<f64> {
        let mut state = self.start_state();
        let mut nll = 0.0;
        for &v in x.samples() {
            nll -= self.next_dist(&state).log_density(v)?;
            self.advance(&mut state, v)?;
        }
        Ok(nll)
    }

    /// Sequence NLL together with its gradient with respect to θ.
    pub fn sequence_nll_with_grad(&self, x: &Sequence) -> Result<(f64, ArModel)> {
        let s = x.samples();
        let mut inputs = Vec::with_capacity(s.len());
        inputs.push(START_TOKEN);
        inputs.extend_from_slice(&s[..s.len() - 1]);
        let trace = self.run(&self.zero_state(), &inputs)?;
        let mut nll = 0.0;
        let mut dheads = Vec::with_capacity(s.len());
        for (head, &v) in trace.heads.iter().zip(s) {
            let (l, g) = head.nll_with_grad(v);
            nll += l;
            dheads.push(g);
        }
        let mut grads = self.zeros_like();
        self.backward(&trace, &dheads, &[], &mut grads)?;
        Ok((nll, grads))
    }

    /// Heads for `M = priors.len()` positions after `state`, where position
    /// `k` is conditioned on the context and on the priors `m_1 … m_{k-1}`.
    /// The last prior is never consumed.
    ///
    /// All inputs are known up front, so this is a single teacher-forced pass
    /// with no sampling between positions.
    pub fn draft_pass(&self, state: &ArState, priors: &[f64]) -> Result<Vec<GaussianHead>> {
        if priors.is_empty() {
            return Err(NaraError::Empty("priors"));
        }
        self.check_state(state)?;
        let mut heads = Vec::with_capacity(priors.len());
        heads.push(self.next_dist(state));
        let mut s = state.clone();
        for &m in &priors[..priors.len() - 1] {
            self.advance(&mut s, m)?;
            heads.push(self.next_dist(&s));
        }
        Ok(heads)
    }

    /// Forward pass over `inputs` from `init`, recording what backward needs.
    pub fn run(&self, init: &ArState, inputs: &[f64]) -> Result<ArTrace> {
        self.check_state(init)?;
        let n = inputs.len();
        let mut trace = ArTrace {
            caches: Vec::with_capacity(n),
            tops: Vec::with_capacity(n),
            raw_log_var: Vec::with_capacity(n),
            heads: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
        };
        let mut state = init.clone();
        for &x in inputs {
            if !x.is_finite() {
                return Err(NaraError::NonFinite);
            }
            let mut input = vec![x];
            let mut caches = Vec::with_capacity(self.layers.len());
            for (cell, st) in self.layers.iter().zip(state.layers.iter_mut()) {
                let (next, cache) = cell.step_cached(st, &input)?;
                *st = next;
                input.clone_from(&st.h);
                caches.push(cache);
            }
            state.position += 1;
            let (head, raw) = self.head_from_top(&input);
            trace.caches.push(caches);
            trace.tops.push(input);
            trace.raw_log_var.push(raw);
            trace.heads.push(head);
            trace.states.push(state.clone());
        }
        Ok(trace)
    }

    /// Backpropagates through a recorded [`run`](Self::run).
    ///
    /// `head_grads[t]` is `dL/d heads[t]`; `inject` adds `dL/d states[t]` for
    /// selected steps. Parameter gradients are accumulated into `grads`.
    /// Returns `dL/d inputs` and `dL/d init`.
    pub fn backward(
        &self,
        trace: &ArTrace,
        head_grads: &[HeadGrad],
        inject: &[(usize, ArStateGrad)],
        grads: &mut ArModel,
    ) -> Result<(Vec<f64>, ArStateGrad)> {
        if trace.is_empty() {
            return Err(NaraError::NoForward);
        }
        if head_grads.len() != trace.len() {
            return Err(NaraError::shape(trace.len(), head_grads.len()));
        }
        let h = self.hidden_size();
        let nl = self.layers.len();
        let mut dstate: ArStateGrad = vec![LstmState::zeros(h); nl];
        let mut dinputs = vec![0.0; trace.len()];
        for t in (0..trace.len()).rev() {
            for (idx, g) in inject {
                if *idx == t {
                    for (d, gi) in dstate.iter_mut().zip(g) {
                        crate::tensor::axpy(1.0, &gi.h, &mut d.h);
                        crate::tensor::axpy(1.0, &gi.c, &mut d.c);
                    }
                }
            }
            let hg = head_grads[t];
            let raw = trace.raw_log_var[t];
            let d_raw = if raw > LOG_VAR_MIN && raw < LOG_VAR_MAX { hg.d_log_var } else { 0.0 };
            if hg.d_mean != 0.0 || d_raw != 0.0 {
                let dtop = self.head.backward(&trace.tops[t], &[hg.d_mean, d_raw], &mut grads.head);
                crate::tensor::axpy(1.0, &dtop, &mut dstate[nl - 1].h);
            }
            for l in (0..nl).rev() {
                let (dx, dh_prev, dc_prev) = self.layers[l].backward_step(
                    &trace.caches[t][l],
                    &dstate[l].h,
                    &dstate[l].c,
                    &mut grads.layers[l],
                );
                dstate[l].h = dh_prev;
                dstate[l].c = dc_prev;
                if l > 0 {
                    crate::tensor::axpy(1.0, &dx, &mut dstate[l - 1].h);
                } else {
                    dinputs[t] = dx[0];
                }
            }
        }
        Ok((dinputs, dstate))
    }
}

impl Parameters for ArModel {
    fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (l, cell) in self.layers.iter().enumerate() {
            for (n, t) in cell.named_tensors() {
                out.push((format!("lstm{l}.{n}"), t));
            }
        }
        for (n, t) in self.head.named_tensors() {
            out.push((format!("head.{n}"), t));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for cell in &mut self.layers {
            out.extend(cell.tensors_mut());
        }
        out.extend(self.head.tensors_mut());
        out
    }
}
