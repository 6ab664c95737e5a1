//! Confidence scores, threshold calibration and prefix acceptance.
//!
//! The oracle confidence of a drafted value is its log-density under the
//! draft heads. It needs the AR samples, so a small network g_V predicts
//! the per-position accept decision from the observed window and the priors
//! alone, before any AR evaluation happens.

use crate::ar::{ArModel, ArState, Sequence};
use crate::bundle::ModelBundle;
use crate::error::{NaraError, Result};
use crate::nn::{sigmoid, AdamState, DenseLayer, GaussianHead};
use crate::prior::trailing_window;
use crate::tensor::{Parameters, Tensor};
use rand::seq::SliceRandom;
use rand::Rng;

pub const DEFAULT_KAPPA: f64 = 2.5;
pub const DEFAULT_CONF_HIDDEN: usize = 64;

/// g_V: `[window ⧺ priors] → tanh hidden → sigmoid scores`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceNet {
    pub hidden: DenseLayer,
    pub output: DenseLayer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfidenceKind {
    /// scores in (0, 1) from g_V
    Predicted,
    /// log-densities of drafted values under the draft heads
    OracleLogDensity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceVector {
    pub kind: ConfidenceKind,
    pub values: Vec<f64>,
}

impl ConfidenceNet {
    pub fn init<R: Rng + ?Sized>(context_len: usize, chunk_len: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            hidden: DenseLayer::init(context_len + chunk_len, hidden, rng),
            output: DenseLayer::init(hidden, chunk_len, rng),
        }
    }

    pub fn zeros(context_len: usize, chunk_len: usize, hidden: usize) -> Self {
        Self {
            hidden: DenseLayer::zeros(context_len + chunk_len, hidden),
            output: DenseLayer::zeros(hidden, chunk_len),
        }
    }

    pub fn chunk_len(&self) -> usize {
        self.output.output_size()
    }

    pub fn input_len(&self) -> usize {
        self.hidden.input_size()
    }

    fn input(&self, window: &[f64], priors: &[f64]) -> Result<Vec<f64>> {
        if window.len() + priors.len() != self.input_len() || priors.len() != self.chunk_len() {
            return Err(NaraError::shape(
                format!("window + {} priors = {}", self.chunk_len(), self.input_len()),
                format!("{} + {}", window.len(), priors.len()),
            ));
        }
        let mut x = Vec::with_capacity(self.input_len());
        x.extend_from_slice(window);
        x.extend_from_slice(priors);
        Ok(x)
    }

    /// Pre-sigmoid outputs and the hidden activations.
    fn logits(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let hidden: Vec<f64> = self.hidden.forward(x)?.into_iter().map(f64::tanh).collect();
        let logits = self.output.forward(&hidden)?;
        Ok((logits, hidden))
    }

    pub fn predict_confidence(&self, window: &[f64], priors: &[f64]) -> Result<ConfidenceVector> {
        let x = self.input(window, priors)?;
        let (logits, _) = self.logits(&x)?;
        Ok(ConfidenceVector {
            kind: ConfidenceKind::Predicted,
            values: logits.into_iter().map(sigmoid).collect(),
        })
    }

    /// Mean binary cross-entropy over the labelled positions of one example
    /// and its gradient, accumulated into `grads` with weight `scale`.
    pub fn bce_with_grad(&self, ex: &ConfExample, scale: f64, grads: &mut ConfidenceNet) -> Result<f64> {
        let (logits, hidden) = self.logits(&ex.input)?;
        let n = ex.labels.len();
        if n == 0 || n > logits.len() {
            return Err(NaraError::shape(format!("1..={} labels", logits.len()), n));
        }
        let mut dlogits = vec![0.0; logits.len()];
        let mut loss = 0.0;
        for (k, &y) in ex.labels.iter().enumerate() {
            loss += bce_logit(logits[k], y);
            dlogits[k] = scale * (sigmoid(logits[k]) - y) / n as f64;
        }
        let dh = self.output.backward(&hidden, &dlogits, &mut grads.output);
        let dpre: Vec<f64> = dh.iter().zip(&hidden).map(|(d, h)| d * (1.0 - h * h)).collect();
        self.hidden.backward(&ex.input, &dpre, &mut grads.hidden);
        Ok(loss / n as f64)
    }

    pub fn bce(&self, ex: &ConfExample) -> Result<f64> {
        let (logits, _) = self.logits(&ex.input)?;
        let n = ex.labels.len();
        if n == 0 || n > logits.len() {
            return Err(NaraError::shape(format!("1..={} labels", logits.len()), n));
        }
        Ok(ex.labels.iter().zip(&logits).map(|(&y, &z)| bce_logit(z, y)).sum::<f64>() / n as f64)
    }
}

impl Parameters for ConfidenceNet {
    fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (n, t) in self.hidden.named_tensors() {
            out.push((format!("hidden.{n}"), t));
        }
        for (n, t) in self.output.named_tensors() {
            out.push((format!("output.{n}"), t));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.hidden.tensors_mut();
        out.extend(self.output.tensors_mut());
        out
    }
}

/// `−[y ln σ(z) + (1−y) ln(1−σ(z))]` computed from the logit.
pub fn bce_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

/// Per-position log-density of the drafted values under the draft heads
/// conditioned on `state` and the priors.
pub fn oracle_confidence(ar: &ArModel, state: &ArState, priors: &[f64], drafted: &[f64]) -> Result<ConfidenceVector> {
    if priors.len() != drafted.len() {
        return Err(NaraError::shape(priors.len(), drafted.len()));
    }
    let heads = ar.draft_pass(state, priors)?;
    oracle_from_heads(&heads, drafted)
}

pub fn oracle_from_heads(heads: &[GaussianHead], drafted: &[f64]) -> Result<ConfidenceVector> {
    if heads.len() != drafted.len() {
        return Err(NaraError::shape(heads.len(), drafted.len()));
    }
    let values = heads
        .iter()
        .zip(drafted)
        .map(|(h, &x)| h.log_density(x))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConfidenceVector {
        kind: ConfidenceKind::OracleLogDensity,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationMode {
    /// τ = empirical ε-quantile of the oracle log-densities
    Quantile,
    /// τ = κ · running mean of the oracle log-densities
    RunningMean,
}

impl CalibrationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CalibrationMode::Quantile => "quantile",
            CalibrationMode::RunningMean => "running_mean",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "quantile" => Ok(CalibrationMode::Quantile),
            "running_mean" => Ok(CalibrationMode::RunningMean),
            other => Err(NaraError::Invalid(format!("unknown calibration mode '{other}'"))),
        }
    }
}

pub const MIN_QUANTILE_STREAM: usize = 100;
pub const QUANTILE_TABLE_SIZE: usize = 101;

/// Threshold `τ` for a stream of oracle log-densities.
///
/// `level` is the quantile level for [`CalibrationMode::Quantile`]; level 0
/// yields `−∞` so every value passes.
pub fn calibrate_threshold(mode: CalibrationMode, kappa: f64, stream: &[f64], level: f64) -> Result<f64> {
    if stream.is_empty() {
        return Err(NaraError::Empty("oracle log-density stream"));
    }
    if stream.iter().any(|v| !v.is_finite()) {
        return Err(NaraError::NonFinite);
    }
    match mode {
        CalibrationMode::RunningMean => {
            if !(kappa > 0.0) {
                return Err(NaraError::Invalid("kappa must be positive".into()));
            }
            let mut mean = 0.0;
            for (i, &v) in stream.iter().enumerate() {
                mean += (v - mean) / (i + 1) as f64;
            }
            Ok(kappa * mean)
        }
        CalibrationMode::Quantile => {
            if stream.len() < MIN_QUANTILE_STREAM {
                return Err(NaraError::Invalid(format!(
                    "quantile calibration needs at least {MIN_QUANTILE_STREAM} values, got {}",
                    stream.len()
                )));
            }
            lower_quantile(stream, level)
        }
    }
}

/// Smallest value `v` with at least `⌈level·n⌉` stream values `≤ v`.
fn lower_quantile(stream: &[f64], level: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&level) {
        return Err(NaraError::Invalid(format!("quantile level {level} outside [0, 1]")));
    }
    if level == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let n = stream.len();
    let rank = ((level * n as f64).ceil() as usize).clamp(1, n);
    let mut buf = stream.to_vec();
    let (_, v, _) = buf.select_nth_unstable_by(rank - 1, |a, b| a.total_cmp(b));
    Ok(*v)
}

/// Calibration state stored with a trained bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdCalibration {
    pub mode: CalibrationMode,
    pub kappa: f64,
    /// quantile level that defines the training labels
    pub level: f64,
    pub count: u64,
    pub running_mean: f64,
    /// quantiles of the observed stream at levels `0, 0.01, …, 1`
    pub quantiles: Vec<f64>,
    /// threshold the training labels were produced with
    pub threshold: f64,
}

impl ThresholdCalibration {
    pub fn new(mode: CalibrationMode, kappa: f64, level: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(NaraError::Invalid("kappa must be positive".into()));
        }
        if !(0.0..=1.0).contains(&level) {
            return Err(NaraError::Invalid(format!("quantile level {level} outside [0, 1]")));
        }
        Ok(Self {
            mode,
            kappa,
            level,
            count: 0,
            running_mean: 0.0,
            quantiles: Vec::new(),
            threshold: f64::NAN,
        })
    }

    /// Folds a stream into the running statistics and recomputes `τ`.
    pub fn fit(&mut self, stream: &[f64]) -> Result<f64> {
        let tau = calibrate_threshold(self.mode, self.kappa, stream, self.level)?;
        for &v in stream {
            self.count += 1;
            self.running_mean += (v - self.running_mean) / self.count as f64;
        }
        if stream.len() >= MIN_QUANTILE_STREAM {
            let mut sorted = stream.to_vec();
            sorted.sort_by(|a, b| a.total_cmp(b));
            self.quantiles = (0..QUANTILE_TABLE_SIZE)
                .map(|i| {
                    let lvl = i as f64 / (QUANTILE_TABLE_SIZE - 1) as f64;
                    let rank = ((lvl * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
                    sorted[rank - 1]
                })
                .collect();
        }
        self.threshold = match self.mode {
            CalibrationMode::RunningMean => self.kappa * self.running_mean,
            CalibrationMode::Quantile => tau,
        };
        Ok(self.threshold)
    }

    pub fn is_fitted(&self) -> bool {
        self.count > 0
    }
}

/// Training labels `h_k = 1[σ_k ≥ τ]`, position by position.
pub fn label_chunk(oracle: &[f64], tau: f64) -> Vec<bool> {
    oracle.iter().map(|&s| s >= tau).collect()
}

/// Accepted prefix of one chunk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcceptMask {
    pub mask: Vec<bool>,
    /// 1-based index of the first rejected position, `M+1` if none
    pub k_hat: usize,
}

impl AcceptMask {
    pub fn accepted(&self) -> usize {
        self.k_hat - 1
    }
}

/// `k̂` is the first position whose score is below `ε`; positions before it
/// are accepted. `ε ≥ 1` rejects everything and `ε ≤ 0` accepts everything,
/// whatever the scores.
pub fn accept_prefix(scores: &[f64], epsilon: f64) -> AcceptMask {
    let m = scores.len();
    let k_hat = if epsilon >= 1.0 {
        1
    } else if epsilon <= 0.0 {
        m + 1
    } else {
        scores.iter().position(|&s| s < epsilon).map_or(m + 1, |i| i + 1)
    };
    AcceptMask {
        mask: (1..=m).map(|k| k < k_hat).collect(),
        k_hat,
    }
}

/// One g_V training case.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfExample {
    /// window ⧺ priors
    pub input: Vec<f64>,
    /// 0/1 labels for the first `labels.len()` positions
    pub labels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfTrainingConfig {
    pub epochs: usize,
    pub train_windows: usize,
    pub val_windows: usize,
    pub batch: usize,
    pub lr: f64,
}

impl Default for ConfTrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            train_windows: 1024,
            val_windows: 256,
            batch: 32,
            lr: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceReport {
    pub threshold: f64,
    pub initial_val_bce: f64,
    /// validation BCE after each epoch
    pub epoch_val_bce: Vec<f64>,
    pub positive_rate: f64,
}

impl ConfidenceReport {
    pub fn final_val_bce(&self) -> f64 {
        self.epoch_val_bce.last().copied().unwrap_or(self.initial_val_bce)
    }
}

/// Oracle scores for randomly placed windows of `seqs`.
///
/// For each window the chunk is rolled out sequentially from p_θ, and the
/// oracle confidence is the log-density of those samples under the draft
/// heads built from the predicted priors.
pub fn collect_oracle_windows<R: Rng + ?Sized>(
    bundle: &ModelBundle,
    seqs: &[Sequence],
    count: usize,
    rng: &mut R,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    if seqs.is_empty() {
        return Err(NaraError::Empty("sequences for confidence training"));
    }
    let o = bundle.prior.context_len();
    let m = bundle.prior.chunk_len();
    let mut picks: Vec<(usize, usize)> = (0..count)
        .map(|_| {
            let s = rng.random_range(0..seqs.len());
            let n = seqs[s].len();
            let lo = o.min(n - 1).max(1);
            (s, rng.random_range(lo..n.max(lo + 1)))
        })
        .collect();
    picks.sort_unstable();

    let mut out = Vec::with_capacity(count);
    let mut cur: Option<(usize, usize, ArState)> = None;
    for (s, v) in picks {
        let x = seqs[s].samples();
        let v = v.min(x.len() - 1).max(1);
        let state = match cur.take() {
            Some((cs, cv, st)) if cs == s => bundle.ar.feed(&st, &x[cv..v])?,
            _ => bundle.ar.warmup(&x[..v])?,
        };
        let chunk = m.min(x.len() - v);
        let prior = bundle.prior.predict_priors(&trailing_window(&x[..v], o), v)?;
        let mut drafted = Vec::with_capacity(chunk);
        let mut st = state.clone();
        for _ in 0..chunk {
            let (val, next) = bundle.ar.sample_next(&st, rng)?;
            drafted.push(val);
            st = next;
        }
        let oracle = oracle_confidence(&bundle.ar, &state, &prior.values[..chunk], &drafted)?;
        let mut input = trailing_window(&x[..v], o);
        input.extend_from_slice(&prior.values);
        out.push((input, oracle.values));
        cur = Some((s, v, state));
    }
    Ok(out)
}

fn to_examples(raw: Vec<(Vec<f64>, Vec<f64>)>, tau: f64) -> Vec<ConfExample> {
    raw.into_iter()
        .map(|(input, oracle)| ConfExample {
            input,
            labels: label_chunk(&oracle, tau).into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect(),
        })
        .collect()
}

pub fn mean_bce(net: &ConfidenceNet, examples: &[ConfExample]) -> Result<f64> {
    if examples.is_empty() {
        return Err(NaraError::Empty("confidence examples"));
    }
    let mut total = 0.0;
    for ex in examples {
        total += net.bce(ex)?;
    }
    Ok(total / examples.len() as f64)
}

/// Minimises mean BCE over `train` with Adam; returns validation BCE per epoch.
pub fn fit_confidence_net<R: Rng + ?Sized>(
    net: &mut ConfidenceNet,
    train: &[ConfExample],
    validation: &[ConfExample],
    cfg: &ConfTrainingConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if train.is_empty() {
        return Err(NaraError::Empty("confidence training examples"));
    }
    let batch = cfg.batch.max(1);
    let mut adam = AdamState::new(net, cfg.lr);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(rng);
        for idx in order.chunks(batch) {
            let mut grads = net.zeros_like();
            let scale = 1.0 / idx.len() as f64;
            for &i in idx {
                net.bce_with_grad(&train[i], scale, &mut grads)?;
            }
            adam.step(net, &grads).map_err(|e| match e {
                NaraError::Diverged(m) => NaraError::Diverged(format!("confidence epoch {epoch}: {m}")),
                other => other,
            })?;
        }
        let eval = if validation.is_empty() { train } else { validation };
        let bce = mean_bce(net, eval)?;
        if !bce.is_finite() {
            return Err(NaraError::Diverged(format!("confidence epoch {epoch}: non-finite BCE")));
        }
        log.push(bce);
    }
    Ok(log)
}

/// Calibrates the threshold on oracle scores from the training split, then
/// fits g_V to the resulting labels. Only V and the calibration state of
/// the bundle change.
pub fn train_confidence<R: Rng + ?Sized>(
    bundle: &mut ModelBundle,
    train: &[Sequence],
    validation: &[Sequence],
    cfg: &ConfTrainingConfig,
    rng: &mut R,
) -> Result<ConfidenceReport> {
    if !bundle.trained.ar {
        return Err(NaraError::Untrained("AR model"));
    }
    if !bundle.trained.prior {
        return Err(NaraError::Untrained("prior predictor"));
    }
    let raw_train = collect_oracle_windows(bundle, train, cfg.train_windows, rng)?;
    let raw_val = if validation.is_empty() || cfg.val_windows == 0 {
        Vec::new()
    } else {
        collect_oracle_windows(bundle, validation, cfg.val_windows, rng)?
    };
    let stream: Vec<f64> = raw_train.iter().flat_map(|(_, o)| o.iter().copied()).collect();
    let tau = bundle.calibration.fit(&stream)?;
    let positive_rate = stream.iter().filter(|&&s| s >= tau).count() as f64 / stream.len() as f64;

    let train_ex = to_examples(raw_train, tau);
    let val_ex = to_examples(raw_val, tau);
    let eval = if val_ex.is_empty() { &train_ex } else { &val_ex };
    let initial_val_bce = mean_bce(&bundle.confidence, eval)?;
    let epoch_val_bce = fit_confidence_net(&mut bundle.confidence, &train_ex, &val_ex, cfg, rng)?;
    bundle.trained.confidence = cfg.epochs > 0;
    Ok(ConfidenceReport {
        threshold: tau,
        initial_val_bce,
        epoch_val_bce,
        positive_rate,
    })
}
