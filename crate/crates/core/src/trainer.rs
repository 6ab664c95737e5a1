//! Joint training of the AR model θ and the prior predictor W, followed by
//! confidence training with both frozen.
//!
//! For a batch of `K` sequences, each sequence `x` gets a random position
//! `v` and chunk length `l = min(B, N − v)`. The loss is
//!
//! ```text
//!   (1/K)  Σ −ln p_θ(x_{≤v+l})
//! + (1/KM) Σ Σ −ln q_{θ,W}(x̂_{(v,v+l]} | x_{≤v}, f_W(x_{≤v}))
//! ```
//!
//! where each `x̂` is rolled out from p_θ after `x_{≤v}` and `q` is the
//! product of the draft heads. Rollouts are treated as constants.

use crate::ar::{ArModel, ArStateGrad, Sequence, START_TOKEN};
use crate::bundle::ModelBundle;
use crate::confidence::{train_confidence, ConfTrainingConfig, ConfidenceReport};
use crate::data::SinusoidDataset;
use crate::error::{NaraError, Result};
use crate::nn::{AdamState, HeadGrad};
use crate::prior::{prior_l1, trailing_window, PriorPredictor};
use crate::rng::seeded;
use crate::tensor::Parameters;
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    /// Adam step for θ
    pub lr: f64,
    /// Adam step for W
    pub prior_lr: f64,
    /// training positions drawn per sequence per epoch
    pub passes: usize,
    /// sequences per batch `K`
    pub batch: usize,
    /// maximum chunk `B`
    pub max_chunk: usize,
    pub epochs: usize,
    /// rollouts per training position (`M` in the joint objective)
    pub drafts: usize,
    pub seed: u64,
    pub confidence: ConfTrainingConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            prior_lr: 1e-3,
            passes: 3,
            batch: 8,
            max_chunk: 20,
            epochs: 30,
            drafts: 1,
            seed: 0,
            confidence: ConfTrainingConfig::default(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_chunk == 0 || self.batch == 0 || self.drafts == 0 || self.passes == 0 {
            return Err(NaraError::Invalid("batch, max chunk, drafts and passes must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite() && self.prior_lr > 0.0 && self.prior_lr.is_finite()) {
            return Err(NaraError::Invalid("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// One training position: sequence index, 1-based position `v`, chunk `l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainingSample {
    pub seq: usize,
    pub position: usize,
    pub chunk: usize,
}

impl TrainingSample {
    /// `v` uniform in `[1, N]`, `l = min(B, N − v)`.
    pub fn draw<R: Rng + ?Sized>(seq: usize, len: usize, max_chunk: usize, rng: &mut R) -> Self {
        let position = rng.random_range(1..=len);
        Self {
            seq,
            position,
            chunk: max_chunk.min(len - position),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLoss {
    /// batch mean of the ground-truth prefix NLL
    pub ar_term: f64,
    /// batch-and-rollout mean of the approximate-distribution NLL
    pub q_term: f64,
    /// ground-truth NLL per predicted sample, averaged over the batch
    pub ar_per_step: f64,
}

impl JointLoss {
    pub fn total(&self) -> f64 {
        self.ar_term + self.q_term
    }
}

/// `rollouts[b][r]` is rollout `r` for batch entry `b`.
pub type Rollouts = Vec<Vec<Vec<f64>>>;

fn usable(batch: &[TrainingSample]) -> impl Iterator<Item = (usize, &TrainingSample)> {
    batch.iter().enumerate().filter(|(_, s)| s.chunk > 0)
}

/// Draws `drafts` rollouts of length `l` from p_θ after `x_{≤v}` per sample.
pub fn draw_rollouts<R: Rng + ?Sized>(
    ar: &ArModel,
    seqs: &[Sequence],
    batch: &[TrainingSample],
    drafts: usize,
    rng: &mut R,
) -> Result<Rollouts> {
    let mut out = vec![Vec::new(); batch.len()];
    for (b, s) in usable(batch) {
        let x = seqs[s.seq].samples();
        let state = ar.warmup(&x[..s.position])?;
        for _ in 0..drafts {
            let mut st = state.clone();
            let mut r = Vec::with_capacity(s.chunk);
            for _ in 0..s.chunk {
                let (v, next) = ar.sample_next(&st, rng)?;
                r.push(v);
                st = next;
            }
            out[b].push(r);
        }
    }
    Ok(out)
}

fn batch_size(batch: &[TrainingSample]) -> Result<usize> {
    let k = usable(batch).count();
    if k == 0 {
        return Err(NaraError::Empty("training batch (all chunks have length 0)"));
    }
    Ok(k)
}

/// Value of the joint objective for fixed rollouts, computed with plain
/// forward passes (no tape).
pub fn joint_loss_given(
    ar: &ArModel,
    prior: &PriorPredictor,
    seqs: &[Sequence],
    batch: &[TrainingSample],
    rollouts: &Rollouts,
) -> Result<JointLoss> {
    let k = batch_size(batch)? as f64;
    let (mut ar_sum, mut q_sum, mut per_step) = (0.0, 0.0, 0.0);
    for (b, s) in usable(batch) {
        let x = seqs[s.seq].samples();
        let end = s.position + s.chunk;
        let nll = ar.sequence_nll(&Sequence::new(x[..end].to_vec())?)?;
        ar_sum += nll;
        per_step += nll / end as f64;
        let state = ar.warmup(&x[..s.position])?;
        let priors = prior.predict_priors(&trailing_window(&x[..s.position], prior.context_len()), s.position)?;
        let heads = ar.draft_pass(&state, &priors.values[..s.chunk])?;
        let r = &rollouts[b];
        for draft in r {
            for (h, &v) in heads.iter().zip(draft) {
                q_sum -= h.log_density(v)? / r.len() as f64;
            }
        }
    }
    Ok(JointLoss {
        ar_term: ar_sum / k,
        q_term: q_sum / k,
        ar_per_step: per_step / k,
    })
}

/// Draws rollouts from `rng` and evaluates the joint objective.
pub fn joint_loss<R: Rng + ?Sized>(
    ar: &ArModel,
    prior: &PriorPredictor,
    seqs: &[Sequence],
    batch: &[TrainingSample],
    drafts: usize,
    rng: &mut R,
) -> Result<JointLoss> {
    let rollouts = draw_rollouts(ar, seqs, batch, drafts, rng)?;
    joint_loss_given(ar, prior, seqs, batch, &rollouts)
}

/// Joint objective and its gradients with respect to θ and W.
pub fn joint_loss_with_grad(
    ar: &ArModel,
    prior: &PriorPredictor,
    seqs: &[Sequence],
    batch: &[TrainingSample],
    rollouts: &Rollouts,
) -> Result<(JointLoss, ArModel, PriorPredictor)> {
    let k = batch_size(batch)? as f64;
    let mut g_ar = ar.zeros_like();
    let mut g_prior = prior.zeros_like();
    let (mut ar_sum, mut q_sum, mut per_step) = (0.0, 0.0, 0.0);
    let o = prior.context_len();

    for (b, s) in usable(batch) {
        let x = seqs[s.seq].samples();
        let (v, l) = (s.position, s.chunk);
        let end = v + l;

        // ground-truth prefix: inputs [0, x_1 … x_{end-1}], heads predict x_1 … x_end
        let mut inputs = Vec::with_capacity(end);
        inputs.push(START_TOKEN);
        inputs.extend_from_slice(&x[..end - 1]);
        let full = ar.run(&ar.zero_state(), &inputs)?;
        let mut dheads = Vec::with_capacity(end);
        let mut nll = 0.0;
        for (h, &target) in full.heads.iter().zip(&x[..end]) {
            let (li, g) = h.nll_with_grad(target);
            nll += li;
            dheads.push(HeadGrad {
                d_mean: g.d_mean / k,
                d_log_var: g.d_log_var / k,
            });
        }
        ar_sum += nll;
        per_step += nll / end as f64;

        // draft heads: the first is full.heads[v] (after x_{≤v}); the rest
        // come from feeding the priors m_1 … m_{l-1} from that state
        let window = trailing_window(&x[..v], o);
        let priors = prior.predict_priors(&window, v)?;
        let state_v = full.states[v].clone();
        let draft = ar.run(&state_v, &priors.values[..l - 1])?;
        let r = &rollouts[b];
        let w = 1.0 / (k * r.len() as f64);
        let mut d_draft = vec![HeadGrad::default(); l - 1];
        for roll in r {
            let (li, g) = full.heads[v].nll_with_grad(roll[0]);
            q_sum += li / r.len() as f64;
            dheads[v].d_mean += w * g.d_mean;
            dheads[v].d_log_var += w * g.d_log_var;
            for (j, h) in draft.heads.iter().enumerate() {
                let (li, g) = h.nll_with_grad(roll[j + 1]);
                q_sum += li / r.len() as f64;
                d_draft[j].d_mean += w * g.d_mean;
                d_draft[j].d_log_var += w * g.d_log_var;
            }
        }

        let mut inject: Vec<(usize, ArStateGrad)> = Vec::new();
        if l > 1 {
            let (d_inputs, d_state) = ar.backward(&draft, &d_draft, &[], &mut g_ar)?;
            inject.push((v, d_state));
            let mut d_priors = vec![0.0; prior.chunk_len()];
            d_priors[..l - 1].copy_from_slice(&d_inputs);
            prior.layer.backward(&window, &d_priors, &mut g_prior.layer);
        }
        ar.backward(&full, &dheads, &inject, &mut g_ar)?;
    }
    Ok((
        JointLoss {
            ar_term: ar_sum / k,
            q_term: q_sum / k,
            ar_per_step: per_step / k,
        },
        g_ar,
        g_prior,
    ))
}

/// Mean per-sample teacher-forced NLL over whole sequences.
pub fn mean_nll_per_step(ar: &ArModel, seqs: &[Sequence]) -> Result<f64> {
    if seqs.is_empty() {
        return Err(NaraError::Empty("sequences"));
    }
    let (mut total, mut n) = (0.0, 0usize);
    for s in seqs {
        total += ar.sequence_nll(s)?;
        n += s.len();
    }
    Ok(total / n as f64)
}

/// One row of the per-epoch training log. Joint epochs leave `conf_bce`
/// empty; confidence epochs leave the other metrics empty.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_nll: Option<f64>,
    pub val_nll: Option<f64>,
    pub prior_l1: Option<f64>,
    pub conf_bce: Option<f64>,
}

pub const EPOCH_LOG_HEADER: &str = "epoch,train_nll,val_nll,prior_l1,conf_bce";

impl EpochRecord {
    pub fn csv_row(&self) -> String {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.10}")).unwrap_or_default();
        format!(
            "{},{},{},{},{}",
            self.epoch,
            f(self.train_nll),
            f(self.val_nll),
            f(self.prior_l1),
            f(self.conf_bce)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    /// prior ℓ1 and validation NLL of the initial parameters
    pub initial_prior_l1: Option<f64>,
    pub initial_val_nll: Option<f64>,
    pub confidence: Option<ConfidenceReport>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(EPOCH_LOG_HEADER);
        s.push('\n');
        for r in &self.epochs {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }

    pub fn joint_epochs(&self) -> impl Iterator<Item = &EpochRecord> {
        self.epochs.iter().filter(|r| r.conf_bce.is_none())
    }
}

fn diverged_at(epoch: usize, e: NaraError) -> NaraError {
    match e {
        NaraError::Diverged(m) => NaraError::Diverged(format!("epoch {epoch}: {m}")),
        other => other,
    }
}

/// Runs the joint phase for `cfg.epochs` epochs, then trains g_V with θ and
/// W frozen. With zero epochs the bundle is returned unchanged.
pub fn train(bundle: &mut ModelBundle, data: &SinusoidDataset, cfg: &TrainingConfig) -> Result<TrainingLog> {
    cfg.validate()?;
    bundle.validate()?;
    if data.train.is_empty() {
        return Err(NaraError::Empty("training split"));
    }
    let mut log = TrainingLog {
        epochs: Vec::new(),
        initial_prior_l1: None,
        initial_val_nll: None,
        confidence: None,
    };
    if cfg.epochs == 0 {
        return Ok(log);
    }
    bundle.standardizer = data.standardizer;
    let mut rng = seeded(cfg.seed);
    let (o, m) = (bundle.context_len(), bundle.chunk_len());
    let windows = data.eval_windows(o, m);
    let l1 = |p: &PriorPredictor| if windows.is_empty() { Ok(None) } else { prior_l1(p, &windows).map(Some) };
    let val_nll = |a: &ArModel| {
        if data.validation.is_empty() {
            Ok(None)
        } else {
            mean_nll_per_step(a, &data.validation).map(Some)
        }
    };
    log.initial_prior_l1 = l1(&bundle.prior)?;
    log.initial_val_nll = val_nll(&bundle.ar)?;

    let mut adam_ar = AdamState::new(&bundle.ar, cfg.lr);
    let mut adam_prior = AdamState::new(&bundle.prior, cfg.prior_lr);
    let mut order: Vec<usize> = (0..data.train.len()).flat_map(|i| std::iter::repeat_n(i, cfg.passes)).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut train_sum, mut batches) = (0.0, 0usize);
        for idx in order.chunks(cfg.batch) {
            let batch: Vec<TrainingSample> = idx
                .iter()
                .map(|&i| TrainingSample::draw(i, data.train[i].len(), cfg.max_chunk, &mut rng))
                .collect();
            if batch.iter().all(|s| s.chunk == 0) {
                continue;
            }
            let rollouts = draw_rollouts(&bundle.ar, &data.train, &batch, cfg.drafts, &mut rng)
                .map_err(|e| diverged_at(epoch, e))?;
            let (loss, g_ar, g_prior) = joint_loss_with_grad(&bundle.ar, &bundle.prior, &data.train, &batch, &rollouts)?;
            if !loss.total().is_finite() {
                return Err(NaraError::Diverged(format!("epoch {epoch}: non-finite loss")));
            }
            adam_ar.step(&mut bundle.ar, &g_ar).map_err(|e| diverged_at(epoch, e))?;
            adam_prior.step(&mut bundle.prior, &g_prior).map_err(|e| diverged_at(epoch, e))?;
            train_sum += loss.ar_per_step;
            batches += 1;
        }
        let record = EpochRecord {
            epoch,
            train_nll: (batches > 0).then(|| train_sum / batches as f64),
            val_nll: val_nll(&bundle.ar)?,
            prior_l1: l1(&bundle.prior)?,
            conf_bce: None,
        };
        if record.val_nll.is_some_and(|v| !v.is_finite()) {
            return Err(NaraError::Diverged(format!("epoch {epoch}: non-finite validation NLL")));
        }
        log.epochs.push(record);
    }
    bundle.trained.ar = true;
    bundle.trained.prior = true;

    let report = train_confidence(bundle, &data.train, &data.validation, &cfg.confidence, &mut rng)?;
    for (i, &bce) in report.epoch_val_bce.iter().enumerate() {
        log.epochs.push(EpochRecord {
            epoch: cfg.epochs + i + 1,
            train_nll: None,
            val_nll: None,
            prior_l1: None,
            conf_bce: Some(bce),
        });
    }
    log.confidence = Some(report);
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::ModelShape;
    use crate::data::{make_sinusoids, SinusoidParams};
    use crate::nn::{finite_difference_gradient, max_relative_error};

    fn toy() -> (ArModel, PriorPredictor, Vec<Sequence>) {
        let mut rng = seeded(3);
        let ar = ArModel::init(3, 2, &mut rng).unwrap();
        let prior = PriorPredictor::init(4, 3, &mut rng);
        let seqs = vec![
            Sequence::new((0..10).map(|t| (t as f64 * 0.7).sin()).collect()).unwrap(),
            Sequence::new((0..10).map(|t| (t as f64 * 0.4).cos()).collect()).unwrap(),
        ];
        (ar, prior, seqs)
    }

    #[test]
    fn tape_and_plain_losses_agree() {
        let (ar, prior, seqs) = toy();
        let batch = vec![
            TrainingSample { seq: 0, position: 6, chunk: 3 },
            TrainingSample { seq: 1, position: 2, chunk: 3 },
            TrainingSample { seq: 1, position: 10, chunk: 0 },
        ];
        let rollouts = draw_rollouts(&ar, &seqs, &batch, 2, &mut seeded(1)).unwrap();
        let plain = joint_loss_given(&ar, &prior, &seqs, &batch, &rollouts).unwrap();
        let (taped, _, _) = joint_loss_with_grad(&ar, &prior, &seqs, &batch, &rollouts).unwrap();
        assert!((plain.total() - taped.total()).abs() < 1e-10);
        assert!((plain.q_term - taped.q_term).abs() < 1e-10);
        assert!(plain.total().is_finite());
    }

    #[test]
    fn gradient_matches_finite_difference() {
        for seed in 0..5 {
            let (ar, prior, seqs) = toy();
            let mut rng = seeded(50 + seed);
            let batch: Vec<TrainingSample> =
                (0..2).map(|i| TrainingSample::draw(i, 10, 3, &mut rng)).collect();
            let rollouts = draw_rollouts(&ar, &seqs, &batch, 1, &mut rng).unwrap();
            let (_, g_ar, g_prior) = joint_loss_with_grad(&ar, &prior, &seqs, &batch, &rollouts).unwrap();
            let na = ar.num_params();
            let mut flat = ar.flatten();
            flat.extend(prior.flatten());
            let numeric = finite_difference_gradient(
                |p| {
                    let (mut a, mut w) = (ar.clone(), prior.clone());
                    a.assign_flat(&p[..na]);
                    w.assign_flat(&p[na..]);
                    Ok(joint_loss_given(&a, &w, &seqs, &batch, &rollouts)?.total())
                },
                &flat,
                1e-5,
            )
            .unwrap();
            let mut analytic = g_ar.flatten();
            analytic.extend(g_prior.flatten());
            let err = max_relative_error(&analytic, &numeric, 1e-4);
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn ground_truth_term_has_no_prior_gradient() {
        let (ar, prior, seqs) = toy();
        let batch = vec![TrainingSample { seq: 0, position: 5, chunk: 3 }];
        let rollouts = draw_rollouts(&ar, &seqs, &batch, 1, &mut seeded(2)).unwrap();
        let numeric = finite_difference_gradient(
            |p| {
                let mut w = prior.clone();
                w.assign_flat(p);
                Ok(joint_loss_given(&ar, &w, &seqs, &batch, &rollouts)?.ar_term)
            },
            &prior.flatten(),
            1e-5,
        )
        .unwrap();
        assert!(numeric.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn singleton_batch_is_prefix_nll_plus_chunk_q_nll() {
        let (ar, prior, seqs) = toy();
        let s = TrainingSample { seq: 0, position: 4, chunk: 3 };
        let rollouts = draw_rollouts(&ar, &seqs, &[s], 1, &mut seeded(9)).unwrap();
        let loss = joint_loss_given(&ar, &prior, &seqs, &[s], &rollouts).unwrap();
        let x = seqs[0].samples();
        let expect_ar = ar.sequence_nll(&Sequence::new(x[..7].to_vec()).unwrap()).unwrap();
        let priors = prior.predict_priors(&trailing_window(&x[..4], 4), 4).unwrap();
        let heads = ar.draft_pass(&ar.warmup(&x[..4]).unwrap(), &priors.values[..3]).unwrap();
        let expect_q: f64 = heads.iter().zip(&rollouts[0][0]).map(|(h, &v)| -h.log_density(v).unwrap()).sum();
        assert!((loss.ar_term - expect_ar).abs() < 1e-12);
        assert!((loss.q_term - expect_q).abs() < 1e-12);
    }

    #[test]
    fn priors_equal_to_rollout_reduce_q_to_p() {
        // with m = x̂ the draft heads are the sequential heads along x̂, so the
        // q term equals the rollout's own NLL under p_θ
        let (ar, _, seqs) = toy();
        let s = TrainingSample { seq: 1, position: 5, chunk: 3 };
        let rollouts = draw_rollouts(&ar, &seqs, &[s], 1, &mut seeded(4)).unwrap();
        let xhat = &rollouts[0][0];
        let mut prior = PriorPredictor::zeros(4, 3);
        prior.layer.bias.data_mut().copy_from_slice(xhat);
        let loss = joint_loss_given(&ar, &prior, &seqs, &[s], &rollouts).unwrap();
        let mut st = ar.warmup(&seqs[1].samples()[..5]).unwrap();
        let mut p_nll = 0.0;
        for &v in xhat {
            p_nll -= ar.next_dist(&st).log_density(v).unwrap();
            st = ar.step(&st, v).unwrap();
        }
        assert!((loss.q_term - p_nll).abs() < 1e-12);
    }

    #[test]
    fn all_empty_chunks_are_an_error() {
        let (ar, prior, seqs) = toy();
        let batch = vec![TrainingSample { seq: 0, position: 10, chunk: 0 }];
        assert!(joint_loss(&ar, &prior, &seqs, &batch, 1, &mut seeded(0)).is_err());
    }

    #[test]
    fn sampled_chunks_fit_in_sequence() {
        let mut rng = seeded(0);
        for _ in 0..1000 {
            let s = TrainingSample::draw(0, 30, 20, &mut rng);
            assert!((1..=30).contains(&s.position));
            assert!(s.position + s.chunk <= 30);
        }
    }

    fn tiny_data() -> SinusoidDataset {
        let p = SinusoidParams { count: 8, length: 40, ..Default::default() };
        make_sinusoids(&p, 5).unwrap()
    }

    fn tiny_cfg(epochs: usize) -> TrainingConfig {
        TrainingConfig {
            epochs,
            batch: 4,
            max_chunk: 4,
            confidence: ConfTrainingConfig { epochs: 3, train_windows: 120, val_windows: 30, batch: 16, lr: 1e-3 },
            ..Default::default()
        }
    }

    #[test]
    fn zero_epochs_leave_bundle_unchanged() {
        let mut b = ModelBundle::init(&ModelShape::tiny(), &mut seeded(1)).unwrap();
        let before = b.clone();
        let log = train(&mut b, &tiny_data(), &tiny_cfg(0)).unwrap();
        // the unfitted threshold is NaN, so compare the full debug form
        assert_eq!(format!("{b:?}"), format!("{before:?}"));
        assert!(log.epochs.is_empty());
    }

    #[test]
    fn fixed_seed_is_reproducible_and_freezes_theta_and_w() {
        let data = tiny_data();
        let run = || {
            let mut b = ModelBundle::init(&ModelShape::tiny(), &mut seeded(1)).unwrap();
            let log = train(&mut b, &data, &tiny_cfg(2)).unwrap();
            (b, log)
        };
        let (b1, l1) = run();
        let (b2, l2) = run();
        assert_eq!(l1.to_csv(), l2.to_csv());
        assert_eq!(b1, b2);
        assert!(b1.trained.ar && b1.trained.prior && b1.trained.confidence);
        assert_eq!(l1.epochs.len(), 2 + 3);

        // confidence training alone must not touch θ or W
        let mut b3 = b1.clone();
        let (ar, prior) = (b3.ar.clone(), b3.prior.clone());
        train_confidence(&mut b3, &data.train, &data.validation, &tiny_cfg(1).confidence, &mut seeded(7)).unwrap();
        assert_eq!(b3.ar.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), ar.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(b3.prior, prior);
    }

    #[test]
    fn training_on_constant_sequence_learns_the_mean() {
        let c = 0.7;
        let data = SinusoidDataset {
            train: vec![Sequence::new(vec![c; 30]).unwrap(); 4],
            validation: vec![Sequence::new(vec![c; 30]).unwrap()],
            standardizer: Default::default(),
            params: SinusoidParams::default(),
        };
        let mut b = ModelBundle::init(&ModelShape::tiny(), &mut seeded(2)).unwrap();
        let mut cfg = tiny_cfg(500);
        cfg.batch = 4;
        cfg.lr = 1e-2;
        cfg.confidence.epochs = 0;
        train(&mut b, &data, &cfg).unwrap();
        let head = b.ar.next_dist(&b.ar.warmup(&[c; 10]).unwrap());
        assert!((head.mean - c).abs() < 0.05, "mean {}", head.mean);
    }
}
