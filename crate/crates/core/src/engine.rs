//! Confidence-gated chunk generation and the sequential AR reference.
//!
//! All randomness comes from substreams keyed by `(seed, absolute position,
//! purpose)`. Drafted values use [`Purpose::Draft`], sequential draws use
//! [`Purpose::Resample`]; pure AR resamples every position, so at ε = 1 both
//! generators consume exactly the same normals.

use crate::ar::{ArModel, ArState, Sequence};
use crate::bundle::ModelBundle;
use crate::confidence::{accept_prefix, AcceptMask, ConfidenceVector};
use crate::error::{NaraError, Result};
use crate::nn::GaussianHead;
use crate::prior::{trailing_window, PriorChunk};
use crate::rng::{standard_normal, Purpose};
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationConfig {
    pub epsilon: f64,
    pub horizon: usize,
    pub seed: u64,
}

impl GenerationConfig {
    pub fn new(epsilon: f64, horizon: usize, seed: u64) -> Result<Self> {
        let cfg = Self { epsilon, horizon, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(NaraError::Invalid(format!("epsilon {} outside [0, 1]", self.epsilon)));
        }
        Ok(())
    }
}

/// What happened in one chunk. `heads` and `drafted` cover the accepted
/// prefix only, since the draft pass is skipped past it.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkDraft {
    /// absolute index of the first generated position of the chunk
    pub start: usize,
    pub priors: PriorChunk,
    pub scores: ConfidenceVector,
    pub mask: AcceptMask,
    pub heads: Vec<GaussianHead>,
    pub drafted: Vec<f64>,
    /// sequential draw at the first rejected position
    pub resampled: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationTrace {
    pub generated: Vec<f64>,
    pub sequential_rounds: usize,
    pub draft_passes: usize,
    pub accepted_total: usize,
    pub resampled_total: usize,
    pub wall_time: Duration,
    pub chunks: Vec<ChunkDraft>,
    /// sum of log-densities of every emitted value under the head it was
    /// drawn from
    pub sample_log_density: f64,
}

impl GenerationTrace {
    fn empty() -> Self {
        Self {
            generated: Vec::new(),
            sequential_rounds: 0,
            draft_passes: 0,
            accepted_total: 0,
            resampled_total: 0,
            wall_time: Duration::ZERO,
            chunks: Vec::new(),
            sample_log_density: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.generated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generated.is_empty()
    }

    /// Accepted drafts as a percentage of emitted values (0 for an empty trace).
    pub fn acceptance_pct(&self) -> f64 {
        if self.generated.is_empty() {
            0.0
        } else {
            100.0 * self.accepted_total as f64 / self.generated.len() as f64
        }
    }
}

fn check_sample(v: f64, position: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(NaraError::Diverged(format!("non-finite sample at position {position}")))
    }
}

/// One sequential draw at absolute `position`.
fn resample(ar: &ArModel, state: &ArState, seed: u64, position: usize) -> Result<(f64, f64, ArState)> {
    let head = ar.next_dist(state);
    let v = check_sample(head.sample_with(standard_normal(seed, position as u64, Purpose::Resample)), position)?;
    let lp = head.log_density(v)?;
    Ok((v, lp, ar.step(state, v)?))
}

/// Sequential sampling of `horizon` values after `context`.
pub fn generate_pure_ar(ar: &ArModel, context: &Sequence, horizon: usize, seed: u64) -> Result<GenerationTrace> {
    let t0 = Instant::now();
    let mut trace = GenerationTrace::empty();
    if horizon == 0 {
        return Ok(trace);
    }
    let mut state = ar.warmup(context.samples())?;
    let base = context.len();
    for j in 0..horizon {
        let (v, lp, next) = resample(ar, &state, seed, base + j)?;
        trace.generated.push(v);
        trace.sample_log_density += lp;
        state = next;
    }
    trace.sequential_rounds = horizon;
    trace.resampled_total = horizon;
    trace.wall_time = t0.elapsed();
    Ok(trace)
}

/// Chunked generation gated by the confidence predictor at threshold ε.
///
/// Per chunk: priors and scores from the trailing window, accept the prefix
/// of scores ≥ ε, draw the accepted values from one draft pass (one round),
/// and draw the first rejected position sequentially (one round).
pub fn generate_nara(bundle: &ModelBundle, context: &Sequence, cfg: &GenerationConfig) -> Result<GenerationTrace> {
    cfg.validate()?;
    if !bundle.trained.confidence {
        return Err(NaraError::Untrained("confidence predictor"));
    }
    let t0 = Instant::now();
    let mut trace = GenerationTrace::empty();
    if cfg.horizon == 0 {
        return Ok(trace);
    }
    let ar = &bundle.ar;
    let o = bundle.context_len();
    let m = bundle.chunk_len();
    let mut history = context.samples().to_vec();
    let mut state = ar.warmup(&history)?;
    let base = history.len();

    while trace.generated.len() < cfg.horizon {
        let start = history.len();
        let chunk = m.min(cfg.horizon - trace.generated.len());
        let window = trailing_window(&history, o);
        let priors = bundle.prior.predict_priors(&window, start)?;
        let scores = bundle.confidence.predict_confidence(&window, &priors.values)?;
        let mask = accept_prefix(&scores.values[..chunk], cfg.epsilon);
        let accepted = mask.accepted();

        let mut heads = Vec::new();
        let mut drafted = Vec::with_capacity(accepted);
        if accepted > 0 {
            heads = ar.draft_pass(&state, &priors.values[..accepted])?;
            for (k, h) in heads.iter().enumerate() {
                let pos = start + k;
                let v = check_sample(h.sample_with(standard_normal(cfg.seed, pos as u64, Purpose::Draft)), pos)?;
                trace.sample_log_density += h.log_density(v)?;
                drafted.push(v);
            }
            state = ar.feed(&state, &drafted)?;
            history.extend_from_slice(&drafted);
            trace.draft_passes += 1;
            trace.accepted_total += accepted;
        }

        let mut resampled = None;
        if accepted < chunk {
            let (v, lp, next) = resample(ar, &state, cfg.seed, start + accepted)?;
            trace.sample_log_density += lp;
            history.push(v);
            state = next;
            trace.resampled_total += 1;
            resampled = Some(v);
        }

        trace.generated.extend_from_slice(&history[start..]);
        trace.chunks.push(ChunkDraft {
            start,
            priors,
            scores,
            mask,
            heads,
            drafted,
            resampled,
        });
    }
    debug_assert_eq!(history.len(), base + cfg.horizon);
    trace.sequential_rounds = trace.draft_passes + trace.resampled_total;
    trace.wall_time = t0.elapsed();
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::ModelShape;
    use crate::rng::seeded;
    use proptest::prelude::*;

    fn bundle() -> ModelBundle {
        let mut b = ModelBundle::init(&ModelShape::tiny(), &mut seeded(11)).unwrap();
        b.trained.ar = true;
        b.trained.prior = true;
        b.trained.confidence = true;
        b
    }

    fn context(seed: u64, len: usize) -> Sequence {
        Sequence::new((0..len).map(|t| (t as f64 * 0.3 + seed as f64).sin()).collect()).unwrap()
    }

    fn bits(v: &[f64]) -> Vec<u64> {
        v.iter().map(|x| x.to_bits()).collect()
    }

    #[test]
    fn epsilon_one_matches_pure_ar_bitwise() {
        let b = bundle();
        for s in 0..20 {
            let ctx = context(s, 10 + s as usize);
            let nara = generate_nara(&b, &ctx, &GenerationConfig::new(1.0, 25, s).unwrap()).unwrap();
            let ar = generate_pure_ar(&b.ar, &ctx, 25, s).unwrap();
            assert_eq!(bits(&nara.generated), bits(&ar.generated));
            assert_eq!(nara.sequential_rounds, 25);
            assert_eq!(nara.draft_passes, 0);
            assert_eq!(nara.sample_log_density.to_bits(), ar.sample_log_density.to_bits());
        }
    }

    #[test]
    fn epsilon_zero_accepts_everything() {
        let b = bundle();
        let t = generate_nara(&b, &context(0, 12), &GenerationConfig::new(0.0, 10, 3).unwrap()).unwrap();
        // chunk length 4 in the tiny shape: chunks of 4, 4, 2
        assert_eq!(t.draft_passes, 3);
        assert_eq!(t.sequential_rounds, 3);
        assert_eq!(t.resampled_total, 0);
        assert_eq!(t.acceptance_pct(), 100.0);
        assert_eq!(t.len(), 10);
    }

    #[test]
    fn epsilon_zero_with_default_chunk() {
        let mut shape = ModelShape::tiny();
        shape.chunk_len = 20;
        let mut b = ModelBundle::init(&shape, &mut seeded(1)).unwrap();
        b.trained.confidence = true;
        let t = generate_nara(&b, &context(1, 30), &GenerationConfig::new(0.0, 40, 0).unwrap()).unwrap();
        assert_eq!((t.draft_passes, t.resampled_total, t.sequential_rounds), (2, 0, 2));
        let t = generate_nara(&b, &context(1, 30), &GenerationConfig::new(0.0, 100, 0).unwrap()).unwrap();
        assert_eq!(t.sequential_rounds, 5);
    }

    #[test]
    fn zero_horizon_is_empty() {
        let b = bundle();
        let t = generate_pure_ar(&b.ar, &context(0, 5), 0, 0).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.sequential_rounds, 0);
        let t = generate_nara(&b, &context(0, 5), &GenerationConfig::new(0.5, 0, 0).unwrap()).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn same_seed_same_trace() {
        let b = bundle();
        let a = generate_pure_ar(&b.ar, &context(2, 8), 30, 9).unwrap();
        let c = generate_pure_ar(&b.ar, &context(2, 8), 30, 9).unwrap();
        assert_eq!(bits(&a.generated), bits(&c.generated));
        let d = generate_pure_ar(&b.ar, &context(2, 8), 30, 10).unwrap();
        assert_ne!(bits(&a.generated), bits(&d.generated));
    }

    #[test]
    fn own_trajectory_nll_matches_accumulated_density() {
        let b = bundle();
        let ctx = context(4, 15);
        let t = generate_pure_ar(&b.ar, &ctx, 40, 1).unwrap();
        let mut full = ctx.samples().to_vec();
        full.extend_from_slice(&t.generated);
        let nll_full = b.ar.sequence_nll(&Sequence::new(full).unwrap()).unwrap();
        let nll_ctx = b.ar.sequence_nll(&ctx).unwrap();
        assert!((nll_full - nll_ctx + t.sample_log_density).abs() < 1e-9);
    }

    #[test]
    fn untrained_confidence_is_rejected() {
        let mut b = bundle();
        b.trained.confidence = false;
        let err = generate_nara(&b, &context(0, 5), &GenerationConfig::new(0.5, 5, 0).unwrap()).unwrap_err();
        assert_eq!(err, NaraError::Untrained("confidence predictor"));
    }

    #[test]
    fn epsilon_out_of_range_is_rejected() {
        assert!(GenerationConfig::new(1.5, 5, 0).is_err());
        assert!(GenerationConfig::new(f64::NAN, 5, 0).is_err());
    }

    #[test]
    fn non_finite_sample_reports_divergence() {
        let mut b = bundle();
        b.ar.head.bias.data_mut()[0] = f64::INFINITY;
        let err = generate_pure_ar(&b.ar, &context(0, 5), 3, 0).unwrap_err();
        assert!(matches!(err, NaraError::Diverged(_)));
    }

    fn audit(b: &ModelBundle, ctx: &Sequence, t: &GenerationTrace) {
        // replay: every accepted value came from a head conditioned only on
        // the history before the chunk and the chunk's priors
        let mut history = ctx.samples().to_vec();
        for c in &t.chunks {
            assert_eq!(c.start, history.len());
            let window = trailing_window(&history, b.context_len());
            assert_eq!(b.prior.predict_priors(&window, c.start).unwrap(), c.priors);
            let k = c.drafted.len();
            assert_eq!(k, c.mask.accepted());
            assert!(c.mask.mask.iter().take(k).all(|&a| a));
            assert!(c.mask.mask.iter().skip(k).all(|&a| !a));
            if k > 0 {
                let heads = b.ar.draft_pass(&b.ar.warmup(&history).unwrap(), &c.priors.values[..k]).unwrap();
                assert_eq!(heads, c.heads);
            }
            history.extend_from_slice(&c.drafted);
            history.extend(c.resampled);
        }
        assert_eq!(&history[ctx.len()..], &t.generated[..]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn traces_are_consistent(eps in 0.0f64..=1.0, horizon in 1usize..30, seed in 0u64..1000) {
            let b = bundle();
            let ctx = context(seed, 6);
            let t = generate_nara(&b, &ctx, &GenerationConfig::new(eps, horizon, seed).unwrap()).unwrap();
            prop_assert_eq!(t.len(), horizon);
            prop_assert_eq!(t.accepted_total + t.resampled_total, horizon);
            prop_assert_eq!(t.sequential_rounds, t.draft_passes + t.resampled_total);
            prop_assert!(t.sequential_rounds >= horizon.div_ceil(b.chunk_len()));
            prop_assert!(t.sequential_rounds <= horizon);
            audit(&b, &ctx, &t);
        }

        #[test]
        fn more_work_at_higher_threshold(
            logits in proptest::collection::vec(-4.0f64..4.0, 4),
            e1 in 0.0f64..=1.0,
            e2 in 0.0f64..=1.0,
            seed in 0u64..100,
        ) {
            // zero output weights make the scores fixed sigmoid(bias) for every window
            let mut b = bundle();
            b.confidence.output.weight.fill(0.0);
            b.confidence.output.bias.data_mut().copy_from_slice(&logits);
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            let ctx = context(seed, 6);
            let a = generate_nara(&b, &ctx, &GenerationConfig::new(lo, 23, seed).unwrap()).unwrap();
            let c = generate_nara(&b, &ctx, &GenerationConfig::new(hi, 23, seed).unwrap()).unwrap();
            prop_assert!(a.sequential_rounds <= c.sequential_rounds);
            prop_assert!(a.accepted_total >= c.accepted_total);
        }
    }
}
