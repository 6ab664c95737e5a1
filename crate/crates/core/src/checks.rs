//! Self-contained verification suites: analytic gradients against central
//! differences, reported as one [`CheckResult`] per operation.

use crate::ar::{ArModel, Sequence};
use crate::confidence::{ConfExample, ConfidenceNet};
use crate::error::Result;
use crate::nn::{finite_difference_gradient, max_relative_error, DenseLayer, GaussianHead, LstmCell, LstmState, FD_STEP};
use crate::prior::PriorPredictor;
use crate::rng::seeded;
use crate::tensor::Parameters;
use crate::trainer::{draw_rollouts, joint_loss_given, joint_loss_with_grad, TrainingSample};
use rand::Rng;
use std::fmt;

/// Largest residual seen for one named check against its tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub tolerance: f64,
    pub max_residual: f64,
    pub count: usize,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            tolerance,
            max_residual: 0.0,
            count: 0,
        }
    }

    pub fn observe(&mut self, residual: f64) {
        // NaN must fail the check, so once seen it sticks
        if !self.max_residual.is_nan() && (residual.is_nan() || residual > self.max_residual) {
            self.max_residual = residual;
        }
        self.count += 1;
    }

    pub fn passed(&self) -> bool {
        self.count > 0 && self.max_residual < self.tolerance
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: max residual {:.3e} (tolerance {:.0e}, {} cases)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.max_residual,
            self.tolerance,
            self.count
        )
    }
}

/// The check with the largest residual relative to its tolerance.
pub fn worst(results: &[CheckResult]) -> Option<&CheckResult> {
    results.iter().max_by(|a, b| {
        let ra = a.max_residual / a.tolerance;
        let rb = b.max_residual / b.tolerance;
        ra.partial_cmp(&rb).unwrap_or(if ra.is_nan() {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Less
        })
    })
}

pub const GRAD_TOLERANCE: f64 = 1e-4;
/// Floor of the relative-error denominator.
pub const GRAD_FLOOR: f64 = 1e-4;

pub const OP_DENSE: &str = "dense";
pub const OP_LSTM: &str = "lstm_step";
pub const OP_GAUSSIAN: &str = "gaussian_nll";
pub const OP_AR: &str = "ar_sequence_nll";
pub const OP_CONFIDENCE: &str = "confidence_bce";
pub const OP_JOINT: &str = "joint_loss";
pub const GRAD_OPS: [&str; 6] = [OP_DENSE, OP_LSTM, OP_GAUSSIAN, OP_AR, OP_CONFIDENCE, OP_JOINT];

/// Analytic and numeric gradients for one op on one seed.
struct GradPair {
    analytic: Vec<f64>,
    numeric: Vec<f64>,
}

fn rand_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn dense_case(seed: u64) -> Result<GradPair> {
    let mut rng = seeded(seed);
    let layer = DenseLayer::init(4, 3, &mut rng);
    let x = rand_vec(4, &mut rng);
    let target = rand_vec(3, &mut rng);
    let loss = |l: &DenseLayer, x: &[f64]| -> Result<f64> {
        Ok(l.forward(x)?.iter().zip(&target).map(|(y, t)| 0.5 * (y - t).powi(2)).sum())
    };
    let y = layer.forward(&x)?;
    let dy: Vec<f64> = y.iter().zip(&target).map(|(y, t)| y - t).collect();
    let mut grads = layer.zeros_like();
    let dx = layer.backward(&x, &dy, &mut grads);
    let mut analytic = grads.flatten();
    analytic.extend(dx);
    let n = layer.num_params();
    let mut flat = layer.flatten();
    flat.extend_from_slice(&x);
    let numeric = finite_difference_gradient(
        |p| {
            let mut l = layer.clone();
            l.assign_flat(&p[..n]);
            loss(&l, &p[n..])
        },
        &flat,
        FD_STEP,
    )?;
    Ok(GradPair { analytic, numeric })
}

fn lstm_case(seed: u64) -> Result<GradPair> {
    let mut rng = seeded(seed);
    let (input, hidden, steps) = (2, 3, 4);
    let cell = LstmCell::init(input, hidden, &mut rng);
    let xs: Vec<Vec<f64>> = (0..steps).map(|_| rand_vec(input, &mut rng)).collect();
    let w_h = rand_vec(hidden, &mut rng);
    let w_c = rand_vec(hidden, &mut rng);
    // loss = Σ_t w_h·h_t + w_c·c_T
    let loss = |c: &LstmCell| -> Result<f64> {
        let mut s = LstmState::zeros(hidden);
        let mut l = 0.0;
        for x in &xs {
            s = c.step(&s, x)?;
            l += crate::tensor::dot(&w_h, &s.h);
        }
        Ok(l + crate::tensor::dot(&w_c, &s.c))
    };
    let mut s = LstmState::zeros(hidden);
    let mut caches = Vec::new();
    for x in &xs {
        let (n, cache) = cell.step_cached(&s, x)?;
        s = n;
        caches.push(cache);
    }
    let mut grads = cell.zeros_like();
    let mut dh = vec![0.0; hidden];
    let mut dc = w_c.clone();
    for cache in caches.iter().rev() {
        crate::tensor::axpy(1.0, &w_h, &mut dh);
        let (_, dh_prev, dc_prev) = cell.backward_step(cache, &dh, &dc, &mut grads);
        dh = dh_prev;
        dc = dc_prev;
    }
    let numeric = finite_difference_gradient(
        |p| {
            let mut c = cell.clone();
            c.assign_flat(p);
            loss(&c)
        },
        &cell.flatten(),
        FD_STEP,
    )?;
    Ok(GradPair {
        analytic: grads.flatten(),
        numeric,
    })
}

fn gaussian_case(seed: u64) -> Result<GradPair> {
    let mut rng = seeded(seed);
    let (mean, log_var, x) = (rng.random_range(-2.0..2.0), rng.random_range(-3.0..3.0), rng.random_range(-2.0..2.0));
    let (_, g) = GaussianHead::new(mean, log_var).nll_with_grad(x);
    let numeric = finite_difference_gradient(
        |p| Ok(-GaussianHead::new(p[0], p[1]).log_density(x)?),
        &[mean, log_var],
        FD_STEP,
    )?;
    Ok(GradPair {
        analytic: vec![g.d_mean, g.d_log_var],
        numeric,
    })
}

fn ar_case(seed: u64) -> Result<GradPair> {
    let mut rng = seeded(seed);
    let model = ArModel::init(3, 2, &mut rng)?;
    let x = Sequence::new(rand_vec(10, &mut rng))?;
    let (_, grads) = model.sequence_nll_with_grad(&x)?;
    let numeric = finite_difference_gradient(
        |p| {
            let mut m = model.clone();
            m.assign_flat(p);
            m.sequence_nll(&x)
        },
        &model.flatten(),
        FD_STEP,
    )?;
    Ok(GradPair {
        analytic: grads.flatten(),
        numeric,
    })
}

fn confidence_case(seed: u64) -> Result<GradPair> {
    let mut rng = seeded(seed);
    let net = ConfidenceNet::init(5, 3, 4, &mut rng);
    let ex = ConfExample {
        input: rand_vec(8, &mut rng),
        labels: (0..3).map(|_| f64::from(rng.random::<bool>() as u8)).collect(),
    };
    let mut grads = net.zeros_like();
    net.bce_with_grad(&ex, 1.0, &mut grads)?;
    let numeric = finite_difference_gradient(
        |p| {
            let mut n = net.clone();
            n.assign_flat(p);
            n.bce(&ex)
        },
        &net.flatten(),
        FD_STEP,
    )?;
    Ok(GradPair {
        analytic: grads.flatten(),
        numeric,
    })
}

/// Joint objective on two 10-step sequences with rollouts held fixed.
fn joint_case(seed: u64) -> Result<GradPair> {
    let mut rng = seeded(seed);
    let ar = ArModel::init(3, 2, &mut rng)?;
    let prior = PriorPredictor::init(4, 3, &mut rng);
    let seqs = vec![Sequence::new(rand_vec(10, &mut rng))?, Sequence::new(rand_vec(10, &mut rng))?];
    let batch: Vec<TrainingSample> = (0..2).map(|i| TrainingSample::draw(i, 10, 3, &mut rng)).collect();
    let rollouts = draw_rollouts(&ar, &seqs, &batch, 1, &mut rng)?;
    if batch.iter().all(|s| s.chunk == 0) {
        return Ok(GradPair {
            analytic: Vec::new(),
            numeric: Vec::new(),
        });
    }
    let (_, g_ar, g_prior) = joint_loss_with_grad(&ar, &prior, &seqs, &batch, &rollouts)?;
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
        FD_STEP,
    )?;
    let mut analytic = g_ar.flatten();
    analytic.extend(g_prior.flatten());
    Ok(GradPair { analytic, numeric })
}

/// Runs every gradient check over `seeds` seeds. `fault` names an op whose
/// analytic gradient is deliberately corrupted, to exercise the failure path.
pub fn run_grad_suite(seeds: u64, fault: Option<&str>) -> Result<Vec<CheckResult>> {
    let cases: [(&str, fn(u64) -> Result<GradPair>); 6] = [
        (OP_DENSE, dense_case),
        (OP_LSTM, lstm_case),
        (OP_GAUSSIAN, gaussian_case),
        (OP_AR, ar_case),
        (OP_CONFIDENCE, confidence_case),
        (OP_JOINT, joint_case),
    ];
    let mut out = Vec::with_capacity(cases.len());
    for (name, case) in cases {
        let mut result = CheckResult::new(name, GRAD_TOLERANCE);
        for seed in 0..seeds {
            let mut pair = case(1000 + seed)?;
            if pair.analytic.is_empty() {
                continue;
            }
            if fault == Some(name) {
                pair.analytic[0] = pair.analytic[0] * 1.5 + 0.1;
            }
            result.observe(max_relative_error(&pair.analytic, &pair.numeric, GRAD_FLOOR));
        }
        out.push(result);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_residual_fails() {
        let mut r = CheckResult::new("x", 1.0);
        r.observe(0.1);
        r.observe(f64::NAN);
        r.observe(0.2);
        assert!(!r.passed());
    }

    #[test]
    fn empty_check_fails() {
        assert!(!CheckResult::new("x", 1.0).passed());
    }

    #[test]
    fn display_names_status() {
        let mut r = CheckResult::new("dense", 1e-4);
        r.observe(2e-6);
        assert!(r.to_string().starts_with("PASS dense"));
    }

    #[test]
    fn grad_suite_passes() {
        let results = run_grad_suite(5, None).unwrap();
        assert_eq!(results.len(), GRAD_OPS.len());
        for r in &results {
            assert!(r.passed(), "{r}");
            assert_eq!(r.count, 5);
        }
    }

    #[test]
    fn injected_fault_is_named() {
        for op in GRAD_OPS {
            let results = run_grad_suite(1, Some(op)).unwrap();
            let failed: Vec<&str> = results.iter().filter(|r| !r.passed()).map(|r| r.name.as_str()).collect();
            assert_eq!(failed, vec![op]);
            assert_eq!(worst(&results).unwrap().name, op);
        }
    }
}
