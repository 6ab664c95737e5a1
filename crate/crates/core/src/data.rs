//! Synthetic sinusoid datasets and standardisation.

use crate::ar::Sequence;
use crate::error::{NaraError, Result};
use crate::prior::EvalWindow;
use crate::rng::{derive_seed, seeded};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

/// Generator ranges for `x_t = A·sin(2πf·t + φ) + η_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SinusoidParams {
    pub amp_min: f64,
    pub amp_max: f64,
    /// cycles per step
    pub freq_min: f64,
    pub freq_max: f64,
    /// standard deviation of the additive Gaussian noise
    pub noise: f64,
    pub length: usize,
    pub count: usize,
    pub val_fraction: f64,
}

impl Default for SinusoidParams {
    fn default() -> Self {
        Self {
            amp_min: 0.5,
            amp_max: 1.5,
            freq_min: 0.01,
            freq_max: 0.05,
            noise: 0.02,
            length: 400,
            count: 160,
            val_fraction: 0.2,
        }
    }
}

impl SinusoidParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NaraError::Invalid(format!("sinusoid params: {m}")));
        if !(self.amp_min.is_finite() && self.amp_max.is_finite() && self.amp_min <= self.amp_max) {
            return bad("amplitude range");
        }
        if !(self.freq_min.is_finite() && self.freq_max.is_finite() && 0.0 <= self.freq_min && self.freq_min <= self.freq_max) {
            return bad("frequency range");
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return bad("noise");
        }
        if self.length < 2 {
            return bad("length must be at least 2");
        }
        if self.count < 2 {
            return bad("count must be at least 2");
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad("validation fraction must be in (0, 1)");
        }
        Ok(())
    }

    fn split_sizes(&self) -> (usize, usize) {
        let val = ((self.count as f64 * self.val_fraction).round() as usize).clamp(1, self.count - 1);
        (self.count - val, val)
    }
}

/// Noise-free samples `A·sin(2πf·t + φ)` for `t = 0 … len−1`.
pub fn sinusoid_samples(amplitude: f64, freq: f64, phase: f64, len: usize) -> Vec<f64> {
    (0..len)
        .map(|t| amplitude * (2.0 * PI * freq * t as f64 + phase).sin())
        .collect()
}

/// Affine map to zero mean, unit variance using training-set statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardizer {
    pub mean: f64,
    pub std: f64,
}

impl Default for Standardizer {
    fn default() -> Self {
        Self { mean: 0.0, std: 1.0 }
    }
}

impl Standardizer {
    pub fn fit<'a>(seqs: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let (mut n, mut sum, mut sq) = (0usize, 0.0, 0.0);
        for s in seqs {
            for &v in s {
                n += 1;
                sum += v;
                sq += v * v;
            }
        }
        if n == 0 {
            return Err(NaraError::Empty("standardizer data"));
        }
        let mean = sum / n as f64;
        let var = (sq / n as f64 - mean * mean).max(0.0);
        let std = if var > 0.0 { var.sqrt() } else { 1.0 };
        Ok(Self { mean, std })
    }

    pub fn forward(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn inverse(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }

    pub fn forward_all(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.forward(x)).collect()
    }

    pub fn inverse_all(&self, zs: &[f64]) -> Vec<f64> {
        zs.iter().map(|&z| self.inverse(z)).collect()
    }
}

/// Standardised train/validation split plus the statistics used.
#[derive(Debug, Clone, PartialEq)]
pub struct SinusoidDataset {
    pub train: Vec<Sequence>,
    pub validation: Vec<Sequence>,
    pub standardizer: Standardizer,
    pub params: SinusoidParams,
}

fn draw_sequence(p: &SinusoidParams, seed: u64) -> Vec<f64> {
    let mut rng = seeded(seed);
    let amp = p.amp_min + (p.amp_max - p.amp_min) * rng.random::<f64>();
    let freq = p.freq_min + (p.freq_max - p.freq_min) * rng.random::<f64>();
    let phase = 2.0 * PI * rng.random::<f64>();
    let mut x = sinusoid_samples(amp, freq, phase, p.length);
    if p.noise > 0.0 {
        let noise = Normal::new(0.0, p.noise).expect("validated noise");
        for v in &mut x {
            *v += noise.sample(&mut rng);
        }
    }
    x
}

/// Sequence `i` is drawn from its own derived seed; the first sequences form
/// the training split and the rest the validation split.
pub fn make_sinusoids(params: &SinusoidParams, seed: u64) -> Result<SinusoidDataset> {
    params.validate()?;
    let raw: Vec<Vec<f64>> = (0..params.count)
        .map(|i| draw_sequence(params, derive_seed(seed, i as u64)))
        .collect();
    let (n_train, _) = params.split_sizes();
    let standardizer = Standardizer::fit(raw[..n_train].iter().map(Vec::as_slice))?;
    let mut seqs = raw
        .iter()
        .map(|s| Sequence::new(standardizer.forward_all(s)))
        .collect::<Result<Vec<_>>>()?;
    let validation = seqs.split_off(n_train);
    Ok(SinusoidDataset {
        train: seqs,
        validation,
        standardizer,
        params: params.clone(),
    })
}

impl SinusoidDataset {
    /// Windows at positions `o, o+M, …` of each validation sequence with a
    /// full `M`-sample future.
    pub fn eval_windows(&self, o: usize, m: usize) -> Vec<EvalWindow> {
        let mut out = Vec::new();
        for seq in &self.validation {
            let x = seq.samples();
            let mut pos = o;
            while pos + m <= x.len() {
                out.push(EvalWindow {
                    window: x[pos - o..pos].to_vec(),
                    future: x[pos..pos + m].to_vec(),
                });
                pos += m;
            }
        }
        out
    }
}
