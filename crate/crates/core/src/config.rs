//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown and repeated
//! keys are errors. Every key has a default, listed in [`KEYS`].

use crate::bundle::{ModelBundle, ModelShape};
use crate::confidence::{CalibrationMode, ConfTrainingConfig, ThresholdCalibration};
use crate::data::{make_sinusoids, SinusoidDataset, SinusoidParams};
use crate::error::{NaraError, Result};
use crate::rng::{derive_seed, seeded};
use crate::trainer::TrainingConfig;
use std::path::Path;

/// Environment variable that overrides `seed`.
pub const SEED_ENV: &str = "NARA_SEED";

/// `(key, default, description)` for every accepted key.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "0", "master seed for data, initialization, training and generation"),
    ("o", "200", "observed window length"),
    ("M", "20", "chunk size"),
    ("B", "20", "maximum training chunk length"),
    ("H", "100", "generation horizon"),
    ("hidden", "51", "LSTM hidden size"),
    ("layers", "2", "LSTM layers"),
    ("lr", "0.001", "Adam learning rate for the AR model"),
    ("prior_lr", "0.001", "Adam learning rate for the prior predictor"),
    ("epochs", "30", "joint training epochs"),
    ("batch", "8", "sequences per joint training batch"),
    ("passes", "3", "training positions drawn per sequence per epoch"),
    ("drafts", "1", "rollouts per training position"),
    ("kappa", "2.5", "running-mean calibration factor"),
    ("calibration", "quantile", "threshold calibration: quantile or running_mean"),
    ("conf.level", "0.5", "quantile level defining the confidence labels"),
    ("conf.hidden", "64", "confidence predictor hidden width"),
    ("conf.epochs", "30", "confidence predictor epochs"),
    ("conf.train_windows", "1024", "confidence training windows"),
    ("conf.val_windows", "256", "confidence validation windows"),
    ("conf.batch", "32", "confidence predictor batch size"),
    ("conf.lr", "0.001", "confidence predictor learning rate"),
    ("dataset.amp_min", "0.5", "smallest sinusoid amplitude"),
    ("dataset.amp_max", "1.5", "largest sinusoid amplitude"),
    ("dataset.freq_min", "0.01", "smallest frequency, cycles per step"),
    ("dataset.freq_max", "0.05", "largest frequency, cycles per step"),
    ("dataset.noise", "0.02", "additive Gaussian noise standard deviation"),
    ("dataset.length", "400", "samples per sequence"),
    ("dataset.count", "160", "number of sequences"),
    ("dataset.val_fraction", "0.2", "fraction of sequences held out for validation"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub horizon: usize,
    pub shape: ModelShape,
    pub training: TrainingConfig,
    pub kappa: f64,
    pub calibration: CalibrationMode,
    pub conf_level: f64,
    pub dataset: SinusoidParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut cfg = Self {
            seed: 0,
            horizon: 0,
            shape: ModelShape::default(),
            training: TrainingConfig::default(),
            kappa: 0.0,
            calibration: CalibrationMode::Quantile,
            conf_level: 0.0,
            dataset: SinusoidParams::default(),
        };
        for (k, v, _) in KEYS {
            cfg.set(k, v).expect("defaults parse");
        }
        cfg
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| NaraError::Config(format!("bad value for {key}: {value:?}")))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value;
        match key {
            "seed" => self.seed = parse(key, v)?,
            "o" => self.shape.context_len = parse(key, v)?,
            "M" => self.shape.chunk_len = parse(key, v)?,
            "B" => self.training.max_chunk = parse(key, v)?,
            "H" => self.horizon = parse(key, v)?,
            "hidden" => self.shape.hidden = parse(key, v)?,
            "layers" => self.shape.layers = parse(key, v)?,
            "lr" => self.training.lr = parse(key, v)?,
            "prior_lr" => self.training.prior_lr = parse(key, v)?,
            "epochs" => self.training.epochs = parse(key, v)?,
            "batch" => self.training.batch = parse(key, v)?,
            "passes" => self.training.passes = parse(key, v)?,
            "drafts" => self.training.drafts = parse(key, v)?,
            "kappa" => self.kappa = parse(key, v)?,
            "calibration" => {
                self.calibration = CalibrationMode::parse(v).map_err(|e| NaraError::Config(e.to_string()))?
            }
            "conf.level" => self.conf_level = parse(key, v)?,
            "conf.hidden" => self.shape.conf_hidden = parse(key, v)?,
            "conf.epochs" => self.training.confidence.epochs = parse(key, v)?,
            "conf.train_windows" => self.training.confidence.train_windows = parse(key, v)?,
            "conf.val_windows" => self.training.confidence.val_windows = parse(key, v)?,
            "conf.batch" => self.training.confidence.batch = parse(key, v)?,
            "conf.lr" => self.training.confidence.lr = parse(key, v)?,
            "dataset.amp_min" => self.dataset.amp_min = parse(key, v)?,
            "dataset.amp_max" => self.dataset.amp_max = parse(key, v)?,
            "dataset.freq_min" => self.dataset.freq_min = parse(key, v)?,
            "dataset.freq_max" => self.dataset.freq_max = parse(key, v)?,
            "dataset.noise" => self.dataset.noise = parse(key, v)?,
            "dataset.length" => self.dataset.length = parse(key, v)?,
            "dataset.count" => self.dataset.count = parse(key, v)?,
            "dataset.val_fraction" => self.dataset.val_fraction = parse(key, v)?,
            _ => return Err(NaraError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Current values in [`KEYS`] order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let t = &self.training;
        let c = &t.confidence;
        let d = &self.dataset;
        let vals = [
            self.seed.to_string(),
            self.shape.context_len.to_string(),
            self.shape.chunk_len.to_string(),
            t.max_chunk.to_string(),
            self.horizon.to_string(),
            self.shape.hidden.to_string(),
            self.shape.layers.to_string(),
            t.lr.to_string(),
            t.prior_lr.to_string(),
            t.epochs.to_string(),
            t.batch.to_string(),
            t.passes.to_string(),
            t.drafts.to_string(),
            self.kappa.to_string(),
            self.calibration.as_str().to_string(),
            self.conf_level.to_string(),
            self.shape.conf_hidden.to_string(),
            c.epochs.to_string(),
            c.train_windows.to_string(),
            c.val_windows.to_string(),
            c.batch.to_string(),
            c.lr.to_string(),
            d.amp_min.to_string(),
            d.amp_max.to_string(),
            d.freq_min.to_string(),
            d.freq_max.to_string(),
            d.noise.to_string(),
            d.length.to_string(),
            d.count.to_string(),
            d.val_fraction.to_string(),
        ];
        KEYS.iter().zip(vals).map(|((k, _, _), v)| (k.to_string(), v)).collect()
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| NaraError::Config(format!("line {}: expected key = value", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !seen.insert(k.to_string()) {
                return Err(NaraError::Config(format!("line {}: duplicate key {k:?}", n + 1)));
            }
            cfg.set(k, v).map_err(|e| match e {
                NaraError::Config(m) => NaraError::Config(format!("line {}: {m}", n + 1)),
                other => other,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => NaraError::Config(format!("config not found: {}", path.display())),
            _ => NaraError::Config(format!("cannot read {}: {e}", path.display())),
        })?;
        Self::parse_text(&text)
    }

    /// Applies a `NARA_SEED` value, if present.
    pub fn override_seed(&mut self, env_value: Option<&str>) -> Result<()> {
        if let Some(v) = env_value {
            self.seed = parse(SEED_ENV, v.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: NaraError| NaraError::Config(e.to_string());
        self.shape.validate().map_err(cfg_err)?;
        self.dataset.validate().map_err(cfg_err)?;
        let mut t = self.training.clone();
        t.seed = self.seed;
        t.validate().map_err(cfg_err)?;
        self.calibration_state().map_err(cfg_err)?;
        if self.horizon == 0 {
            return Err(NaraError::Config("H must be at least 1".into()));
        }
        if self.dataset.length <= self.shape.context_len {
            return Err(NaraError::Config(format!(
                "dataset.length {} must exceed o = {}",
                self.dataset.length, self.shape.context_len
            )));
        }
        let c = &self.training.confidence;
        if c.batch == 0 || !(c.lr > 0.0) {
            return Err(NaraError::Config("conf.batch and conf.lr must be positive".into()));
        }
        Ok(())
    }

    pub fn training_config(&self) -> TrainingConfig {
        TrainingConfig {
            seed: self.seed,
            ..self.training.clone()
        }
    }

    pub fn confidence_config(&self) -> ConfTrainingConfig {
        self.training.confidence.clone()
    }

    pub fn calibration_state(&self) -> Result<ThresholdCalibration> {
        ThresholdCalibration::new(self.calibration, self.kappa, self.conf_level)
    }

    pub fn dataset(&self) -> Result<SinusoidDataset> {
        make_sinusoids(&self.dataset, self.seed)
    }

    /// Freshly initialized bundle carrying this configuration's calibration
    /// settings and echo.
    pub fn init_bundle(&self) -> Result<ModelBundle> {
        // the last derived stream; sequence seeds use the low indices
        let mut rng = seeded(derive_seed(self.seed, u64::MAX));
        let mut b = ModelBundle::init(&self.shape, &mut rng)?;
        b.calibration = self.calibration_state()?;
        b.config_echo = self.entries();
        Ok(b)
    }
}
