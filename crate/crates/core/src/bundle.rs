//! The three parameter sets θ (AR model), W (prior predictor) and
//! V (confidence predictor), plus everything needed to use them.

use crate::ar::ArModel;
use crate::confidence::{CalibrationMode, ConfidenceNet, ThresholdCalibration, DEFAULT_CONF_HIDDEN, DEFAULT_KAPPA};
use crate::data::Standardizer;
use crate::error::{NaraError, Result};
use crate::prior::PriorPredictor;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelShape {
    /// observed window `o`
    pub context_len: usize,
    /// chunk size `M`
    pub chunk_len: usize,
    pub hidden: usize,
    pub layers: usize,
    pub conf_hidden: usize,
}

impl Default for ModelShape {
    fn default() -> Self {
        Self {
            context_len: 200,
            chunk_len: 20,
            hidden: 51,
            layers: 2,
            conf_hidden: DEFAULT_CONF_HIDDEN,
        }
    }
}

impl ModelShape {
    /// Small shape for fast tests.
    pub fn tiny() -> Self {
        Self {
            context_len: 8,
            chunk_len: 4,
            hidden: 4,
            layers: 2,
            conf_hidden: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.context_len == 0 || self.chunk_len == 0 || self.hidden == 0 || self.layers == 0 || self.conf_hidden == 0 {
            return Err(NaraError::Invalid(format!("all model dimensions must be positive: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrainedFlags {
    pub ar: bool,
    pub prior: bool,
    pub confidence: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub ar: ArModel,
    pub prior: PriorPredictor,
    pub confidence: ConfidenceNet,
    pub calibration: ThresholdCalibration,
    pub standardizer: Standardizer,
    pub trained: TrainedFlags,
    /// configuration the bundle was trained with, echoed into checkpoints
    pub config_echo: Vec<(String, String)>,
}

impl ModelBundle {
    pub fn init<R: Rng + ?Sized>(shape: &ModelShape, rng: &mut R) -> Result<Self> {
        shape.validate()?;
        let ar = ArModel::init(shape.hidden, shape.layers, rng)?;
        let prior = PriorPredictor::init(shape.context_len, shape.chunk_len, rng);
        let confidence = ConfidenceNet::init(shape.context_len, shape.chunk_len, shape.conf_hidden, rng);
        Ok(Self {
            ar,
            prior,
            confidence,
            calibration: ThresholdCalibration::new(CalibrationMode::Quantile, DEFAULT_KAPPA, 0.5)?,
            standardizer: Standardizer::default(),
            trained: TrainedFlags::default(),
            config_echo: Vec::new(),
        })
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape {
            context_len: self.prior.context_len(),
            chunk_len: self.prior.chunk_len(),
            hidden: self.ar.hidden_size(),
            layers: self.ar.num_layers(),
            conf_hidden: self.confidence.hidden.output_size(),
        }
    }

    pub fn context_len(&self) -> usize {
        self.prior.context_len()
    }

    pub fn chunk_len(&self) -> usize {
        self.prior.chunk_len()
    }

    /// Checks that θ, W and V agree on `o` and `M`.
    pub fn validate(&self) -> Result<()> {
        let (o, m) = (self.context_len(), self.chunk_len());
        if self.confidence.chunk_len() != m || self.confidence.input_len() != o + m {
            return Err(NaraError::Invalid(format!(
                "confidence net expects {} inputs / {} outputs, prior predictor has o={o}, M={m}",
                self.confidence.input_len(),
                self.confidence.chunk_len()
            )));
        }
        if self.ar.layers[0].input_size() != 1 || self.ar.head.output_size() != 2 {
            return Err(NaraError::Invalid("AR model must map scalars to a 2-output head".into()));
        }
        Ok(())
    }
}
