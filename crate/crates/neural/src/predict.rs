use std::path::Path;

use tdekit_core::dsp::AudioClip;
use tdekit_core::{PairInput, TdoaEstimate, TdoaEstimator};

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::frontend::frontend;
use crate::model::Model;
use crate::train::argmax;

/// Argmax class of the network, mapped to a lag; confidence is the softmax
/// maximum.
pub fn predict_tdoa(model: &Model<f32>, x_i: &AudioClip, x_j: &AudioClip) -> Result<TdoaEstimate> {
    let cfg = &model.config;
    for x in [x_i, x_j] {
        if x.len() != cfg.input_len || x.sample_rate_hz != cfg.sample_rate_hz {
            return Err(Error::invalid(format!(
                "model expects {} samples at {} Hz, got {} at {} Hz",
                cfg.input_len,
                cfg.sample_rate_hz,
                x.len(),
                x.sample_rate_hz
            )));
        }
    }
    let features = frontend::<f32>(x_i, x_j, cfg.f_max_hz, cfg.feature_norm)?;
    let proba = model.predict_proba(features.into_data(), 1)?;
    let class = argmax(&proba);
    let lag = class as i64 - (cfg.num_classes / 2) as i64;
    let p = proba[class] as f64;
    Ok(TdoaEstimate::from_lag(lag, cfg.sample_rate_hz, p, p))
}

/// A trained network behind the common estimator interface.
#[derive(Debug, Clone)]
pub struct NeuralEstimator {
    pub model: Model<f32>,
    id: String,
}

impl NeuralEstimator {
    pub fn new(model: Model<f32>, id: impl Into<String>) -> Self {
        Self { model, id: id.into() }
    }

    pub fn from_checkpoint(path: &Path) -> Result<Self> {
        let ck = Checkpoint::load(path)?;
        let id = format!(
            "neural:{}",
            ck.metadata.train_config_hash.get(..12).unwrap_or("untrained")
        );
        Ok(Self::new(ck.model, id))
    }
}

impl TdoaEstimator for NeuralEstimator {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn estimate(&self, pair: &PairInput<'_>) -> tdekit_core::Result<TdoaEstimate> {
        predict_tdoa(&self.model, pair.x_i, pair.x_j).map_err(|e| tdekit_core::Error::Estimator(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Dtype, ModelConfig};

    fn tiny_f32() -> Model<f32> {
        let mut cfg = ModelConfig::tiny();
        cfg.parameter_dtype = Dtype::F32;
        Model::init(&cfg, 1).unwrap()
    }

    #[test]
    fn forced_argmax_maps_to_lag() {
        let mut model = tiny_f32();
        let head_b = model.index_of("head.bias").unwrap();
        let k = model.config.num_classes;
        for target in [0, 3, k / 2, k - 1] {
            let bias = model.params[head_b].data_mut();
            bias.iter_mut().for_each(|b| *b = 0.0);
            bias[target] = 1e4;
            let clip = AudioClip::new((0..64).map(|n| (n as f64 * 0.3).sin()).collect(), 16_000).unwrap();
            let est = predict_tdoa(&model, &clip, &clip).unwrap();
            assert_eq!(est.lag_samples, target as i64 - (k / 2) as i64);
            assert!((est.tdoa_s - est.lag_samples as f64 / 16_000.0).abs() < 1e-15);
            assert!(est.confidence > 0.999 && est.confidence <= 1.0);
        }
    }

    #[test]
    fn wrong_length_rejected() {
        let model = tiny_f32();
        let clip = AudioClip::new(vec![0.1; 63], 16_000).unwrap();
        assert!(predict_tdoa(&model, &clip, &clip).is_err());
        let est = NeuralEstimator::new(model, "x");
        assert!(est.estimate(&PairInput::new(&clip, &clip)).is_err());
    }
}
