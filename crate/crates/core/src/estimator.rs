//! The interface shared by every time delay estimator.

use serde::{Deserialize, Serialize};

use crate::dsp::AudioClip;
use crate::error::{Error, Result};

/// Output of an estimator for one microphone pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdoaEstimate {
    /// Positive when the signal reaches the first clip later.
    pub lag_samples: i64,
    pub tdoa_s: f64,
    pub peak_value: f64,
    /// Normalised peak (GCC) or softmax maximum (learned model), in [0, 1].
    pub confidence: f64,
}

impl TdoaEstimate {
    pub fn from_lag(lag_samples: i64, sample_rate_hz: u32, peak_value: f64, confidence: f64) -> Self {
        Self {
            lag_samples,
            tdoa_s: lag_samples as f64 / sample_rate_hz as f64,
            peak_value,
            confidence,
        }
    }
}

/// A pair of recordings plus whatever side information the caller has.
#[derive(Debug, Clone, Copy)]
pub struct PairInput<'a> {
    pub x_i: &'a AudioClip,
    pub x_j: &'a AudioClip,
    /// Ground truth, available in simulation harnesses only.
    pub truth_s: Option<f64>,
    /// Microphone separation when the array geometry is known.
    pub mic_distance_m: Option<f64>,
    pub speed_of_sound: f64,
}

impl<'a> PairInput<'a> {
    pub fn new(x_i: &'a AudioClip, x_j: &'a AudioClip) -> Self {
        Self {
            x_i,
            x_j,
            truth_s: None,
            mic_distance_m: None,
            speed_of_sound: crate::acoustics::DEFAULT_SPEED_OF_SOUND,
        }
    }
}

pub trait TdoaEstimator: Send + Sync {
    /// Stable identifier used in reports.
    fn id(&self) -> String;

    fn estimate(&self, pair: &PairInput<'_>) -> Result<TdoaEstimate>;
}

/// Returns the ground truth rounded to the nearest sample. Used to check
/// evaluation harnesses.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleEstimator;

impl TdoaEstimator for OracleEstimator {
    fn id(&self) -> String {
        "oracle".into()
    }

    fn estimate(&self, pair: &PairInput<'_>) -> Result<TdoaEstimate> {
        let truth = pair
            .truth_s
            .ok_or_else(|| Error::Estimator("oracle estimator needs ground truth".into()))?;
        let fs = pair.x_i.sample_rate_hz;
        let lag = (truth * fs as f64).round() as i64;
        Ok(TdoaEstimate::from_lag(lag, fs, 1.0, 1.0))
    }
}
