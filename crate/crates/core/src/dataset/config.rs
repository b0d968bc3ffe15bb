use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acoustics::{RenderSettings, DEFAULT_SPEED_OF_SOUND};

/// Everything that determines a generated dataset besides the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationConfig {
    pub rooms: usize,
    pub mics: usize,
    pub sample_rate_hz: u32,
    /// Recorded samples per clip (after the preroll is discarded).
    pub signal_len: usize,
    pub room_dim_range_m: [f64; 2],
    pub reflection_range: [f64; 2],
    /// Probability that a scenario uses a moving (Bezier) source.
    pub moving_probability: f64,
    /// Ablation toggle: when false every source is stationary.
    pub movement: bool,
    pub directional_mics: bool,
    pub directional_source: bool,
    pub max_speed_m_s: f64,
    /// Training SNR range in dB; ignored when `noise` is false.
    pub snr_range_db: [f64; 2],
    pub noise: bool,
    pub placement_margin_m: f64,
    pub speed_of_sound: f64,
    pub render: RenderSettings,
    pub num_classes: usize,
    pub max_placement_attempts: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            rooms: 200,
            mics: 20,
            sample_rate_hz: 16_000,
            signal_len: 10_000,
            room_dim_range_m: [1.0, 10.0],
            reflection_range: [0.05, 0.99],
            moving_probability: 0.5,
            movement: true,
            directional_mics: true,
            directional_source: true,
            max_speed_m_s: 5.0,
            snr_range_db: [0.0, 30.0],
            noise: true,
            placement_margin_m: 0.3,
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
            render: RenderSettings::default(),
            num_classes: 1000,
            max_placement_attempts: 1000,
        }
    }
}

impl GenerationConfig {
    /// 200 rooms x 20 microphones.
    pub fn desk() -> Self {
        Self::default()
    }

    /// 10 000 rooms x 50 microphones.
    pub fn paper() -> Self {
        Self {
            rooms: 10_000,
            mics: 50,
            ..Self::default()
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.signal_len as f64 / self.sample_rate_hz as f64
    }

    /// Source samples needed per scenario (preroll plus recording).
    pub fn source_len(&self) -> usize {
        self.signal_len + self.render.preroll
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        hex(&Sha256::digest(&json))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
