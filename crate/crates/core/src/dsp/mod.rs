//! Signal-processing primitives. Everything here works in double precision
//! and is a pure function of its inputs.

mod convolve;
mod fft;
mod fractional;
mod noise;
mod resample;
pub mod wav;

pub use convolve::{convolve, convolve_direct, ConvMode};
pub use fft::{fft_plan, irfft, real_pair_spectra, rfft, rfft_bins, FftPlan, Spectrum};
pub use fractional::{fractional_delay_kernel, FractionalDelay, DEFAULT_TAPS};
pub use noise::add_noise_at_snr;
pub use resample::resample;
pub use wav::{read_wav, write_wav, WavFormat};

use crate::error::{Error, Result};

/// A mono signal together with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl AudioClip {
    /// Builds a clip, rejecting a zero sample rate or non-finite samples.
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Mean squared amplitude.
    pub fn power(&self) -> f64 {
        mean_square(&self.samples)
    }

    /// Copy of `len` samples starting at `start`.
    pub fn slice(&self, start: usize, len: usize) -> Result<AudioClip> {
        if start + len > self.samples.len() {
            return Err(Error::invalid(format!(
                "slice {start}..{} exceeds clip length {}",
                start + len,
                self.samples.len()
            )));
        }
        Ok(AudioClip {
            samples: self.samples[start..start + len].to_vec(),
            sample_rate_hz: self.sample_rate_hz,
        })
    }

    pub(crate) fn require_non_empty(&self, what: &str) -> Result<()> {
        if self.samples.is_empty() {
            Err(Error::invalid(format!("{what}: empty clip")))
        } else {
            Ok(())
        }
    }
}

pub fn mean_square(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

pub(crate) fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}
