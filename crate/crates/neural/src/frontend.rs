use serde::{Deserialize, Serialize};
use tdekit_core::dsp::{rfft_bins, AudioClip};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Optional per-clip spectral normalisation applied before the network.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureNorm {
    /// Raw spectra.
    #[default]
    None,
    /// Each bin scaled to unit magnitude (phase only).
    Phat,
    /// Each clip's kept bins scaled to unit mean power.
    ClipRms,
}

/// Number of bins `k` with `k * fs / n < f_max`.
pub fn bin_count(n: usize, sample_rate_hz: u32, f_max_hz: f64) -> Result<usize> {
    let nyquist = sample_rate_hz as f64 / 2.0;
    if !(f_max_hz > 0.0 && f_max_hz < nyquist) {
        return Err(Error::invalid(format!(
            "f_max {f_max_hz} Hz must lie in (0, {nyquist}) Hz"
        )));
    }
    if n == 0 {
        return Err(Error::invalid("clip length must be positive"));
    }
    // smallest k with k * fs >= f_max * n
    let bound = f_max_hz * n as f64 / sample_rate_hz as f64;
    let mut k = bound.ceil() as usize;
    while k > 0 && (k - 1) as f64 * sample_rate_hz as f64 >= f_max_hz * n as f64 {
        k -= 1;
    }
    while (k as f64) * (sample_rate_hz as f64) < f_max_hz * n as f64 {
        k += 1;
    }
    Ok(k.min(n / 2 + 1))
}

/// Real and imaginary parts of the lowest `bins` bins of one clip, as two
/// concatenated rows of length `bins`.
pub fn clip_spectrum<T: Scalar>(clip: &AudioClip, bins: usize, norm: FeatureNorm) -> Vec<T> {
    let spec = rfft_bins(&clip.samples);
    let kept = &spec[..bins.min(spec.len())];
    let scale: Vec<f64> = match norm {
        FeatureNorm::None => vec![1.0; kept.len()],
        FeatureNorm::Phat => kept
            .iter()
            .map(|c| {
                let m = c.norm();
                if m > 0.0 {
                    1.0 / m
                } else {
                    0.0
                }
            })
            .collect(),
        FeatureNorm::ClipRms => {
            let p = kept.iter().map(|c| c.norm_sqr()).sum::<f64>() / kept.len() as f64;
            let s = if p > 0.0 { 1.0 / p.sqrt() } else { 0.0 };
            vec![s; kept.len()]
        }
    };
    let mut out = Vec::with_capacity(2 * bins);
    out.extend(kept.iter().zip(&scale).map(|(c, s)| T::of(c.re * s)));
    out.extend(kept.iter().zip(&scale).map(|(c, s)| T::of(c.im * s)));
    out
}

/// Network input for one pair: `[4, bins]` with channels
/// `[Re X_i, Im X_i, Re X_j, Im X_j]` for bins below `f_max_hz`.
pub fn frontend<T: Scalar>(x_i: &AudioClip, x_j: &AudioClip, f_max_hz: f64, norm: FeatureNorm) -> Result<Tensor<T>> {
    if x_i.len() != x_j.len() {
        return Err(Error::invalid(format!(
            "clip lengths differ: {} vs {}",
            x_i.len(),
            x_j.len()
        )));
    }
    if x_i.sample_rate_hz != x_j.sample_rate_hz {
        return Err(Error::invalid("clip sample rates differ"));
    }
    let bins = bin_count(x_i.len(), x_i.sample_rate_hz, f_max_hz)?;
    let mut data = clip_spectrum::<T>(x_i, bins, norm);
    data.extend(clip_spectrum::<T>(x_j, bins, norm));
    Tensor::new(vec![4, bins], data)
}
