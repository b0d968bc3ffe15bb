use crate::dsp::AudioClip;
use crate::error::{Error, Result};
use crate::estimator::{PairInput, TdoaEstimate, TdoaEstimator};

/// One window of a sliding-window run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowEstimate {
    pub start_sample: usize,
    /// Window centre in seconds from the clip start.
    pub t_center_s: f64,
    pub estimate: TdoaEstimate,
}

/// `round(window * (1 - overlap))`, at least 1.
pub fn window_hop(window: usize, overlap: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::invalid(format!("overlap must lie in [0, 1), got {overlap}")));
    }
    if window == 0 {
        return Err(Error::invalid("window must be positive"));
    }
    Ok(((window as f64 * (1.0 - overlap)).round() as usize).max(1))
}

/// Number of windows fully inside a clip of `len` samples.
pub fn window_count(len: usize, window: usize, hop: usize) -> usize {
    if len < window || hop == 0 {
        0
    } else {
        (len - window) / hop + 1
    }
}

/// Estimates TDOA on windows at offsets `0, hop, 2 hop, ...` that fit
/// entirely in the clips. A failing window is reported as an error.
pub fn sliding_window_infer(
    estimator: &dyn TdoaEstimator,
    clip_i: &AudioClip,
    clip_j: &AudioClip,
    window: usize,
    overlap: f64,
) -> Result<Vec<WindowEstimate>> {
    if clip_i.len() != clip_j.len() || clip_i.sample_rate_hz != clip_j.sample_rate_hz {
        return Err(Error::invalid("clips must share length and sample rate"));
    }
    let hop = window_hop(window, overlap)?;
    if clip_i.len() < window {
        return Err(Error::invalid(format!(
            "clip of {} samples is shorter than the {window}-sample window",
            clip_i.len()
        )));
    }
    let fs = clip_i.sample_rate_hz as f64;
    (0..window_count(clip_i.len(), window, hop))
        .map(|w| {
            let start = w * hop;
            let a = clip_i.slice(start, window)?;
            let b = clip_j.slice(start, window)?;
            let estimate = estimator.estimate(&PairInput::new(&a, &b))?;
            Ok(WindowEstimate {
                start_sample: start,
                t_center_s: (start as f64 + window as f64 / 2.0) / fs,
                estimate,
            })
        })
        .collect()
}
