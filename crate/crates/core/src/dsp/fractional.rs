use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const DEFAULT_TAPS: usize = 81;

/// Hann-windowed sinc interpolator of fixed odd length.
///
/// The kernel is centred on tap `(taps - 1) / 2`; a fractional delay `d`
/// shifts both the sinc and the window so that the kernel peaks at
/// `center + d`.
#[derive(Debug, Clone)]
pub struct FractionalDelay {
    taps: usize,
    // cos(a n), sin(a n) for n = -center..=center, a = 2 pi / (taps + 1)
    cos_table: Vec<f64>,
    sin_table: Vec<f64>,
}

impl FractionalDelay {
    pub fn new(taps: usize) -> Result<Self> {
        if taps.is_multiple_of(2) || taps < 11 {
            return Err(Error::invalid(format!(
                "fractional delay needs an odd tap count >= 11, got {taps}"
            )));
        }
        let a = 2.0 * PI / (taps + 1) as f64;
        let center = (taps - 1) / 2;
        let offsets = (0..taps).map(|m| m as f64 - center as f64);
        let cos_table = offsets.clone().map(|n| (a * n).cos()).collect();
        let sin_table = offsets.map(|n| (a * n).sin()).collect();
        Ok(Self {
            taps,
            cos_table,
            sin_table,
        })
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    pub fn center(&self) -> usize {
        (self.taps - 1) / 2
    }

    /// Writes the kernel for fractional delay `delay` (|delay| < 1) into
    /// `out`, which must have `taps` elements.
    pub fn fill(&self, delay: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.taps);
        let center = self.center() as i64;
        let a = 2.0 * PI / (self.taps + 1) as f64;
        let (sin_pd, cos_ad, sin_ad) = ((PI * delay).sin(), (a * delay).cos(), (a * delay).sin());
        for (m, o) in out.iter_mut().enumerate() {
            let n = m as i64 - center;
            let t = n as f64 - delay;
            let sinc = if t == 0.0 {
                1.0
            } else {
                // sin(pi (n - d)) = -(-1)^n sin(pi d)
                let sign = if n % 2 == 0 { -1.0 } else { 1.0 };
                sign * sin_pd / (PI * t)
            };
            let cos_at = self.cos_table[m] * cos_ad + self.sin_table[m] * sin_ad;
            *o = sinc * 0.5 * (1.0 + cos_at);
        }
    }

    pub fn kernel(&self, delay: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.taps];
        self.fill(delay, &mut out);
        out
    }
}

/// Windowed-sinc kernel delaying by `delay_samples` (|delay| < 1) relative
/// to the centre tap.
pub fn fractional_delay_kernel(delay_samples: f64, taps: usize) -> Result<Vec<f64>> {
    if !delay_samples.is_finite() || delay_samples.abs() >= 1.0 {
        return Err(Error::invalid(format!(
            "fractional delay must satisfy |d| < 1, got {delay_samples}"
        )));
    }
    Ok(FractionalDelay::new(taps)?.kernel(delay_samples))
}
