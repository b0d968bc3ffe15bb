//! Rational-ratio polyphase resampling with a Kaiser-windowed sinc
//! anti-aliasing filter.

use std::f64::consts::PI;

use super::{sinc, AudioClip};
use crate::error::{Error, Result};

// Transition band sits in [0.40, 0.50] x lower rate, so the cutoff (centre
// of the transition) is 0.45 x the lower sample rate.
const CUTOFF_FRACTION: f64 = 0.45;
const TRANSITION_FRACTION: f64 = 0.10;
const STOPBAND_DB: f64 = 70.0;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Symmetric low-pass prototype at the upsampled rate, normalised to unit
/// DC gain. Returned with odd length.
fn design_filter(fs_up: f64, cutoff_hz: f64, transition_hz: f64) -> Vec<f64> {
    let beta = 0.1102 * (STOPBAND_DB - 8.7);
    let dw = 2.0 * PI * transition_hz / fs_up;
    let mut len = ((STOPBAND_DB - 8.0) / (2.285 * dw)).ceil() as usize + 1;
    if len.is_multiple_of(2) {
        len += 1;
    }
    let center = (len / 2) as f64;
    let fc = cutoff_hz / fs_up;
    let i0b = bessel_i0(beta);
    let mut h: Vec<f64> = (0..len)
        .map(|n| {
            let t = n as f64 - center;
            let r = t / center;
            let w = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0b;
            2.0 * fc * sinc(2.0 * fc * t) * w
        })
        .collect();
    let sum: f64 = h.iter().sum();
    for v in &mut h {
        *v /= sum;
    }
    h
}

/// Resamples to `target_rate_hz`. The output keeps the clip duration to
/// within one sample. Samples beyond the clip edges are taken to repeat the
/// edge value, which keeps DC exact up to the boundaries.
pub fn resample(clip: &AudioClip, target_rate_hz: u32) -> Result<AudioClip> {
    if target_rate_hz == 0 {
        return Err(Error::invalid("target sample rate must be positive"));
    }
    clip.require_non_empty("resample")?;
    let src = clip.sample_rate_hz as u64;
    let dst = target_rate_hz as u64;
    if src == dst {
        return Ok(clip.clone());
    }
    let g = gcd(src, dst);
    let up = (dst / g) as usize;
    let down = (src / g) as usize;

    let fs_up = (src as f64) * up as f64;
    let low = src.min(dst) as f64;
    let h = design_filter(fs_up, CUTOFF_FRACTION * low, TRANSITION_FRACTION * low);
    let c = (h.len() / 2) as i64;

    let x = &clip.samples;
    let n_in = x.len() as i64;
    let n_out = (x.len() * up).div_ceil(down);
    let gain = up as f64;
    let up_i = up as i64;
    let mut out = Vec::with_capacity(n_out);
    for m in 0..n_out as i64 {
        let t0 = m * down as i64;
        // input indices n with |t0 - n*up| <= c
        let n_lo = (t0 - c).div_euclid(up_i) + i64::from((t0 - c).rem_euclid(up_i) != 0);
        let n_hi = (t0 + c).div_euclid(up_i);
        let mut acc = 0.0;
        for n in n_lo..=n_hi {
            let tap = (t0 - n * up_i + c) as usize;
            let xi = x[n.clamp(0, n_in - 1) as usize];
            acc += h[tap] * xi;
        }
        out.push(acc * gain);
    }
    AudioClip::new(out, target_rate_hz)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(f: f64, fs: u32, secs: f64) -> AudioClip {
        let n = (fs as f64 * secs) as usize;
        AudioClip::new(
            (0..n).map(|i| (2.0 * PI * f * i as f64 / fs as f64).sin()).collect(),
            fs,
        )
        .unwrap()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    // Least-squares fit of a*sin + b*cos at a known frequency.
    fn sine_amplitude(x: &[f64], f: f64, fs: f64) -> f64 {
        let (mut ss, mut cc, mut sc, mut xs, mut xc) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (i, v) in x.iter().enumerate() {
            let w = 2.0 * PI * f * i as f64 / fs;
            let (s, c) = w.sin_cos();
            ss += s * s;
            cc += c * c;
            sc += s * c;
            xs += v * s;
            xc += v * c;
        }
        let det = ss * cc - sc * sc;
        let a = (xs * cc - xc * sc) / det;
        let b = (xc * ss - xs * sc) / det;
        (a * a + b * b).sqrt()
    }

    #[test]
    fn dc_passes() {
        let clip = AudioClip::new(vec![0.3; 9600], 96_000).unwrap();
        let out = resample(&clip, 16_000).unwrap();
        assert_eq!(out.len(), 1600);
        for v in &out.samples {
            assert!((v - 0.3).abs() < 0.003, "{v}");
        }
    }

    #[test]
    fn passband_tone_amplitude_preserved() {
        let out = resample(&tone(1000.0, 96_000, 0.5), 16_000).unwrap();
        let interior = &out.samples[400..out.len() - 400];
        let amp = sine_amplitude(interior, 1000.0, 16_000.0);
        assert!((amp - 1.0).abs() < 0.01, "amplitude {amp}");
    }

    #[test]
    fn stopband_tone_rejected() {
        let input = tone(10_000.0, 96_000, 0.5);
        let out = resample(&input, 16_000).unwrap();
        let interior = &out.samples[400..out.len() - 400];
        let ratio = rms(interior) / rms(&input.samples);
        assert!(ratio <= 0.01, "leakage ratio {ratio}");
    }

    #[test]
    fn duration_preserved_for_awkward_ratio() {
        let input = tone(440.0, 44_100, 0.3);
        let out = resample(&input, 16_000).unwrap();
        assert!((out.duration_s() - input.duration_s()).abs() <= 1.0 / 16_000.0);
        let interior = &out.samples[300..out.len() - 300];
        let amp = sine_amplitude(interior, 440.0, 16_000.0);
        assert!((amp - 1.0).abs() < 0.01, "amplitude {amp}");
    }

    #[test]
    fn upsampling_keeps_tone() {
        let out = resample(&tone(1000.0, 16_000, 0.25), 48_000).unwrap();
        assert_eq!(out.len(), 12_000);
        let amp = sine_amplitude(&out.samples[1000..11_000], 1000.0, 48_000.0);
        assert!((amp - 1.0).abs() < 0.01, "amplitude {amp}");
    }

    #[test]
    fn same_rate_is_identity() {
        let input = tone(440.0, 16_000, 0.1);
        let once = resample(&input, 16_000).unwrap();
        let twice = resample(&once, 16_000).unwrap();
        assert_eq!(twice, input);
    }

    #[test]
    fn zero_target_rejected() {
        assert!(resample(&tone(440.0, 16_000, 0.1), 0).is_err());
    }
}
