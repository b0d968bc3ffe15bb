use std::f64::consts::{PI, TAU};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dsp::{read_wav, resample, AudioClip};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    NoiseBursts,
    LinearChirps,
    ToneComplex,
}

impl SyntheticKind {
    pub const ALL: [SyntheticKind; 3] = [Self::NoiseBursts, Self::LinearChirps, Self::ToneComplex];
}

/// Which pool entry a scenario used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceInfo {
    Synthetic { signal: SyntheticKind },
    File { name: String },
}

/// Where source sounds come from.
#[derive(Debug, Clone)]
pub enum SourcePool {
    Synthetic,
    /// Decoded WAV files, already at the target rate, sorted by name.
    Files(Vec<(String, AudioClip)>),
}

impl SourcePool {
    /// Loads every `.wav` under `dir` (non-recursive), resampled to
    /// `sample_rate_hz`. Files shorter than `min_len` samples are skipped.
    pub fn from_dir(dir: &Path, sample_rate_hz: u32, min_len: usize) -> Result<Self> {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(format!("reading {}", dir.display()), e))?;
        let mut paths = Vec::new();
        for entry in entries {
            let path = entry
                .map_err(|e| Error::io(format!("reading {}", dir.display()), e))?
                .path();
            let is_wav = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav"));
            if is_wav && path.is_file() {
                paths.push(path);
            }
        }
        paths.sort();
        let mut clips = Vec::new();
        for path in paths {
            let clip = resample(&read_wav(&path)?, sample_rate_hz)?;
            if clip.len() >= min_len && clip.power() > 0.0 {
                let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
                clips.push((name, clip));
            } else {
                log::warn!("skipping {}: shorter than {min_len} samples or silent", path.display());
            }
        }
        if clips.is_empty() {
            return Err(Error::invalid(format!(
                "no usable WAV files (>= {min_len} samples) in {}",
                dir.display()
            )));
        }
        Ok(Self::Files(clips))
    }

    /// Picks a source for the scenario with this seed. Synthetic sources
    /// are exactly `len` samples; files are returned whole (the renderer
    /// crops them). Synthetic output has unit RMS.
    pub fn draw(&self, seed: u64, len: usize, sample_rate_hz: u32) -> Result<(AudioClip, SourceInfo)> {
        let mut rng = rng_from_seed(derive_seed(seed, stream::SOURCE_AUDIO, 0));
        match self {
            Self::Synthetic => {
                let kind = SyntheticKind::ALL[rng.random_range(0..SyntheticKind::ALL.len())];
                let clip = synthesize(kind, len, sample_rate_hz, &mut rng)?;
                Ok((clip, SourceInfo::Synthetic { signal: kind }))
            }
            Self::Files(clips) => {
                let (name, clip) = &clips[rng.random_range(0..clips.len())];
                if clip.sample_rate_hz != sample_rate_hz {
                    return Err(Error::invalid(format!(
                        "pool file {name} is at {} Hz, scenario needs {sample_rate_hz} Hz",
                        clip.sample_rate_hz
                    )));
                }
                Ok((clip.clone(), SourceInfo::File { name: name.clone() }))
            }
        }
    }
}

/// Generates `len` samples of the given synthetic signal, scaled to unit RMS.
pub(crate) fn synthesize(kind: SyntheticKind, len: usize, fs: u32, rng: &mut ChaCha8Rng) -> Result<AudioClip> {
    if len == 0 {
        return Err(Error::invalid("synthetic source length must be positive"));
    }
    let fsf = fs as f64;
    let top = (0.47 * fsf).min(7500.0);
    let mut x = match kind {
        SyntheticKind::NoiseBursts => noise_bursts(len, fsf, rng),
        SyntheticKind::LinearChirps => chirps(len, fsf, top, rng),
        SyntheticKind::ToneComplex => tone_complex(len, fsf, top, rng),
    };
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
    if rms > 0.0 {
        for v in &mut x {
            *v /= rms;
        }
    } else {
        // degenerate only for extremely short requests
        x.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
    }
    AudioClip::new(x, fs)
}

fn noise_bursts(len: usize, fs: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x = vec![0.0; len];
    let fade = ((0.005 * fs) as usize).max(1);
    let mut t = 0;
    while t < len {
        let on = ((rng.random_range(0.05..0.4) * fs) as usize).max(1);
        let gain: f64 = rng.random_range(0.3..1.0);
        let end = (t + on).min(len);
        for (i, v) in x[t..end].iter_mut().enumerate() {
            let edge = i.min(on - 1 - i);
            let env = if edge < fade {
                0.5 * (1.0 - (PI * edge as f64 / fade as f64).cos())
            } else {
                1.0
            };
            *v = gain * env * rng.sample::<f64, _>(StandardNormal);
        }
        t = end + (rng.random_range(0.0..0.1) * fs) as usize;
    }
    x
}

fn chirps(len: usize, fs: f64, top: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let f0 = rng.random_range(100.0..top);
    let f1 = rng.random_range(100.0..top);
    let period = ((rng.random_range(0.1..0.75) * fs) as usize).max(2);
    let mut phase: f64 = rng.random_range(0.0..TAU);
    (0..len)
        .map(|n| {
            let frac = (n % period) as f64 / period as f64;
            let f = f0 + (f1 - f0) * frac;
            phase = (phase + TAU * f / fs) % TAU;
            phase.sin()
        })
        .collect()
}

fn tone_complex(len: usize, fs: f64, top: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let f0 = rng.random_range(80.0..600.0);
    let partials: Vec<(f64, f64, f64)> = (1..)
        .map(|h| h as f64 * f0)
        .take_while(|&f| f < top)
        .enumerate()
        .map(|(h, f)| {
            let amp = rng.random_range(0.0..1.0) / ((h + 1) as f64).sqrt();
            (f, amp, rng.random_range(0.0..TAU))
        })
        .collect();
    (0..len)
        .map(|n| {
            let t = n as f64 / fs;
            partials.iter().map(|&(f, a, p)| a * (TAU * f * t + p).sin()).sum()
        })
        .collect()
}
