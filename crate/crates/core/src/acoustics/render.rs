use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rir::{add_arrivals, check_direct_path};
use super::{discretize_path, enumerate_image_sources, image_arrivals, Directivity, RoomSpec, SourcePath, Vec3};
use crate::dsp::{convolve, AudioClip, ConvMode, FractionalDelay, DEFAULT_TAPS};
use crate::error::{Error, Result};

/// Knobs of the image-source renderer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderSettings {
    pub max_order: u32,
    pub rir_len: usize,
    /// Number of path segments `k`.
    pub segments: usize,
    /// Leading samples simulated and then discarded so that the recording
    /// starts with reverberation already present.
    pub preroll: usize,
    pub taps: usize,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            max_order: 20,
            rir_len: 4096,
            segments: 32,
            preroll: 2000,
            taps: DEFAULT_TAPS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Microphone {
    pub position: Vec3,
    pub directivity: Directivity,
}

/// Renders what one microphone records from a source following `path`.
///
/// The first `preroll` samples of `source` are emitted from the path start
/// and discarded from the output. The remaining samples are split into `k`
/// equal parts (the last one shorter if needed); part `j` is emitted from
/// the `j`-th discretised path position and convolved with that position's
/// impulse response. Output length is `source.len() - preroll`.
pub fn render_moving_source(
    room: &RoomSpec,
    path: &SourcePath,
    source: &AudioClip,
    src_directivity: &Directivity,
    mic: &Microphone,
    settings: &RenderSettings,
) -> Result<AudioClip> {
    let parts = plan_parts(room, path, source, settings)?;
    room.require_inside(mic.position, "microphone")?;
    src_directivity.validate()?;
    mic.directivity.validate()?;
    render_parts(room, &parts, source, src_directivity, mic, settings)
}

/// [`render_moving_source`] for several microphones, in parallel.
pub fn render_moving_source_multi(
    room: &RoomSpec,
    path: &SourcePath,
    source: &AudioClip,
    src_directivity: &Directivity,
    mics: &[Microphone],
    settings: &RenderSettings,
) -> Result<Vec<AudioClip>> {
    let parts = plan_parts(room, path, source, settings)?;
    src_directivity.validate()?;
    for mic in mics {
        room.require_inside(mic.position, "microphone")?;
        mic.directivity.validate()?;
    }
    mics.par_iter()
        .map(|mic| render_parts(room, &parts, source, src_directivity, mic, settings))
        .collect()
}

struct Part {
    start: usize,
    end: usize,
    position: Vec3,
}

fn plan_parts(room: &RoomSpec, path: &SourcePath, source: &AudioClip, settings: &RenderSettings) -> Result<Vec<Part>> {
    room.validate()?;
    let k = settings.segments;
    if k == 0 {
        return Err(Error::invalid("segment count k must be >= 1"));
    }
    if source.sample_rate_hz != room.sample_rate_hz {
        return Err(Error::invalid(format!(
            "source rate {} Hz differs from room rate {} Hz",
            source.sample_rate_hz, room.sample_rate_hz
        )));
    }
    if source.len() <= settings.preroll {
        return Err(Error::invalid(format!(
            "source has {} samples, needs more than the {} preroll samples",
            source.len(),
            settings.preroll
        )));
    }
    let positions = discretize_path(path, k)?;
    for p in &positions {
        room.require_inside(*p, "path point")?;
    }
    let n = source.len();
    let recorded = n - settings.preroll;
    let part_len = recorded.div_ceil(k);

    let mut parts: Vec<Part> = Vec::with_capacity(k + 1);
    let mut push = |start: usize, end: usize, position: Vec3| {
        if start >= end {
            return;
        }
        match parts.last_mut() {
            Some(last) if last.position == position && last.end == start => last.end = end,
            _ => parts.push(Part { start, end, position }),
        }
    };
    push(0, settings.preroll, positions[0]);
    for (j, &p) in positions.iter().enumerate() {
        let start = (settings.preroll + j * part_len).min(n);
        let end = (settings.preroll + (j + 1) * part_len).min(n);
        push(start, end, p);
    }
    Ok(parts)
}

fn render_parts(
    room: &RoomSpec,
    parts: &[Part],
    source: &AudioClip,
    src_directivity: &Directivity,
    mic: &Microphone,
    settings: &RenderSettings,
) -> Result<AudioClip> {
    let kernel = FractionalDelay::new(settings.taps)?;
    let orient = src_directivity.orientation().unwrap_or(Vec3::new(1.0, 0.0, 0.0));
    let n = source.len();
    let mut out = vec![0.0; n];
    let mut rir = vec![0.0; settings.rir_len];
    for part in parts {
        let images = enumerate_image_sources(room, part.position, orient, settings.max_order)?;
        let arrivals = image_arrivals(room, &images, src_directivity, mic.position, &mic.directivity);
        check_direct_path(&arrivals, settings.rir_len)?;
        rir.iter_mut().for_each(|v| *v = 0.0);
        add_arrivals(&mut rir, &arrivals, &kernel);
        let y = convolve(&source.samples[part.start..part.end], &rir, ConvMode::Full)?;
        for (o, v) in out[part.start..].iter_mut().zip(&y) {
            *o += v;
        }
    }
    out.drain(..settings.preroll);
    AudioClip::new(out, source.sample_rate_hz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustics::compute_rir;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn room() -> RoomSpec {
        RoomSpec::new(Vec3::new(5.0, 4.0, 3.0), 0.4, 343.0, 16_000).unwrap()
    }

    fn noise(n: usize, seed: u64) -> AudioClip {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        AudioClip::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect(), 16_000).unwrap()
    }

    fn settings(k: usize, preroll: usize) -> RenderSettings {
        RenderSettings {
            max_order: 3,
            rir_len: 1024,
            segments: k,
            preroll,
            taps: DEFAULT_TAPS,
        }
    }

    fn mic() -> Microphone {
        Microphone {
            position: Vec3::new(3.5, 1.0, 1.5),
            directivity: Directivity::subcardioid(Vec3::new(0.0, 1.0, 0.0)).unwrap(),
        }
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn stationary_matches_single_convolution() {
        let src = noise(3000, 1);
        let path = SourcePath::stationary(Vec3::new(1.0, 2.0, 1.0), 0.1);
        let sd = Directivity::subcardioid(Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let h = compute_rir(
            &room(),
            Vec3::new(1.0, 2.0, 1.0),
            &sd,
            mic().position,
            &mic().directivity,
            3,
            1024,
            DEFAULT_TAPS,
        )
        .unwrap();
        let full = convolve(&src.samples, &h, ConvMode::SameAsFirst).unwrap();
        for k in [1, 4, 7] {
            let out = render_moving_source(&room(), &path, &src, &sd, &mic(), &settings(k, 500)).unwrap();
            assert_eq!(out.len(), 2500);
            assert!(max_abs_diff(&out.samples, &full[500..]) < 1e-9);
        }
    }

    #[test]
    fn single_segment_uses_path_start() {
        let src = noise(2000, 2);
        let path = SourcePath::bezier(
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(2.0, 2.0, 1.0),
            Vec3::new(3.0, 1.0, 2.0),
            0.1,
        );
        let sd = Directivity::Omnidirectional;
        let h = compute_rir(
            &room(),
            Vec3::new(1.0, 1.0, 1.0),
            &sd,
            mic().position,
            &mic().directivity,
            3,
            1024,
            DEFAULT_TAPS,
        )
        .unwrap();
        let full = convolve(&src.samples, &h, ConvMode::SameAsFirst).unwrap();
        let out = render_moving_source(&room(), &path, &src, &sd, &mic(), &settings(1, 0)).unwrap();
        assert!(max_abs_diff(&out.samples, &full) < 1e-9);
    }

    #[test]
    fn impulse_per_segment_arrives_per_segment_geometry() {
        let path = SourcePath::bezier(
            Vec3::new(0.6, 0.6, 1.0),
            Vec3::new(2.5, 3.4, 1.5),
            Vec3::new(4.4, 0.8, 2.0),
            0.5,
        );
        let k = 4;
        let part = 1000;
        let mut x = vec![0.0; k * part];
        for j in 0..k {
            x[j * part] = 1.0;
        }
        let src = AudioClip::new(x, 16_000).unwrap();
        let anechoic = RenderSettings {
            max_order: 0,
            ..settings(k, 0)
        };
        let m = Microphone {
            position: Vec3::new(2.5, 0.5, 2.5),
            directivity: Directivity::Omnidirectional,
        };
        let out = render_moving_source(&room(), &path, &src, &Directivity::Omnidirectional, &m, &anechoic).unwrap();
        let positions = discretize_path(&path, k).unwrap();
        for (j, p) in positions.iter().enumerate() {
            let expected = p.distance(m.position) / 343.0 * 16_000.0;
            let window = &out.samples[j * part..(j + 1) * part];
            let (idx, _) = window
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap();
            // parabolic refinement of the arrival peak
            let (a, b, c) = (window[idx - 1], window[idx], window[idx + 1]);
            let frac = 0.5 * (a - c) / (a - 2.0 * b + c);
            let measured = idx as f64 + frac;
            assert!(
                (measured - expected).abs() < 0.5,
                "segment {j}: {measured} vs {expected}"
            );
        }
    }

    #[test]
    fn linearity() {
        let a = noise(2500, 3);
        let b = noise(2500, 4);
        let sum = AudioClip::new(a.samples.iter().zip(&b.samples).map(|(x, y)| x + y).collect(), 16_000).unwrap();
        let path = SourcePath::bezier(
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(1.5, 2.0, 1.2),
            Vec3::new(2.0, 2.5, 1.4),
            0.15,
        );
        let s = settings(5, 300);
        let sd = Directivity::subcardioid(Vec3::new(0.0, 0.0, 1.0)).unwrap();
        let ra = render_moving_source(&room(), &path, &a, &sd, &mic(), &s).unwrap();
        let rb = render_moving_source(&room(), &path, &b, &sd, &mic(), &s).unwrap();
        let rs = render_moving_source(&room(), &path, &sum, &sd, &mic(), &s).unwrap();
        let expected: Vec<f64> = ra.samples.iter().zip(&rb.samples).map(|(x, y)| x + y).collect();
        assert!(max_abs_diff(&rs.samples, &expected) < 1e-9);
    }

    #[test]
    fn multi_matches_single() {
        let src = noise(2000, 5);
        let path = SourcePath::bezier(
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(1.5, 2.0, 1.2),
            Vec3::new(2.0, 2.5, 1.4),
            0.1,
        );
        let mics = [
            mic(),
            Microphone {
                position: Vec3::new(4.0, 3.0, 2.0),
                directivity: Directivity::Omnidirectional,
            },
        ];
        let s = settings(3, 200);
        let multi = render_moving_source_multi(&room(), &path, &src, &Directivity::Omnidirectional, &mics, &s).unwrap();
        for (m, r) in mics.iter().zip(&multi) {
            let single = render_moving_source(&room(), &path, &src, &Directivity::Omnidirectional, m, &s).unwrap();
            assert_eq!(&single, r);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let src = noise(1000, 6);
        let path = SourcePath::stationary(Vec3::new(1.0, 1.0, 1.0), 0.1);
        let sd = Directivity::Omnidirectional;
        assert!(render_moving_source(&room(), &path, &src, &sd, &mic(), &settings(0, 0)).is_err());
        let outside = SourcePath::bezier(
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(9.0, 1.0, 1.0),
            Vec3::new(1.0, 2.0, 1.0),
            0.1,
        );
        assert!(render_moving_source(&room(), &outside, &src, &sd, &mic(), &settings(5, 0)).is_err());
        assert!(render_moving_source(&room(), &path, &src, &sd, &mic(), &settings(2, 1000)).is_err());
    }
}
