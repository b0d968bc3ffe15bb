use std::f64::consts::PI;

use super::{enumerate_image_sources, Directivity, ImageSource, RoomSpec, Vec3};
use crate::dsp::FractionalDelay;
use crate::error::{Error, Result};

/// Distances below this are clamped when computing spherical spreading.
pub const MIN_DISTANCE_M: f64 = 1e-2;

/// A single propagation path as seen by one microphone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub delay_samples: f64,
    pub amplitude: f64,
    pub generation: u32,
}

/// Delay and gain of every image at `mic_pos`:
/// `r^g * G_mic * G_src / (4 pi d)` at `d / c * fs` samples.
pub fn image_arrivals(
    room: &RoomSpec,
    images: &[ImageSource],
    src_directivity: &Directivity,
    mic_pos: Vec3,
    mic_directivity: &Directivity,
) -> Vec<Arrival> {
    let fs = room.sample_rate_hz as f64;
    images
        .iter()
        .map(|im| {
            let to_image = im.position - mic_pos;
            let d = to_image.norm();
            let (g_mic, g_src) = match to_image.normalized() {
                Some(dir) => (
                    mic_directivity.gain(dir),
                    src_directivity.with_orientation(im.mirrored_orientation).gain(-dir),
                ),
                None => (1.0, 1.0),
            };
            Arrival {
                delay_samples: d / room.speed_of_sound * fs,
                amplitude: im.amplitude_factor * g_mic * g_src / (4.0 * PI * d.max(MIN_DISTANCE_M)),
                generation: im.generation,
            }
        })
        .collect()
}

/// Renders arrivals into an impulse response of `len` samples; each arrival
/// is placed with the fractional-delay kernel and anything past the end is
/// dropped.
pub fn render_arrivals(arrivals: &[Arrival], len: usize, kernel: &FractionalDelay) -> Vec<f64> {
    let mut h = vec![0.0; len];
    add_arrivals(&mut h, arrivals, kernel);
    h
}

pub(crate) fn add_arrivals(h: &mut [f64], arrivals: &[Arrival], kernel: &FractionalDelay) {
    let len = h.len() as i64;
    let taps = kernel.taps();
    let center = kernel.center() as i64;
    let mut buf = vec![0.0; taps];
    for a in arrivals {
        let whole = a.delay_samples.floor();
        let start = whole as i64 - center;
        if start >= len || start + taps as i64 <= 0 {
            continue;
        }
        kernel.fill(a.delay_samples - whole, &mut buf);
        let m_lo = (-start).max(0) as usize;
        let m_hi = ((len - start) as usize).min(taps);
        for m in m_lo..m_hi {
            h[(start + m as i64) as usize] += a.amplitude * buf[m];
        }
    }
}

/// Room impulse response from `src_pos` to `mic_pos` including all images
/// up to `max_order`.
#[allow(clippy::too_many_arguments)]
pub fn compute_rir(
    room: &RoomSpec,
    src_pos: Vec3,
    src_directivity: &Directivity,
    mic_pos: Vec3,
    mic_directivity: &Directivity,
    max_order: u32,
    rir_len_samples: usize,
    taps: usize,
) -> Result<Vec<f64>> {
    if rir_len_samples == 0 {
        return Err(Error::invalid("RIR length must be positive"));
    }
    room.require_inside(mic_pos, "microphone")?;
    src_directivity.validate()?;
    mic_directivity.validate()?;
    let orient = src_directivity.orientation().unwrap_or(Vec3::new(1.0, 0.0, 0.0));
    let images = enumerate_image_sources(room, src_pos, orient, max_order)?;
    let arrivals = image_arrivals(room, &images, src_directivity, mic_pos, mic_directivity);
    check_direct_path(&arrivals, rir_len_samples)?;
    let kernel = FractionalDelay::new(taps)?;
    Ok(render_arrivals(&arrivals, rir_len_samples, &kernel))
}

pub(crate) fn check_direct_path(arrivals: &[Arrival], rir_len: usize) -> Result<()> {
    let direct = arrivals
        .iter()
        .find(|a| a.generation == 0)
        .expect("image list always contains the direct path");
    if direct.delay_samples >= rir_len as f64 {
        return Err(Error::invalid(format!(
            "direct path arrives at sample {:.1}, beyond RIR length {rir_len}",
            direct.delay_samples
        )));
    }
    Ok(())
}
