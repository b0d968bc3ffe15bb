//! Minimal RIFF/WAVE reader and writer (PCM 16/24/32-bit, IEEE float
//! 32-bit, WAVE_FORMAT_EXTENSIBLE wrappers of those). Multi-channel input is
//! averaged to mono.

use std::fs;
use std::path::Path;

use super::AudioClip;
use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Sample encoding used by [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Pcm16,
    Pcm24,
    Pcm32,
    Float32,
}

impl WavFormat {
    fn bits(self) -> u16 {
        match self {
            WavFormat::Pcm16 => 16,
            WavFormat::Pcm24 => 24,
            WavFormat::Pcm32 | WavFormat::Float32 => 32,
        }
    }

    fn tag(self) -> u16 {
        match self {
            WavFormat::Float32 => FORMAT_FLOAT,
            _ => FORMAT_PCM,
        }
    }
}

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset: offset as u64,
        message: message.into(),
    }
}

fn u16_at(b: &[u8], off: usize) -> Result<u16> {
    b.get(off..off + 2)
        .map(|s| u16::from_le_bytes([s[0], s[1]]))
        .ok_or_else(|| format_err(off, "unexpected end of file"))
}

fn u32_at(b: &[u8], off: usize) -> Result<u32> {
    b.get(off..off + 4)
        .map(|s| u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
        .ok_or_else(|| format_err(off, "unexpected end of file"))
}

struct FmtChunk {
    tag: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

/// Decodes WAV bytes into a mono clip.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip> {
    if bytes.get(0..4) != Some(b"RIFF") {
        return Err(format_err(0, "missing RIFF magic"));
    }
    if bytes.get(8..12) != Some(b"WAVE") {
        return Err(format_err(8, "missing WAVE identifier"));
    }
    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<(usize, &[u8])> = None;
    let mut off = 12;
    while off + 8 <= bytes.len() {
        let id = &bytes[off..off + 4];
        let size = u32_at(bytes, off + 4)? as usize;
        let body_start = off + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| {
                format_err(
                    off + 4,
                    format!("chunk size {size} runs past end of file ({} bytes)", bytes.len()),
                )
            });
        match id {
            b"fmt " => {
                let body_end = body_end?;
                if size < 16 {
                    return Err(format_err(off + 4, format!("fmt chunk too small ({size} bytes)")));
                }
                let mut tag = u16_at(bytes, body_start)?;
                let channels = u16_at(bytes, body_start + 2)?;
                let sample_rate = u32_at(bytes, body_start + 4)?;
                let bits = u16_at(bytes, body_start + 14)?;
                if tag == FORMAT_EXTENSIBLE {
                    if size < 40 {
                        return Err(format_err(off + 4, "extensible fmt chunk too small"));
                    }
                    // first two bytes of the sub-format GUID carry the codec
                    tag = u16_at(bytes, body_start + 24)?;
                }
                debug_assert!(body_end <= bytes.len());
                fmt = Some(FmtChunk {
                    tag,
                    channels,
                    sample_rate,
                    bits,
                });
            }
            b"data" => {
                // tolerate a data chunk whose size field overshoots (streamed writers)
                let end = body_end.unwrap_or(bytes.len());
                data = Some((body_start, &bytes[body_start..end]));
            }
            _ => {
                body_end?;
            }
        }
        off = body_start + size + (size & 1);
    }

    let fmt = fmt.ok_or_else(|| format_err(12, "no fmt chunk"))?;
    let (data_off, data) = data.ok_or_else(|| format_err(12, "no data chunk"))?;
    if fmt.channels == 0 {
        return Err(format_err(22, "zero channels"));
    }
    if fmt.sample_rate == 0 {
        return Err(format_err(24, "zero sample rate"));
    }
    let bytes_per_sample = match (fmt.tag, fmt.bits) {
        (FORMAT_PCM, 16) => 2,
        (FORMAT_PCM, 24) => 3,
        (FORMAT_PCM, 32) | (FORMAT_FLOAT, 32) => 4,
        (tag, bits) => {
            return Err(format_err(
                20,
                format!("unsupported codec: format tag {tag:#06x} with {bits} bits per sample"),
            ))
        }
    };
    let frame = bytes_per_sample * fmt.channels as usize;
    if data.len() % frame != 0 {
        return Err(format_err(
            data_off + data.len() - data.len() % frame,
            format!("data chunk length {} is not a whole number of frames", data.len()),
        ));
    }
    let decode = |s: &[u8]| -> f64 {
        match (fmt.tag, bytes_per_sample) {
            (FORMAT_PCM, 2) => i16::from_le_bytes([s[0], s[1]]) as f64 / 32_768.0,
            (FORMAT_PCM, 3) => {
                let v = i32::from_le_bytes([0, s[0], s[1], s[2]]) >> 8;
                v as f64 / 8_388_608.0
            }
            (FORMAT_PCM, 4) => i32::from_le_bytes([s[0], s[1], s[2], s[3]]) as f64 / 2_147_483_648.0,
            _ => f32::from_le_bytes([s[0], s[1], s[2], s[3]]) as f64,
        }
    };
    let channels = fmt.channels as usize;
    let samples: Vec<f64> = data
        .chunks_exact(frame)
        .map(|f| f.chunks_exact(bytes_per_sample).map(decode).sum::<f64>() / channels as f64)
        .collect();
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(format_err(data_off + i * frame, "non-finite float sample"));
    }
    AudioClip::new(samples, fmt.sample_rate)
}

/// Encodes a mono clip. Samples are clipped to `[-1, 1]` for integer
/// formats.
pub fn encode_wav(clip: &AudioClip, format: WavFormat) -> Vec<u8> {
    let bits = format.bits();
    let bytes_per_sample = bits as usize / 8;
    let data_len = clip.len() * bytes_per_sample;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format.tag().to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate_hz * bytes_per_sample as u32).to_le_bytes());
    out.extend_from_slice(&(bytes_per_sample as u16).to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &clip.samples {
        match format {
            WavFormat::Float32 => out.extend_from_slice(&(s as f32).to_le_bytes()),
            WavFormat::Pcm16 => {
                let v = (s * 32_768.0).round().clamp(-32_768.0, 32_767.0) as i16;
                out.extend_from_slice(&v.to_le_bytes());
            }
            WavFormat::Pcm24 => {
                let v = (s * 8_388_608.0).round().clamp(-8_388_608.0, 8_388_607.0) as i32;
                out.extend_from_slice(&v.to_le_bytes()[..3]);
            }
            WavFormat::Pcm32 => {
                let v = (s * 2_147_483_648.0).round().clamp(-2_147_483_648.0, 2_147_483_647.0) as i32;
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_wav(&bytes)
}

pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>, format: WavFormat) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_wav(clip, format)).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
