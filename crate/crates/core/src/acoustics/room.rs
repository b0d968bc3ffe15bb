use serde::{Deserialize, Serialize};

use super::Vec3;
use crate::error::{Error, Result};

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

// Sabine constant (s/m) for metric units.
const SABINE: f64 = 0.1611;

/// A rectangular room with one frequency-independent amplitude reflection
/// coefficient shared by all six walls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub dims: Vec3,
    pub reflection_coeff: f64,
    pub speed_of_sound: f64,
    pub sample_rate_hz: u32,
}

impl RoomSpec {
    pub fn new(dims: Vec3, reflection_coeff: f64, speed_of_sound: f64, sample_rate_hz: u32) -> Result<Self> {
        let room = Self {
            dims,
            reflection_coeff,
            speed_of_sound,
            sample_rate_hz,
        };
        room.validate()?;
        Ok(room)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.dims.0.iter().all(|&d| d > 0.0 && d.is_finite()) {
            return Err(Error::invalid(format!(
                "room dims must be positive, got {:?}",
                self.dims.0
            )));
        }
        if !(self.reflection_coeff > 0.0 && self.reflection_coeff < 1.0) {
            return Err(Error::invalid(format!(
                "reflection coefficient must lie in (0, 1), got {}",
                self.reflection_coeff
            )));
        }
        if !(self.speed_of_sound > 0.0 && self.speed_of_sound.is_finite()) {
            return Err(Error::invalid("speed of sound must be positive"));
        }
        if self.sample_rate_hz == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        Ok(())
    }

    /// True when `p` is at least `margin` metres from every wall.
    pub fn contains(&self, p: Vec3, margin: f64) -> bool {
        p.is_finite() && p.0.iter().zip(self.dims.0).all(|(&c, d)| c > margin && c < d - margin)
    }

    pub fn volume(&self) -> f64 {
        self.dims.0.iter().product()
    }

    pub fn surface_area(&self) -> f64 {
        surface_area(self.dims)
    }

    pub fn require_inside(&self, p: Vec3, what: &str) -> Result<()> {
        if self.contains(p, 0.0) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "{what} {:?} is not strictly inside room {:?}",
                p.0, self.dims.0
            )))
        }
    }
}

fn surface_area(d: Vec3) -> f64 {
    2.0 * (d.x() * d.y() + d.x() * d.z() + d.y() * d.z())
}

/// Sabine reverberation time with energy absorption `1 - r^2`.
pub fn reflection_to_t60(room: &RoomSpec) -> Result<f64> {
    room.validate()?;
    let r = room.reflection_coeff;
    let absorption = 1.0 - r * r;
    Ok(SABINE * room.volume() / (room.surface_area() * absorption))
}

/// Amplitude reflection coefficient producing reverberation time `t60` in a
/// room of size `dims`.
pub fn t60_to_reflection(dims: Vec3, t60: f64) -> Result<f64> {
    if !(t60 > 0.0 && t60.is_finite()) {
        return Err(Error::invalid(format!("T60 must be positive, got {t60}")));
    }
    if !dims.0.iter().all(|&d| d > 0.0) {
        return Err(Error::invalid("room dims must be positive"));
    }
    let volume: f64 = dims.0.iter().product();
    let absorption = SABINE * volume / (surface_area(dims) * t60);
    if absorption >= 1.0 {
        return Err(Error::OutOfRange(format!(
            "T60 {t60} s needs absorption {absorption:.4} >= 1 in a {:?} m room",
            dims.0
        )));
    }
    Ok((1.0 - absorption).sqrt())
}
