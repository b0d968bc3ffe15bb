use serde::{Deserialize, Serialize};

use super::RoomRecording;
use crate::acoustics::tdoa_ground_truth;
use crate::error::{Error, Result};

/// An unordered microphone pair `(i, j)`, `i < j`, with its label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub i: usize,
    pub j: usize,
    /// Ground-truth TDOA at the path midpoint.
    pub tdoa_s: f64,
    /// `None` when the lag falls outside the class span.
    pub class_id: Option<usize>,
}

impl LabeledPair {
    /// The same pair with the microphones swapped.
    pub fn swapped(&self, sample_rate_hz: u32, num_classes: usize) -> Self {
        Self {
            i: self.j,
            j: self.i,
            tdoa_s: -self.tdoa_s,
            class_id: tdoa_to_class(-self.tdoa_s, sample_rate_hz, num_classes),
        }
    }
}

/// All `C(M, 2)` pairs of a recording, labelled at the source midpoint.
pub fn enumerate_pairs(rec: &RoomRecording, num_classes: usize) -> Vec<LabeledPair> {
    let mics = &rec.spec.mics;
    let room = &rec.spec.room;
    let mut out = Vec::with_capacity(mics.len() * mics.len().saturating_sub(1) / 2);
    for i in 0..mics.len() {
        for j in i + 1..mics.len() {
            let tdoa_s = tdoa_ground_truth(
                mics[i].position,
                mics[j].position,
                rec.source_midpoint,
                room.speed_of_sound,
            );
            out.push(LabeledPair {
                i,
                j,
                tdoa_s,
                class_id: tdoa_to_class(tdoa_s, room.sample_rate_hz, num_classes),
            });
        }
    }
    out
}

/// `round(tdoa * fs) + num_classes / 2`, or `None` outside `[0, num_classes)`.
/// Halves round away from zero.
pub fn tdoa_to_class(tdoa_s: f64, sample_rate_hz: u32, num_classes: usize) -> Option<usize> {
    let lag = (tdoa_s * sample_rate_hz as f64).round();
    if !lag.is_finite() {
        return None;
    }
    let class = lag + (num_classes / 2) as f64;
    (class >= 0.0 && class < num_classes as f64).then_some(class as usize)
}

/// Bin-centre TDOA of `class_id`.
pub fn class_to_tdoa(class_id: usize, sample_rate_hz: u32, num_classes: usize) -> Result<f64> {
    if class_id >= num_classes {
        return Err(Error::invalid(format!("class {class_id} outside [0, {num_classes})")));
    }
    Ok((class_id as f64 - (num_classes / 2) as f64) / sample_rate_hz as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_examples() {
        assert_eq!(tdoa_to_class(0.0, 16_000, 1000), Some(500));
        assert_eq!(tdoa_to_class(6.25e-5, 16_000, 1000), Some(501));
        assert_eq!(tdoa_to_class(-500.6 / 16_000.0, 16_000, 1000), None);
        assert_eq!(tdoa_to_class(-500.0 / 16_000.0, 16_000, 1000), Some(0));
        assert_eq!(tdoa_to_class(499.0 / 16_000.0, 16_000, 1000), Some(999));
        assert_eq!(tdoa_to_class(500.0 / 16_000.0, 16_000, 1000), None);
        assert_eq!(tdoa_to_class(f64::NAN, 16_000, 1000), None);
    }

    #[test]
    fn class_999_tdoa() {
        let t = class_to_tdoa(999, 16_000, 1000).unwrap();
        assert!((t - 499.0 / 16_000.0).abs() < 1e-15);
        assert!((t - 0.0311875).abs() < 1e-12);
        assert_eq!(class_to_tdoa(500, 16_000, 1000).unwrap(), 0.0);
        assert!(class_to_tdoa(1000, 16_000, 1000).is_err());
    }

    #[test]
    fn roundtrip_all_classes() {
        for c in 0..1000 {
            let t = class_to_tdoa(c, 16_000, 1000).unwrap();
            assert_eq!(tdoa_to_class(t, 16_000, 1000), Some(c));
        }
    }

    proptest::proptest! {
        #[test]
        fn class_matches_rounded_lag(lag in -600.0f64..600.0) {
            let got = tdoa_to_class(lag / 16_000.0, 16_000, 1000);
            let r = lag.round();
            if (-500.0..500.0).contains(&r) {
                proptest::prop_assert_eq!(got, Some((r + 500.0) as usize));
            } else {
                proptest::prop_assert_eq!(got, None);
            }
        }
    }
}
