use serde::{Deserialize, Serialize};

use super::Vec3;
use crate::error::{Error, Result};

const UNIT_TOLERANCE: f64 = 1e-6;

/// Frequency-independent sensitivity pattern of a source or microphone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Directivity {
    Omnidirectional,
    /// `0.75 + 0.25 cos(theta)` around `orientation`.
    Subcardioid {
        orientation: Vec3,
    },
}

impl Directivity {
    /// Subcardioid pattern; `orientation` is normalised.
    pub fn subcardioid(orientation: Vec3) -> Result<Self> {
        let orientation = orientation
            .normalized()
            .ok_or_else(|| Error::invalid("orientation must be non-zero"))?;
        Ok(Directivity::Subcardioid { orientation })
    }

    /// Gain towards unit `direction`.
    pub fn gain(&self, direction: Vec3) -> f64 {
        match self {
            Directivity::Omnidirectional => 1.0,
            Directivity::Subcardioid { orientation } => 0.75 + 0.25 * orientation.dot(direction),
        }
    }

    pub fn orientation(&self) -> Option<Vec3> {
        match self {
            Directivity::Omnidirectional => None,
            Directivity::Subcardioid { orientation } => Some(*orientation),
        }
    }

    /// Same pattern with the orientation replaced (no-op for omni).
    pub fn with_orientation(&self, orientation: Vec3) -> Self {
        match self {
            Directivity::Omnidirectional => Directivity::Omnidirectional,
            Directivity::Subcardioid { .. } => Directivity::Subcardioid { orientation },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Directivity::Subcardioid { orientation } = self {
            check_unit(*orientation, "orientation")?;
        }
        Ok(())
    }
}

fn check_unit(v: Vec3, what: &str) -> Result<()> {
    if (v.norm() - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::invalid(format!("{what} {:?} is not a unit vector", v.0)));
    }
    Ok(())
}

/// `0.75 + 0.25 (orientation . direction)` for unit vectors.
pub fn subcardioid_gain(orientation: Vec3, direction: Vec3) -> Result<f64> {
    check_unit(orientation, "orientation")?;
    check_unit(direction, "direction")?;
    Ok(0.75 + 0.25 * orientation.dot(direction))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_angles() {
        let x = Vec3::new(1.0, 0.0, 0.0);
        assert_eq!(subcardioid_gain(x, x).unwrap(), 1.0);
        assert_eq!(subcardioid_gain(x, -x).unwrap(), 0.5);
        assert_eq!(subcardioid_gain(x, Vec3::new(0.0, 1.0, 0.0)).unwrap(), 0.75);
    }

    #[test]
    fn rejects_non_unit() {
        assert!(subcardioid_gain(Vec3::new(2.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)).is_err());
        assert!(Directivity::Subcardioid {
            orientation: Vec3::new(0.5, 0.0, 0.0)
        }
        .validate()
        .is_err());
    }

    proptest::proptest! {
        #[test]
        fn gain_bounded(
            a in proptest::array::uniform3(-1.0f64..1.0),
            b in proptest::array::uniform3(-1.0f64..1.0),
        ) {
            if let (Some(a), Some(b)) = (Vec3(a).normalized(), Vec3(b).normalized()) {
                let g = subcardioid_gain(a, b).unwrap();
                proptest::prop_assert!((0.5 - 1e-12..=1.0 + 1e-12).contains(&g));
            }
        }
    }
}
