use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A point or direction in room coordinates (metres).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self([x, y, z])
    }

    pub fn x(self) -> f64 {
        self.0[0]
    }

    pub fn y(self) -> f64 {
        self.0[1]
    }

    pub fn z(self) -> f64 {
        self.0[2]
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    /// Unit vector in the same direction; `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        self * -1.0
    }
}

/// Time difference of arrival (seconds) at receivers `r_i`, `r_j` for a
/// source at `s`. Positive when the sound reaches `r_i` later.
pub fn tdoa_ground_truth(r_i: Vec3, r_j: Vec3, s: Vec3, speed: f64) -> f64 {
    (r_i.distance(s) - r_j.distance(s)) / speed
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equidistant_receivers() {
        let r = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(tdoa_ground_truth(r, r, Vec3::new(4.0, 0.0, 1.0), 343.0), 0.0);
    }

    #[test]
    fn pythagorean_example() {
        let t = tdoa_ground_truth(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(3.0, 0.0, 0.0),
            Vec3::new(3.0, 4.0, 0.0),
            343.0,
        );
        assert!((t - 1.0 / 343.0).abs() < 1e-15);
        assert!((t - 2.9155e-3).abs() < 1e-7);
    }

    proptest::proptest! {
        #[test]
        fn antisymmetric(
            a in proptest::array::uniform3(-10.0f64..10.0),
            b in proptest::array::uniform3(-10.0f64..10.0),
            s in proptest::array::uniform3(-10.0f64..10.0),
        ) {
            let (a, b, s) = (Vec3(a), Vec3(b), Vec3(s));
            proptest::prop_assert_eq!(
                tdoa_ground_truth(a, b, s, 343.0),
                -tdoa_ground_truth(b, a, s, 343.0)
            );
        }
    }
}
