use serde::{Deserialize, Serialize};

use super::Vec3;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathKind {
    Stationary {
        point: Vec3,
    },
    /// Quadratic Bezier curve with control points `p0, p1, p2`.
    Bezier {
        p0: Vec3,
        p1: Vec3,
        p2: Vec3,
    },
}

/// Trajectory of the source over the recorded window `[0, duration_s]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourcePath {
    #[serde(flatten)]
    pub kind: PathKind,
    pub duration_s: f64,
}

impl SourcePath {
    pub fn stationary(point: Vec3, duration_s: f64) -> Self {
        Self {
            kind: PathKind::Stationary { point },
            duration_s,
        }
    }

    pub fn bezier(p0: Vec3, p1: Vec3, p2: Vec3, duration_s: f64) -> Self {
        Self {
            kind: PathKind::Bezier { p0, p1, p2 },
            duration_s,
        }
    }

    pub fn is_moving(&self) -> bool {
        matches!(self.kind, PathKind::Bezier { .. })
    }

    /// Control points (one for a stationary path).
    pub fn control_points(&self) -> Vec<Vec3> {
        match self.kind {
            PathKind::Stationary { point } => vec![point],
            PathKind::Bezier { p0, p1, p2 } => vec![p0, p1, p2],
        }
    }

    /// Position at normalised time `u` without range checks.
    pub fn at(&self, u: f64) -> Vec3 {
        match self.kind {
            PathKind::Stationary { point } => point,
            PathKind::Bezier { p0, p1, p2 } => {
                let v = 1.0 - u;
                p0 * (v * v) + p1 * (2.0 * v * u) + p2 * (u * u)
            }
        }
    }

    /// Position at the temporal midpoint of the path.
    pub fn midpoint(&self) -> Vec3 {
        self.at(0.5)
    }

    /// Arc length, integrated with 16-point Gauss-Legendre quadrature of the
    /// speed `|B'(u)|` (exact enough for a quadratic curve).
    pub fn arc_length(&self) -> f64 {
        match self.kind {
            PathKind::Stationary { .. } => 0.0,
            PathKind::Bezier { p0, p1, p2 } => {
                let a = (p1 - p0) * 2.0;
                let b = (p2 - p1 * 2.0 + p0) * 2.0;
                // composite rule over 8 panels of 4-point Gauss-Legendre
                const NODES: [f64; 4] = [
                    -0.861_136_311_594_053,
                    -0.339_981_043_584_856,
                    0.339_981_043_584_856,
                    0.861_136_311_594_053,
                ];
                const WEIGHTS: [f64; 4] = [
                    0.347_854_845_137_454,
                    0.652_145_154_862_546,
                    0.652_145_154_862_546,
                    0.347_854_845_137_454,
                ];
                let panels = 8;
                let h = 1.0 / panels as f64;
                let mut total = 0.0;
                for p in 0..panels {
                    let mid = (p as f64 + 0.5) * h;
                    for (x, w) in NODES.iter().zip(WEIGHTS) {
                        let u = mid + 0.5 * h * x;
                        total += w * 0.5 * h * (a + b * u).norm();
                    }
                }
                total
            }
        }
    }

    /// Mean speed over the path (m/s).
    pub fn mean_speed(&self) -> f64 {
        if self.duration_s > 0.0 {
            self.arc_length() / self.duration_s
        } else {
            0.0
        }
    }
}

/// `B(u) = (1-u)^2 P0 + 2(1-u)u P1 + u^2 P2`; stationary paths return their
/// point for any valid `u`.
pub fn bezier_point(path: &SourcePath, u: f64) -> Result<Vec3> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::invalid(format!("curve parameter {u} outside [0, 1]")));
    }
    Ok(path.at(u))
}

/// Positions `s(t_i)` with `t_i = (i-1)/(k-1) T`, `i = 1..k`. For `k = 1`
/// the single position is `s(0)`.
pub fn discretize_path(path: &SourcePath, k: usize) -> Result<Vec<Vec3>> {
    if k == 0 {
        return Err(Error::invalid("path discretisation needs k >= 1"));
    }
    if k == 1 {
        return Ok(vec![path.at(0.0)]);
    }
    Ok((0..k).map(|i| path.at(i as f64 / (k - 1) as f64)).collect())
}
