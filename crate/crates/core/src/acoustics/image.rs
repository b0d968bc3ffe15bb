use serde::{Deserialize, Serialize};

use super::{RoomSpec, Vec3};
use crate::error::Result;

/// One mirror image of the source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageSource {
    pub position: Vec3,
    /// Total number of wall reflections.
    pub generation: u32,
    /// Source orientation after the same sequence of mirrorings.
    pub mirrored_orientation: Vec3,
    /// `reflection_coeff ^ generation`.
    pub amplitude_factor: f64,
}

/// All images with at most `max_order` reflections.
///
/// Along each axis with room length `L` the images sit at
/// `2 n L + (1 - 2q) x` for integer `n` and parity `q` in {0, 1}; that image
/// has undergone `|2n - q|` reflections on that axis, and an odd `q` flips the
/// matching orientation component.
pub fn enumerate_image_sources(
    room: &RoomSpec,
    src_pos: Vec3,
    src_orient: Vec3,
    max_order: u32,
) -> Result<Vec<ImageSource>> {
    room.validate()?;
    room.require_inside(src_pos, "source")?;
    let order = max_order as i64;
    // per axis: (coordinate, orientation sign, reflections)
    let axis_images = |axis: usize| -> Vec<(f64, f64, u32)> {
        let len = room.dims.0[axis];
        let x = src_pos.0[axis];
        let mut v = Vec::new();
        for n in -order..=order {
            for q in 0..2i64 {
                let refl = (2 * n - q).unsigned_abs() as u32;
                if refl > max_order {
                    continue;
                }
                let sign = if q == 1 { -1.0 } else { 1.0 };
                v.push((2.0 * n as f64 * len + sign * x, sign, refl));
            }
        }
        v
    };
    let (xs, ys, zs) = (axis_images(0), axis_images(1), axis_images(2));
    let r = room.reflection_coeff;
    let mut images = Vec::new();
    for &(x, sx, gx) in &xs {
        for &(y, sy, gy) in &ys {
            if gx + gy > max_order {
                continue;
            }
            for &(z, sz, gz) in &zs {
                let generation = gx + gy + gz;
                if generation > max_order {
                    continue;
                }
                images.push(ImageSource {
                    position: Vec3::new(x, y, z),
                    generation,
                    mirrored_orientation: Vec3::new(src_orient.x() * sx, src_orient.y() * sy, src_orient.z() * sz),
                    amplitude_factor: r.powi(generation as i32),
                });
            }
        }
    }
    // direct path first, then by generation; stable within a generation
    images.sort_by_key(|im| im.generation);
    Ok(images)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room() -> RoomSpec {
        RoomSpec::new(Vec3::new(4.0, 5.0, 6.0), 0.7, 343.0, 16_000).unwrap()
    }

    #[test]
    fn order_zero_is_direct_path() {
        let src = Vec3::new(1.0, 2.0, 3.0);
        let ims = enumerate_image_sources(&room(), src, Vec3::new(1.0, 0.0, 0.0), 0).unwrap();
        assert_eq!(ims.len(), 1);
        assert_eq!(ims[0].position, src);
        assert_eq!(ims[0].generation, 0);
        assert_eq!(ims[0].amplitude_factor, 1.0);
    }

    #[test]
    fn first_order_has_one_image_per_wall() {
        let src = Vec3::new(1.0, 2.0, 3.0);
        let orient = Vec3::new(0.6, 0.8, 0.0);
        let ims = enumerate_image_sources(&room(), src, orient, 1).unwrap();
        assert_eq!(ims.len(), 7);
        assert!(ims.iter().any(|im| im.position == Vec3::new(-1.0, 2.0, 3.0)));
        assert!(ims.iter().any(|im| im.position == Vec3::new(7.0, 2.0, 3.0)));
        let wall_x0 = ims.iter().find(|im| im.position == Vec3::new(-1.0, 2.0, 3.0)).unwrap();
        assert_eq!(wall_x0.mirrored_orientation, Vec3::new(-0.6, 0.8, 0.0));
        assert_eq!(wall_x0.amplitude_factor, 0.7);
    }

    #[test]
    fn counts_match_lattice_formula() {
        // images with L1 reflection count <= N in 3D: (2N+1)(2N^2+2N+3)/3
        let src = Vec3::new(1.0, 2.0, 3.0);
        for n in 0..6u32 {
            let ims = enumerate_image_sources(&room(), src, Vec3::new(1.0, 0.0, 0.0), n).unwrap();
            let n = n as usize;
            assert_eq!(ims.len(), (2 * n + 1) * (2 * n * n + 2 * n + 3) / 3);
        }
    }

    #[test]
    fn amplitude_is_exact_power() {
        let ims = enumerate_image_sources(&room(), Vec3::new(1.0, 1.0, 1.0), Vec3::new(0.0, 0.0, 1.0), 4).unwrap();
        for im in ims {
            assert_eq!(im.amplitude_factor, 0.7f64.powi(im.generation as i32));
        }
    }

    #[test]
    fn source_outside_rejected() {
        assert!(enumerate_image_sources(&room(), Vec3::new(5.0, 1.0, 1.0), Vec3::new(1.0, 0.0, 0.0), 1).is_err());
    }
}
