//! Shoebox room simulation: image-source impulse responses with
//! directional sources and microphones, and moving-source rendering by
//! segmented convolution.

mod directivity;
mod geometry;
mod image;
mod path;
mod render;
mod rir;
mod room;

pub use directivity::{subcardioid_gain, Directivity};
pub use geometry::{tdoa_ground_truth, Vec3};
pub use image::{enumerate_image_sources, ImageSource};
pub use path::{bezier_point, discretize_path, PathKind, SourcePath};
pub use render::{render_moving_source, render_moving_source_multi, Microphone, RenderSettings};
pub use rir::{compute_rir, image_arrivals, render_arrivals, Arrival, MIN_DISTANCE_M};
pub use room::{reflection_to_t60, t60_to_reflection, RoomSpec, DEFAULT_SPEED_OF_SOUND};
