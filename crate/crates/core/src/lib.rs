//! Simulation, classical estimation and scoring for acoustic time delay
//! estimation.
//!
//! The crate is split along the data flow:
//!
//! * [`dsp`] holds the signal primitives (FFT, convolution, fractional
//!   delay, resampling, noise, WAV I/O).
//! * [`acoustics`] simulates shoebox rooms with the image source method,
//!   including directional sources/microphones and moving sources.
//! * [`dataset`] samples scenarios, renders them and persists labelled
//!   microphone pairs.
//! * [`gcc`] is the GCC-PHAT reference estimator.
//! * [`eval`] scores estimators (inlier curves, sweeps, sliding windows).

pub mod acoustics;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod estimator;
pub mod eval;
pub mod gcc;
pub mod seed;

pub use error::{Error, Result};
pub use estimator::{PairInput, TdoaEstimate, TdoaEstimator};
