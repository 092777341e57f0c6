//! Faster-than-Nyquist transceiver laboratory.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases.

// Negated comparisons reject NaN on purpose; index loops mirror the maths.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod channel;
pub mod coding;
pub mod detector;
pub mod error;
pub mod modem;
pub mod neural;
pub mod numeric;
pub mod waveform;

pub use error::{Error, Result};
pub use numeric::Real;

pub use num_complex::Complex;

/// Complex baseband sample in double precision.
pub type C64 = Complex<f64>;

pub type Pulse64 = waveform::Pulse<f64>;
pub type IsiTaps64 = waveform::IsiTaps<f64>;
pub type Constellation64 = modem::Constellation<f64>;
pub type Mlp64 = neural::Mlp<f64>;
pub type Mlp32 = neural::Mlp<f32>;
pub type AdamState64 = neural::AdamState<f64>;
pub type Dataset64 = detector::SlidingWindowDataset<f64>;
pub type DlDetector64 = detector::DlDetector<f64>;
pub type DlDetector32 = detector::DlDetector<f32>;
pub type FtnLink64 = channel::FtnLink<f64>;
