//! OFDM radar sensing beyond the cyclic-prefix limited range.
//!
//! The crate models ISI/ICI raised by echoes delayed past the CP, forms
//! range-Doppler images, detects and refines targets with a chirp-Z zoom,
//! and cancels strong interferers so weak distant targets become visible.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod detect;
pub mod error;
pub mod estimate;
pub mod fft;
pub mod grid;
pub mod experiments;
pub mod io;
pub mod linkbudget;
pub mod mitigate;
pub mod rxproc;
pub mod scenario;
pub mod units;
pub mod waveform;

pub use error::{Error, Result};
pub use grid::ComplexGrid;
