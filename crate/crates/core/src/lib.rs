//! Reduced-dimension multiuser detection (RD-MUD).
//!
//! A synchronous BPSK multiuser receiver whose front-end correlates the
//! received signal against `M < N` correlating signals built from the
//! biorthogonal waveforms of the `N` user signatures. The crate provides
//!
//! * [`waveforms`]: sampled signature waveforms, Gram matrix, biorthogonal
//!   signals and a waveform-domain correlator bank,
//! * [`design`]: the coefficient matrix `A` (partial DFT, identity, custom)
//!   and its coherence,
//! * [`model`]: scenarios, transmit states, colored noise and the vector
//!   front-end output `y = A R b + w`,
//! * [`detectors`]: RDD, RDDF (decision-feedback OMP), RD-MMSE, exhaustive ML
//!   and the conventional decorrelating detector,
//! * [`analysis`]: the coherence conditions, error-probability bound and
//!   correlator-count lower bounds,
//! * [`harness`]: a seeded, parallel Monte Carlo engine with CSV output.

pub mod analysis;
pub mod config;
pub mod design;
pub mod detectors;
mod error;
pub mod harness;
pub mod model;
pub mod rng;
pub mod waveforms;

pub use error::{Error, Result};

pub use nalgebra::Complex;

/// Complex double used for front-end outputs and coefficient matrices.
pub type C64 = Complex<f64>;
