//! Interference alignment (IA) in K-user MIMO interference channels with
//! channel knowledge acquired through pilot training and analog feedback.
//!
//! The crate is organized bottom-up:
//!
//! - [`channel`]: network, link-budget and fading-frame types plus seeded
//!   i.i.d. Rayleigh channel generation.
//! - [`ia`]: alternating leakage minimization, per-stream zero-forcing
//!   combiners and effective direct gains.
//! - [`rates`]: exponential integral and closed-form average sum-rates
//!   under perfect and imperfect CSI.
//! - [`csi`]: the three-phase CSI acquisition simulator and the closed-form
//!   error variance with its optimal training/feedback split.
//! - [`overhead`]: effective sum-rate, its small-Doppler expansion and the
//!   optimal overhead fraction.
//! - [`cluster`]: cooperation cluster sizing.
//! - [`pipeline`]: end-to-end Monte Carlo drivers.
//! - [`experiment`]: sweep/validate harness behind the `ia-overhead` CLI.

pub mod channel;
pub mod cluster;
pub mod csi;
pub mod error;
pub mod experiment;
pub mod ia;
pub mod linalg;
pub mod overhead;
pub mod pipeline;
pub mod rates;
pub mod rng;
pub mod stats;

pub use channel::{ChannelSet, FadingFrame, LinkBudget, NetworkConfig};
pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Complex dense matrix used throughout the crate.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Complex column vector.
pub type CVector = nalgebra::DVector<Complex64>;
