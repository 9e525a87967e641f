//! RIS phase-shift design for mmWave MIMO without explicit channel estimation.
//!
//! The crate simulates Rician transmitter → surface → receiver channels,
//! receives codebook-swept pilots, and trains a phase-selection network either
//! against the true rate (known channels) or against Capacity-Net, a learned
//! surrogate of the rate that only needs the received pilots.

pub mod baselines;
pub mod capacity_net;
pub mod capnet_unsup;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod nn;
pub mod numerics;
mod parallel;
pub mod phase_net;
pub mod pilots;

pub use error::{Error, Result};
