//! Noise-as-resource simulation of open spin-boson dynamics.
//!
//! A target bath spectral function is coarse-grained into damped Lorentzian
//! pseudo-modes, each pseudo-mode becomes one or more noisy auxiliary qubits,
//! and a Trotter circuit is tuned so that the hardware noise of those qubits
//! supplies exactly the pseudo-mode damping. The crate contains every stage of
//! that pipeline plus the exact master-equation reference used to check it.

pub mod analysis;
pub mod circuit;
pub mod coarse_grain;
pub mod effective_noise;
pub mod error;
pub mod lindblad;
pub mod linalg;
pub mod noisy_sim;
pub mod observable;
pub mod spectral;
pub mod spin_model;

pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};
