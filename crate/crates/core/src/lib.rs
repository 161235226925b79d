//! Learned latent observer for a gimballed LED optical link.
//!
//! A transmitter LED rotates toward a pair of photodiode receivers; the only
//! measurements are the two received powers, which depend on the pointing
//! angle through a double-Gaussian radiation pattern and on the link distance
//! through attenuation. This crate estimates the full kinematic state (angle
//! and angular velocity) from those powers alone:
//!
//! - [`channel`]: radiation pattern, received power, discrete kinematics and
//!   its exact inverse, and the noise model.
//! - [`net`]: single-hidden-layer tanh networks with hand-derived gradients
//!   and an Adam optimizer; plain-text checkpoints.
//! - [`kkl`]: the stable latent filter, the input correction, contraction
//!   diagnostics, and a series oracle for the exact coordinate map.
//! - [`datagen`]: sampled state-transition datasets and their CSV form.
//! - [`training`]: the two-phase procedure that fits the encoder to the
//!   filter dynamics and then fits a decoder back to the state.
//! - [`eval`]: closed-trajectory scenarios, error metrics, and the distance
//!   sweep used to study robustness.

pub mod channel;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod kkl;
pub mod net;
pub mod training;

pub use error::{CoreError, Result};
