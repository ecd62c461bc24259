//! Numerical core for a simulated flexible EIT tactile sensor.
//!
//! The crate is `no_std` (it needs `alloc`) and carries no IO. It covers the
//! whole pipeline from a triangulated sensor layer to mapped touch actions:
//!
//! * [`mesh`]: structured triangulation of the square conductive layer and its
//!   boundary electrodes, plus per-element conductivity fields.
//! * [`protocol`]: adjacent-drive / adjacent-measurement schedules.
//! * [`forward`]: P1 finite-element conduction solver and measurement frames.
//! * [`sensitivity`]: adjoint sensitivity (Jacobian) matrix.
//! * [`inverse`]: Tikhonov and L1 (ISTA) difference reconstruction.
//! * [`phantom`]: touch phantoms and lattice channel patterns.
//! * [`metrics`]: relative voltage change, blob detection, localization error.
//! * [`hmi`]: touch state extraction, debounced events and action mapping.
#![no_std]
// `!(x > 0.0)` is the NaN-rejecting form of every positivity check here.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod forward;
pub mod hmi;
pub mod inverse;
pub mod linalg;
pub mod mesh;
pub mod metrics;
pub mod phantom;
pub mod protocol;
pub mod sensitivity;

pub use error::{Error, Result};
pub use forward::{MeasurementFrame, PotentialField};
pub use inverse::{ReconstructionImage, ReconstructionParams};
pub use mesh::{ConductivityField, Mesh};
pub use protocol::Protocol;
pub use sensitivity::SensitivityMatrix;

/// Default drive current in amperes.
pub const DEFAULT_CURRENT: f64 = 1.0e-3;
/// Conductivity of the untouched sensing layer, S/m.
pub const BACKGROUND_CONDUCTIVITY: f64 = 1.0;
