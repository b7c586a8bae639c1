//! Langevin dynamics with random forcing orthogonal to the particle
//! velocity.
//!
//! The crate integrates
//!
//! ```text
//! dv = -a(t) v dt + [v × H] dt + b(t)/|v| [v × dw],     dx = v dt,
//! ```
//!
//! evaluates the closed-form speed and memory-kernel laws, solves the
//! second-order characteristic-function equation mode by mode, and compares
//! Monte-Carlo ensembles with those predictions.

pub mod analysis;
pub mod error;
pub mod model;
pub mod profile;
pub mod quadrature;
pub mod rng;
pub mod sim;
pub mod spectral;
pub mod vec3;

pub use error::{Error, Result};
pub use model::{ModelParams, SpeedLaw};
pub use profile::{CoefficientProfile, TimeFn};
pub use vec3::Vec3;
