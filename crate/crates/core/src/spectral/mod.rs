//! Characteristic-function layer: the per-wavevector second-order ODE,
//! density reconstruction by Fourier inversion, and the closed-form
//! diffusion and wave approximations.

mod grid;
mod kernels;
mod mode;

pub use grid::{
    averaged_density_equation_rhs, density_from_modes, densities_from_modes, read_density_binary,
    write_density_binary, write_density_csv, DensityField, SpectralGrid, DENSITY_MAGIC,
};
pub use kernels::{averaged_rhs_coefficient, diffusion_kernel, wave_solution, DiffusionKernel};
pub use mode::{mode_ode_solve, ModeBasis, ModeSolver, ModeState};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::CoefficientProfile;

/// Small-parameter scaling of the coefficients.
///
/// Diffusion regime: `a = ã/ε`, `b = b̃/ε`. Wave regime: `a = ε a₀`,
/// `b = b₀ √ε`. `base_a`/`base_b` hold `ã, b̃` or `a₀, b₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeParams {
    pub epsilon: f64,
    pub base_a: f64,
    pub base_b: f64,
}

impl RegimeParams {
    pub fn new(epsilon: f64, base_a: f64, base_b: f64) -> Result<Self> {
        let r = Self { epsilon, base_a, base_b };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("epsilon must be > 0".into()));
        }
        if !(self.base_a.is_finite() && self.base_a > 0.0) {
            return Err(Error::InvalidParameter("base_a must be > 0".into()));
        }
        if !(self.base_b.is_finite() && self.base_b >= 0.0) {
            return Err(Error::InvalidParameter("base_b must be >= 0".into()));
        }
        Ok(())
    }

    /// `|ṽ|² = b̃²/ã`, the ε-free speed scale of either regime.
    pub fn base_speed_sq(&self) -> f64 {
        self.base_b * self.base_b / self.base_a
    }

    pub fn diffusion_profile(&self) -> CoefficientProfile {
        CoefficientProfile::Constant { a: self.base_a / self.epsilon, b: self.base_b / self.epsilon }
    }

    pub fn wave_profile(&self) -> CoefficientProfile {
        CoefficientProfile::Constant { a: self.epsilon * self.base_a, b: self.base_b * self.epsilon.sqrt() }
    }
}
