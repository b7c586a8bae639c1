//! Per-wavevector solution of
//!
//! ```text
//! Ψ'' + a(t) Ψ' = -(|λ|² f(t) + (λ, v0)²) Ψ,   Ψ(0) = e^{i(λ,x0)},   Ψ'(0) = i(λ, v0) Ψ(0).
//! ```
//!
//! The coefficients are real and depend on `λ` only through `|λ|²` and
//! `(λ, v0)²`, so each mode is assembled from a real fundamental pair
//! `A` (`A(0)=1, A'(0)=0`) and `B` (`B(0)=0, B'(0)=1`):
//! `Ψ = Ψ(0) (A + i (λ,v0) B)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{kernel_decay_rate, kernel_has_closed_form, ModelParams};
use crate::profile::CoefficientProfile;
use crate::vec3::Vec3;

/// Largest accepted change of `Ψ` at the final time when the step is halved.
pub const HALVING_TOL: f64 = 1e-8;
const MAX_TOTAL_STEPS: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeState {
    pub lambda: Vec3,
    pub t: f64,
    pub psi: Complex64,
    pub dpsi_dt: Complex64,
}

/// Fundamental pair sampled on the solver's time grid, as `[value, derivative]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeBasis {
    pub even: Vec<[f64; 2]>,
    pub odd: Vec<[f64; 2]>,
}

impl ModeBasis {
    /// `(Ψ, Ψ')` at grid index `i` for projection `q = (λ, v0)` and initial
    /// value `psi0`.
    #[inline]
    pub fn psi(&self, i: usize, q: f64, psi0: Complex64) -> (Complex64, Complex64) {
        let [a, da] = self.even[i];
        let [b, db] = self.odd[i];
        (psi0 * Complex64::new(a, q * b), psi0 * Complex64::new(da, q * db))
    }
}

#[derive(Debug, Clone, Copy)]
enum KernelRoute {
    /// `f = coef (1 - e^{-rate t})`
    ClosedForm { coef: f64, rate: f64 },
    /// `f` and `|v|²` integrated alongside: `f' = b² - (2a + b²/|v|²) f`,
    /// `(|v|²)' = -2a|v|² + 2b²`.
    Coupled,
}

/// Solver bound to one model and one output time grid.
#[derive(Debug, Clone)]
pub struct ModeSolver {
    profile: CoefficientProfile,
    v0_sq: f64,
    route: KernelRoute,
    t_grid: Vec<f64>,
    kernel_bound: f64,
    sup_a: f64,
}

impl ModeSolver {
    pub fn new(params: &ModelParams, t_grid: &[f64]) -> Result<Self> {
        params.validate()?;
        if params.h.norm_sq() != 0.0 {
            return Err(Error::NotApplicable("the characteristic-function equation assumes H = 0"));
        }
        if t_grid.is_empty() || t_grid[0] != 0.0 {
            return Err(Error::InvalidParameter("t_grid must start at 0".into()));
        }
        if t_grid.windows(2).any(|w| !(w[1] > w[0])) || !t_grid.iter().all(|t| t.is_finite()) {
            return Err(Error::InvalidParameter("t_grid must be strictly increasing".into()));
        }
        let profile = params.coeffs.clone();
        let v0_sq = params.v0.norm_sq();
        let t_max = *t_grid.last().unwrap();
        let route = match profile {
            CoefficientProfile::Constant { a, b } if kernel_has_closed_form(&profile, v0_sq) => {
                KernelRoute::ClosedForm { coef: b * b / (3.0 * a), rate: 3.0 * a }
            }
            _ => KernelRoute::Coupled,
        };
        let kernel_bound = match route {
            KernelRoute::ClosedForm { coef, .. } => coef,
            KernelRoute::Coupled => profile.sup_b_sq(t_max) / (2.0 * profile.inf_a()),
        };
        let sup_a = profile.sup_a(t_max);
        Ok(Self { profile, v0_sq, route, t_grid: t_grid.to_vec(), kernel_bound, sup_a })
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    /// Fundamental pair for `|λ|² = lambda_sq` and `(λ, v0)² = proj_sq`,
    /// refined by step halving until the final-time change is below
    /// [`HALVING_TOL`].
    pub fn basis(&self, lambda_sq: f64, proj_sq: f64) -> Result<ModeBasis> {
        let n = self.t_grid.len();
        if lambda_sq == 0.0 && proj_sq == 0.0 {
            return Ok(ModeBasis { even: vec![[1.0, 0.0]; n], odd: self.free_odd() });
        }
        let t_max = *self.t_grid.last().unwrap();
        if t_max == 0.0 {
            return Ok(ModeBasis { even: vec![[1.0, 0.0]], odd: vec![[0.0, 1.0]] });
        }
        let omega = (proj_sq + lambda_sq * self.kernel_bound).sqrt();
        let rate = omega.max(self.sup_a).max(1e-300);
        let h0 = (0.1 / rate).min(t_max / 8.0);
        let base: Vec<usize> = self
            .t_grid
            .windows(2)
            .map(|w| ((w[1] - w[0]) / h0).ceil().max(1.0) as usize)
            .collect();
        let base_total: usize = base.iter().sum();

        let q = proj_sq.sqrt();
        let mut coarse = self.integrate(lambda_sq, proj_sq, &base, 0);
        let mut level = 1u32;
        loop {
            let fine = self.integrate(lambda_sq, proj_sq, &base, level);
            let (c, f) = (coarse.last().unwrap(), fine.last().unwrap());
            let change = ((c[0] - f[0]).powi(2) + proj_sq * (c[2] - f[2]).powi(2)).sqrt();
            let change = change.max(((c[1] - f[1]).powi(2) + (q * (c[3] - f[3])).powi(2)).sqrt() * 0.0);
            if change < HALVING_TOL && change.is_finite() {
                return Ok(ModeBasis {
                    even: fine.iter().map(|y| [y[0], y[1]]).collect(),
                    odd: fine.iter().map(|y| [y[2], y[3]]).collect(),
                });
            }
            if base_total << (level + 1) > MAX_TOTAL_STEPS {
                let min_step = t_max / (base_total << level) as f64;
                return Err(Error::StepSizeFailure { min_step, change });
            }
            coarse = fine;
            level += 1;
        }
    }

    /// Odd solution when the right-hand side vanishes: `B' = e^{-∫a}`.
    fn free_odd(&self) -> Vec<[f64; 2]> {
        match self.profile {
            CoefficientProfile::Constant { a, .. } => self
                .t_grid
                .iter()
                .map(|&t| {
                    let e = (-a * t).exp();
                    [(1.0 - e) / a, e]
                })
                .collect(),
            _ => {
                let base: Vec<usize> = self
                    .t_grid
                    .windows(2)
                    .map(|w| ((w[1] - w[0]) * self.sup_a / 0.01).ceil().max(1.0) as usize)
                    .collect();
                self.integrate(0.0, 0.0, &base, 1).iter().map(|y| [y[2], y[3]]).collect()
            }
        }
    }

    /// Classical RK4 on `[A, A', B, B', |v|², f]` with `base[i] << level`
    /// equal steps inside grid interval `i`. Returns the state at every grid
    /// time.
    fn integrate(&self, lambda_sq: f64, proj_sq: f64, base: &[usize], level: u32) -> Vec<[f64; 4]> {
        let p = &self.profile;
        let rhs = |t: f64, y: &[f64; 6]| -> [f64; 6] {
            let a = p.a(t);
            let (f, ds, df) = match self.route {
                KernelRoute::ClosedForm { coef, rate } => (coef * (1.0 - (-rate * t).exp()), 0.0, 0.0),
                KernelRoute::Coupled => {
                    let b2 = p.b_sq(t);
                    (y[5], -2.0 * a * y[4] + 2.0 * b2, b2 - kernel_decay_rate(p, t, y[4]) * y[5])
                }
            };
            let k = lambda_sq * f + proj_sq;
            [y[1], -a * y[1] - k * y[0], y[3], -a * y[3] - k * y[2], ds, df]
        };
        let mut y = [1.0, 0.0, 0.0, 1.0, self.v0_sq, 0.0];
        let mut out = Vec::with_capacity(self.t_grid.len());
        out.push([y[0], y[1], y[2], y[3]]);
        for (i, w) in self.t_grid.windows(2).enumerate() {
            let m = base[i] << level;
            let h = (w[1] - w[0]) / m as f64;
            for s in 0..m {
                let t = w[0] + s as f64 * h;
                let k1 = rhs(t, &y);
                let k2 = rhs(t + 0.5 * h, &axpy(&y, &k1, 0.5 * h));
                let k3 = rhs(t + 0.5 * h, &axpy(&y, &k2, 0.5 * h));
                let k4 = rhs(t + h, &axpy(&y, &k3, h));
                for j in 0..6 {
                    y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
                }
            }
            out.push([y[0], y[1], y[2], y[3]]);
        }
        out
    }

    /// Mode states for wavevector `lambda` at every grid time.
    pub fn solve(&self, lambda: Vec3, x0: Vec3, v0: Vec3) -> Result<Vec<ModeState>> {
        let q = lambda.dot(&v0);
        let basis = self.basis(lambda.norm_sq(), q * q)?;
        let psi0 = Complex64::from_polar(1.0, lambda.dot(&x0));
        Ok(self
            .t_grid
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let (psi, dpsi_dt) = basis.psi(i, q, psi0);
                ModeState { lambda, t, psi, dpsi_dt }
            })
            .collect())
    }
}

#[inline]
fn axpy(y: &[f64; 6], k: &[f64; 6], h: f64) -> [f64; 6] {
    let mut o = *y;
    for j in 0..6 {
        o[j] += h * k[j];
    }
    o
}

/// Characteristic function `Ψ_t(λ)` of the position and its time derivative
/// on `t_grid`.
pub fn mode_ode_solve(lambda: Vec3, params: &ModelParams, t_grid: &[f64]) -> Result<Vec<ModeState>> {
    ModeSolver::new(params, t_grid)?.solve(lambda, params.x0, params.v0)
}
