//! Closed-form limits: the anisotropic Gaussian of the strong-friction
//! regime and rigid transport in the weak-friction regime.

use std::f64::consts::PI;

use super::RegimeParams;
use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// Gaussian with diffusivity `2|v|²/(3a)` along the initial direction and
/// `|v|²/(3a)` across it, started from a point at `x0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionKernel {
    pub x0: Vec3,
    pub dir: Vec3,
    pub d_par: f64,
    pub d_perp: f64,
    pub t: f64,
}

impl DiffusionKernel {
    pub fn new(t: f64, x0: Vec3, v0_dir: Vec3, v_eq_sq: f64, a: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidParameter("diffusion kernel needs t > 0".into()));
        }
        if !(a.is_finite() && a > 0.0 && v_eq_sq.is_finite() && v_eq_sq > 0.0) {
            return Err(Error::InvalidParameter("diffusion kernel needs a > 0 and |v|² > 0".into()));
        }
        if !x0.is_finite() {
            return Err(Error::NonFinite);
        }
        let dir = v0_dir.normalized()?;
        let d_perp = v_eq_sq / (3.0 * a);
        Ok(Self { x0, dir, d_par: 2.0 * d_perp, d_perp, t })
    }

    pub fn variance_parallel(&self) -> f64 {
        2.0 * self.d_par * self.t
    }

    pub fn variance_transverse(&self) -> f64 {
        2.0 * self.d_perp * self.t
    }

    pub fn density(&self, x: Vec3) -> f64 {
        let d = x - self.x0;
        let along = d.dot(&self.dir);
        let across_sq = (d.norm_sq() - along * along).max(0.0);
        let (sp, st) = (self.variance_parallel(), self.variance_transverse());
        let norm = (2.0 * PI).powf(1.5) * sp.sqrt() * st;
        (-along * along / (2.0 * sp) - across_sq / (2.0 * st)).exp() / norm
    }

    /// Probability of the axis-aligned box `[lo, hi]`: exact via `erf` when
    /// the axis of anisotropy is a coordinate axis, otherwise by tensor
    /// Gauss-Legendre quadrature on the box.
    pub fn box_mass(&self, lo: Vec3, hi: Vec3) -> f64 {
        let dir = self.dir.to_array();
        if let Some(axis) = dir.iter().position(|c| c.abs() == 1.0) {
            let (l, h, c) = (lo.to_array(), hi.to_array(), self.x0.to_array());
            return (0..3)
                .map(|k| {
                    let var = if k == axis { self.variance_parallel() } else { self.variance_transverse() };
                    let s = (2.0 * var).sqrt();
                    0.5 * (libm::erf((h[k] - c[k]) / s) - libm::erf((l[k] - c[k]) / s))
                })
                .product();
        }
        let (l, h) = (lo.to_array(), hi.to_array());
        let half: Vec<f64> = (0..3).map(|k| 0.5 * (h[k] - l[k])).collect();
        let mid: Vec<f64> = (0..3).map(|k| 0.5 * (h[k] + l[k])).collect();
        let mut sum = 0.0;
        for (xi, wi) in GL8 {
            for (xj, wj) in GL8 {
                for (xk, wk) in GL8 {
                    let p = Vec3::new(mid[0] + half[0] * xi, mid[1] + half[1] * xj, mid[2] + half[2] * xk);
                    sum += wi * wj * wk * self.density(p);
                }
            }
        }
        sum * half[0] * half[1] * half[2]
    }
}

const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

/// Point evaluation of [`DiffusionKernel`].
pub fn diffusion_kernel(t: f64, x: Vec3, x0: Vec3, v0_dir: Vec3, v_eq_sq: f64, a: f64) -> Result<f64> {
    Ok(DiffusionKernel::new(t, x0, v0_dir, v_eq_sq, a)?.density(x))
}

/// Initial profile carried rigidly at velocity `v0`: `ρ0(x - v0 t)`.
pub fn wave_solution(t: f64, x: Vec3, initial_density: &dyn Fn(Vec3) -> f64, v0: Vec3) -> f64 {
    initial_density(x - v0 * t)
}

/// Coefficient `c(t)` of `∇²ρ` in the velocity-averaged equation,
/// `(|ṽ|²/3)(2 - e^{-3ãt/ε})`.
pub fn averaged_rhs_coefficient(t: f64, regime: &RegimeParams) -> f64 {
    regime.base_speed_sq() / 3.0 * (2.0 - (-3.0 * regime.base_a * t / regime.epsilon).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_with;

    fn kernel() -> DiffusionKernel {
        DiffusionKernel::new(0.7, Vec3::new(0.2, -0.1, 0.3), Vec3::new(1.0, 0.0, 0.0), 1.5, 2.0).unwrap()
    }

    #[test]
    fn variances_follow_the_exponent() {
        let k = kernel();
        // exp{-(3a/2|v|²)(x1)²/4t - (3a/|v|²)(x2²+x3²)/4t}
        let (a, v2, t) = (2.0, 1.5, 0.7);
        assert!((k.variance_parallel() - 2.0 * (2.0 * v2 / (3.0 * a)) * t).abs() < 1e-15);
        assert!((k.variance_transverse() - 2.0 * (v2 / (3.0 * a)) * t).abs() < 1e-15);
        assert_eq!(k.variance_parallel() / k.variance_transverse(), 2.0);
        let d = Vec3::new(0.4, 0.3, -0.2);
        let expo = -(3.0 * a / (2.0 * v2)) * d.x1 * d.x1 / (4.0 * t)
            - (3.0 * a / v2) * (d.x2 * d.x2 + d.x3 * d.x3) / (4.0 * t);
        let ratio = k.density(k.x0 + d) / k.density(k.x0);
        assert!((ratio.ln() - expo).abs() < 1e-12);
    }

    #[test]
    fn integrates_to_one() {
        let k = kernel();
        let s = 8.0 * k.variance_parallel().sqrt();
        let inner = |x1: f64, x2: f64| {
            integrate_with(|x3| k.density(Vec3::new(x1, x2, x3)), k.x0.x3 - s, k.x0.x3 + s, 1e-13, 1e-11).unwrap()
        };
        let mid = |x1: f64| integrate_with(|x2| inner(x1, x2), k.x0.x2 - s, k.x0.x2 + s, 1e-12, 1e-10).unwrap();
        let total = integrate_with(mid, k.x0.x1 - s, k.x0.x1 + s, 1e-11, 1e-9).unwrap();
        assert!((total - 1.0).abs() < 1e-8, "{total}");
    }

    #[test]
    fn frame_independence() {
        let along2 = DiffusionKernel::new(0.5, Vec3::ZERO, Vec3::new(0.0, 1.0, 0.0), 1.0, 1.0).unwrap();
        let along1 = DiffusionKernel::new(0.5, Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), 1.0, 1.0).unwrap();
        for p in [Vec3::new(0.3, -0.7, 0.1), Vec3::new(1.2, 0.4, -0.9)] {
            let permuted = Vec3::new(p.x2, p.x1, p.x3);
            assert!((along2.density(p) - along1.density(permuted)).abs() <= 1e-14);
        }
    }

    #[test]
    fn box_mass_routes_agree() {
        let aligned = kernel();
        let tilted = DiffusionKernel { dir: Vec3::new(1.0, 1e-9, 0.0).normalized().unwrap(), ..aligned };
        let (lo, hi) = (Vec3::new(-0.2, -0.4, 0.1), Vec3::new(0.5, 0.2, 0.6));
        assert!((aligned.box_mass(lo, hi) - tilted.box_mass(lo, hi)).abs() < 1e-7);
    }

    #[test]
    fn wave_translation_composes() {
        let rho0 = |x: Vec3| (-x.norm_sq()).exp();
        let v0 = Vec3::new(0.3, -1.0, 0.5);
        let x = Vec3::new(0.1, 0.2, 0.3);
        assert_eq!(wave_solution(0.0, x, &rho0, v0), rho0(x));
        let once = wave_solution(1.5, x, &rho0, v0);
        let shifted = |y: Vec3| wave_solution(0.5, y, &rho0, v0);
        assert!((wave_solution(1.0, x, &shifted, v0) - once).abs() < 1e-15);
    }

    #[test]
    fn averaged_coefficient_limits() {
        let r = RegimeParams::new(1e-6, 1.0, 2.0).unwrap();
        let vt = r.base_speed_sq();
        assert!((averaged_rhs_coefficient(1.0, &r) - 2.0 * vt / 3.0).abs() < 1e-15);
        assert!((averaged_rhs_coefficient(0.0, &r) - vt / 3.0).abs() < 1e-15);
    }
}
