//! Model parameters, the velocity-orthogonal noise primitives and the
//! closed-form scalar laws: the deterministic speed modulus and the memory
//! kernel of the characteristic-function equation.
//!
//! The speed modulus obeys `d|v|²/dt = -2a|v|² + 2b²` (the Itô correction of
//! the cross-product noise contributes `+2b²`), so
//!
//! ```text
//! |v(t)|² = e^{-2A(t)} |v(0)|² + 2 ∫_0^t b²(θ) e^{-2(A(t) - A(θ))} dθ,   A(t) = ∫_0^t a
//! ```
//!
//! and the memory kernel is
//!
//! ```text
//! f(t) = ∫_0^t b²(τ) exp{-∫_τ^t [2a(θ) + b²(θ)/|v(θ)|²] dθ} dτ.
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::CoefficientProfile;
use crate::quadrature::{gk15, integrate};
use crate::vec3::Vec3;

/// Full description of the dynamics: coefficients, the angular drift field
/// `H` of the `[v × H]` term, and the initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub coeffs: CoefficientProfile,
    #[serde(default)]
    pub h: Vec3,
    pub v0: Vec3,
    #[serde(default)]
    pub x0: Vec3,
}

impl ModelParams {
    pub fn new(coeffs: CoefficientProfile, h: Vec3, v0: Vec3, x0: Vec3) -> Result<Self> {
        let p = Self { coeffs, h, v0, x0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.coeffs.validate()?;
        for v in [self.h, self.v0, self.x0] {
            if !v.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        if self.v0.norm_sq() == 0.0 {
            return Err(Error::ZeroVelocity);
        }
        Ok(())
    }

    pub fn speed_law(&self) -> SpeedLaw {
        SpeedLaw { profile: self.coeffs.clone(), v0_sq: self.v0.norm_sq() }
    }
}

/// Deterministic `|v(t)|²` curve for a coefficient profile and initial speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedLaw {
    pub profile: CoefficientProfile,
    pub v0_sq: f64,
}

impl SpeedLaw {
    pub fn new(profile: CoefficientProfile, v0_sq: f64) -> Result<Self> {
        profile.validate()?;
        if !(v0_sq.is_finite() && v0_sq > 0.0) {
            return Err(Error::ZeroVelocity);
        }
        Ok(Self { profile, v0_sq })
    }

    pub fn speed_squared(&self, t: f64) -> Result<f64> {
        speed_squared(t, self)
    }

    /// `|v(t)|²` at every entry of an ascending time list, propagating
    /// interval by interval so long horizons with large friction stay finite.
    pub fn curve(&self, times: &[f64]) -> Result<Vec<f64>> {
        if let CoefficientProfile::Constant { .. } = self.profile {
            return times.iter().map(|&t| self.speed_squared(t)).collect();
        }
        let mut out = Vec::with_capacity(times.len());
        let mut prev_t = 0.0;
        let mut s = self.v0_sq;
        for &t in times {
            if t < prev_t {
                return Err(Error::InvalidParameter("times must be ascending".into()));
            }
            if t > prev_t {
                s = propagate_speed(&self.profile, s, prev_t, t)?;
                prev_t = t;
            }
            out.push(s);
        }
        Ok(out)
    }
}

/// `∫_lo^hi a` on a short interval (single Kronrod panel).
#[inline]
fn a_panel(profile: &CoefficientProfile, lo: f64, hi: f64) -> f64 {
    match profile {
        CoefficientProfile::Constant { a, .. } => a * (hi - lo),
        _ => gk15(&|s| profile.a(s), lo, hi).0,
    }
}

/// Carries `|v|²` from `t0` to `t1` with the integrating-factor form.
fn propagate_speed(profile: &CoefficientProfile, s0: f64, t0: f64, t1: f64) -> Result<f64> {
    let span = t1 - t0;
    let panels = ((span * profile.sup_a(t1) / 0.25).ceil() as usize).clamp(1, 1 << 16);
    let h = span / panels as f64;
    let mut s = s0;
    for k in 0..panels {
        let lo = t0 + k as f64 * h;
        let hi = if k + 1 == panels { t1 } else { lo + h };
        let decay = (-2.0 * integrate(|x| profile.a(x), lo, hi)?).exp();
        let source = integrate(|phi| profile.b_sq(phi) * (-2.0 * a_panel(profile, phi, hi)).exp(), lo, hi)?;
        s = s * decay + 2.0 * source;
    }
    Ok(s)
}

/// Noise kick `(b/|v|) (v × dw)`; exactly orthogonal to `v` up to rounding.
#[inline]
pub fn ortho_cross_noise(v: Vec3, dw: Vec3, b: f64) -> Result<Vec3> {
    let speed = v.norm();
    if speed == 0.0 {
        return Err(Error::ZeroVelocity);
    }
    Ok(v.cross(&dw) * (b / speed))
}

/// Orthogonalization operator in projection-minus-identity form:
/// `v (v, dξ)/|v|² - dξ`. The result is the *negative* of the component of
/// `dξ` orthogonal to `v`.
#[inline]
pub fn ortho_project(v: Vec3, dxi: Vec3) -> Result<Vec3> {
    let speed_sq = v.norm_sq();
    if speed_sq == 0.0 {
        return Err(Error::ZeroVelocity);
    }
    Ok(v * (v.dot(&dxi) / speed_sq) - dxi)
}

/// `|v(t)|²`. Constant profiles use the closed form, ratio-locked ones the
/// `b²/a = const` form with `∫a` by quadrature, general ones the nested
/// integral.
pub fn speed_squared(t: f64, law: &SpeedLaw) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("t must be >= 0, got {t}")));
    }
    match law.profile {
        CoefficientProfile::Constant { a, b } => {
            let eq = b * b / a;
            let decay = (-2.0 * a * t).exp();
            Ok(eq * (1.0 - decay) + decay * law.v0_sq)
        }
        CoefficientProfile::RatioLocked { ref a, v_eq_sq } => {
            let big_a = integrate(|s| a.eval(s), 0.0, t)?;
            let decay = (-2.0 * big_a).exp();
            Ok(v_eq_sq * (1.0 - decay) + decay * law.v0_sq)
        }
        CoefficientProfile::General { .. } => {
            if t == 0.0 {
                return Ok(law.v0_sq);
            }
            propagate_speed(&law.profile, law.v0_sq, 0.0, t)
        }
    }
}

/// `b²/a` for constant profiles, the pinned ratio for ratio-locked ones.
pub fn equilibrium_speed_sq(profile: &CoefficientProfile) -> Result<f64> {
    match *profile {
        CoefficientProfile::Constant { a, b } => Ok(b * b / a),
        CoefficientProfile::RatioLocked { v_eq_sq, .. } => Ok(v_eq_sq),
        CoefficientProfile::General { .. } => {
            Err(Error::NotApplicable("general profiles have no fixed equilibrium speed"))
        }
    }
}

/// Decay rate `2a(t) + b²(t)/|v(t)|²` inside the memory-kernel exponent.
#[inline]
pub fn kernel_decay_rate(profile: &CoefficientProfile, t: f64, speed_sq: f64) -> f64 {
    2.0 * profile.a(t) + profile.b_sq(t) / speed_sq
}

/// True when a constant profile starts on its equilibrium sphere, where the
/// kernel reduces to `b²/(3a) (1 - e^{-3at})`.
pub fn kernel_has_closed_form(profile: &CoefficientProfile, v0_sq: f64) -> bool {
    match *profile {
        CoefficientProfile::Constant { a, b } => {
            let eq = b * b / a;
            eq > 0.0 && (v0_sq - eq).abs() <= 1e-12 * eq
        }
        _ => false,
    }
}

/// Memory kernel `f(t)`; closed form on the equilibrium sphere of a constant
/// profile, nested quadrature otherwise.
pub fn memory_kernel_f(t: f64, profile: &CoefficientProfile, v0_sq: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("t must be >= 0, got {t}")));
    }
    if !(v0_sq.is_finite() && v0_sq > 0.0) {
        return Err(Error::ZeroVelocity);
    }
    if let CoefficientProfile::Constant { a, b } = *profile {
        if kernel_has_closed_form(profile, v0_sq) {
            return Ok(b * b / (3.0 * a) * (1.0 - (-3.0 * a * t).exp()));
        }
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    KernelQuadrature::new(profile, v0_sq, t).value()
}

/// Panelled evaluation of the nested kernel integral. Node values of `|v|²`
/// are propagated with adaptive quadrature; off-node values inside a panel
/// use single Kronrod panels from the node below.
struct KernelQuadrature<'a> {
    profile: &'a CoefficientProfile,
    v0_sq: f64,
    t: f64,
    step: f64,
    panels: usize,
}

impl<'a> KernelQuadrature<'a> {
    fn new(profile: &'a CoefficientProfile, v0_sq: f64, t: f64) -> Self {
        let rate = profile.sup_a(t) + {
            let eq = equilibrium_speed_sq(profile).unwrap_or(0.0);
            if eq > 0.0 { profile.sup_a(t) * (eq / v0_sq).max(1.0) } else { 0.0 }
        };
        let panels = ((t * rate / 0.1).ceil() as usize).clamp(16, 1 << 14);
        Self { profile, v0_sq, t, step: t / panels as f64, panels }
    }

    fn speed_off_node(&self, node_t: f64, node_s: f64, theta: f64) -> f64 {
        if theta == node_t {
            return node_s;
        }
        let p = self.profile;
        let source = gk15(&|phi| p.b_sq(phi) * (-2.0 * a_panel(p, phi, theta)).exp(), node_t, theta).0;
        node_s * (-2.0 * a_panel(p, node_t, theta)).exp() + 2.0 * source
    }

    fn value(&self) -> Result<f64> {
        let p = self.profile;
        let mut s = self.v0_sq;
        let mut f = 0.0;
        for k in 0..self.panels {
            let lo = k as f64 * self.step;
            let hi = if k + 1 == self.panels { self.t } else { lo + self.step };
            let rate = |theta: f64| kernel_decay_rate(p, theta, self.speed_off_node(lo, s, theta));
            let decay = (-integrate(&rate, lo, hi)?).exp();
            let source = integrate(|tau| p.b_sq(tau) * (-gk15(&rate, tau, hi).0).exp(), lo, hi)?;
            f = f * decay + source;
            s = propagate_speed(p, s, lo, hi)?;
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::TimeFn;
    use proptest::prelude::*;

    fn constant(a: f64, b: f64) -> CoefficientProfile {
        CoefficientProfile::constant(a, b).unwrap()
    }

    /// Independent oracle: RK4 on `ds/dt = -2a s + 2b²` with a fine step.
    fn speed_ode(profile: &CoefficientProfile, s0: f64, t: f64, steps: usize) -> f64 {
        let h = t / steps as f64;
        let rhs = |tt: f64, s: f64| -2.0 * profile.a(tt) * s + 2.0 * profile.b_sq(tt);
        let mut s = s0;
        for i in 0..steps {
            let tt = i as f64 * h;
            let k1 = rhs(tt, s);
            let k2 = rhs(tt + 0.5 * h, s + 0.5 * h * k1);
            let k3 = rhs(tt + 0.5 * h, s + 0.5 * h * k2);
            let k4 = rhs(tt + h, s + h * k3);
            s += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        s
    }

    #[test]
    fn cross_noise_examples() {
        let k = ortho_cross_noise(Vec3::new(1., 0., 0.), Vec3::new(0., 1., 0.), 1.0).unwrap();
        assert_eq!(k, Vec3::new(0., 0., 1.));
        let k = ortho_cross_noise(Vec3::new(2., 0., 0.), Vec3::new(0., 0., 3.), 1.0).unwrap();
        assert_eq!(k, Vec3::new(0., -3., 0.));
        let v = Vec3::new(0.3, -1.2, 2.0);
        assert_eq!(ortho_cross_noise(v, v, 0.7).unwrap(), Vec3::ZERO);
        assert_eq!(ortho_cross_noise(Vec3::ZERO, v, 1.0), Err(Error::ZeroVelocity));
    }

    #[test]
    fn project_examples() {
        let e1 = Vec3::new(1., 0., 0.);
        assert_eq!(ortho_project(e1, Vec3::new(5., 0., 0.)).unwrap(), Vec3::ZERO);
        assert_eq!(ortho_project(e1, Vec3::new(0., 2., 0.)).unwrap(), Vec3::new(0., -2., 0.));
        let r = ortho_project(Vec3::new(1., 1., 0.), e1).unwrap();
        assert_eq!(r, Vec3::new(-0.5, 0.5, 0.0));
        assert_eq!(r.dot(&Vec3::new(1., 1., 0.)), 0.0);
        assert_eq!(ortho_project(Vec3::ZERO, e1), Err(Error::ZeroVelocity));
    }

    #[test]
    fn speed_examples() {
        let law = SpeedLaw::new(constant(1.0, 1.0), 4.0).unwrap();
        assert_eq!(law.speed_squared(0.0).unwrap(), 4.0);
        let s1 = law.speed_squared(1.0).unwrap();
        let oracle = speed_ode(&law.profile, 4.0, 1.0, 20_000);
        assert!((s1 - oracle).abs() < 1e-12);
        assert!((s1 - 1.406_005_849).abs() < 1e-8);
        assert!((law.speed_squared(50.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ratio_locked_and_general_against_ode() {
        let a = TimeFn::Sine { offset: 1.5, amplitude: 0.7, omega: 2.0, phase: 0.3 };
        let locked = CoefficientProfile::RatioLocked { a: a.clone(), v_eq_sq: 2.0 };
        let general = CoefficientProfile::General {
            a: a.clone(),
            b: TimeFn::Relax { start: 0.5, end: 1.5, rate: 0.8 },
        };
        for profile in [locked, general] {
            let law = SpeedLaw::new(profile.clone(), 3.0).unwrap();
            for &t in &[0.1, 0.7, 2.5] {
                let q = law.speed_squared(t).unwrap();
                let o = speed_ode(&profile, 3.0, t, 40_000);
                assert!((q - o).abs() / o < 1e-10, "{profile:?} t={t}: {q} vs {o}");
            }
        }
    }

    #[test]
    fn curve_matches_pointwise() {
        let profile = CoefficientProfile::General {
            a: TimeFn::Exp { scale: 1.0, rate: 0.2 },
            b: TimeFn::Const { value: 0.8 },
        };
        let law = SpeedLaw::new(profile, 1.3).unwrap();
        let times = [0.0, 0.25, 0.25, 1.0, 3.0];
        let c = law.curve(&times).unwrap();
        for (t, s) in times.iter().zip(&c) {
            let p = law.speed_squared(*t).unwrap();
            assert!((s - p).abs() / p < 1e-11);
        }
    }

    #[test]
    fn equilibrium_examples() {
        assert_eq!(equilibrium_speed_sq(&constant(2.0, 2.0)).unwrap(), 2.0);
        let locked = CoefficientProfile::RatioLocked { a: TimeFn::Const { value: 1.0 }, v_eq_sq: 5.0 };
        assert_eq!(equilibrium_speed_sq(&locked).unwrap(), 5.0);
        assert_eq!(equilibrium_speed_sq(&constant(1.0, 0.0)).unwrap(), 0.0);
        let general = CoefficientProfile::General {
            a: TimeFn::Const { value: 1.0 },
            b: TimeFn::Const { value: 1.0 },
        };
        assert!(matches!(equilibrium_speed_sq(&general), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn kernel_examples() {
        let p = constant(1.0, 1.0);
        assert_eq!(memory_kernel_f(0.0, &p, 1.0).unwrap(), 0.0);
        assert!((memory_kernel_f(60.0, &p, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let f1 = memory_kernel_f(1.0, &p, 1.0).unwrap();
        assert!((f1 - 0.316_737_7).abs() < 1e-7);
        // Same dynamics through the general nested quadrature.
        let g = CoefficientProfile::General { a: TimeFn::Const { value: 1.0 }, b: TimeFn::Const { value: 1.0 } };
        let q = memory_kernel_f(1.0, &g, 1.0).unwrap();
        assert!((q - f1).abs() < 1e-8, "{q} vs {f1}");
    }

    #[test]
    fn ratio_locked_kernel_on_sphere() {
        // On the sphere the exponent is 3a(t), so f = (v_eq/3)(1 - e^{-3A(t)}).
        let a = TimeFn::Sine { offset: 1.0, amplitude: 0.4, omega: 1.3, phase: 0.0 };
        let p = CoefficientProfile::RatioLocked { a: a.clone(), v_eq_sq: 2.0 };
        for &t in &[0.3, 1.0, 2.2] {
            let big_a = integrate(|s| a.eval(s), 0.0, t).unwrap();
            let expect = 2.0 / 3.0 * (1.0 - (-3.0 * big_a).exp());
            let got = memory_kernel_f(t, &p, 2.0).unwrap();
            assert!((got - expect).abs() < 1e-8, "t={t}: {got} vs {expect}");
        }
    }

    #[test]
    fn kernel_off_sphere_against_ode() {
        // Differential form f' = b² - (2a + b²/|v|²) f, s' = -2a s + 2b².
        let p = constant(1.0, 1.0);
        let (t, steps) = (1.5, 30_000);
        let h = t / steps as f64;
        let rhs = |tt: f64, y: [f64; 2]| {
            [-2.0 * p.a(tt) * y[0] + 2.0 * p.b_sq(tt), p.b_sq(tt) - kernel_decay_rate(&p, tt, y[0]) * y[1]]
        };
        let mut y = [4.0, 0.0];
        for i in 0..steps {
            let tt = i as f64 * h;
            let add = |y: [f64; 2], k: [f64; 2], c: f64| [y[0] + c * k[0], y[1] + c * k[1]];
            let k1 = rhs(tt, y);
            let k2 = rhs(tt + 0.5 * h, add(y, k1, 0.5 * h));
            let k3 = rhs(tt + 0.5 * h, add(y, k2, 0.5 * h));
            let k4 = rhs(tt + h, add(y, k3, h));
            for j in 0..2 {
                y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
        let q = memory_kernel_f(t, &p, 4.0).unwrap();
        assert!((q - y[1]).abs() < 1e-9, "{q} vs {}", y[1]);
    }

    #[test]
    fn exponent_identity_on_sphere() {
        for &(a, b) in &[(1.0, 1.0), (2.5, 0.3), (0.1, 4.0)] {
            let p = constant(a, b);
            let eq = equilibrium_speed_sq(&p).unwrap();
            let rate = kernel_decay_rate(&p, 0.7, eq);
            assert!((rate - 3.0 * a).abs() <= 4.0 * f64::EPSILON * 3.0 * a);
        }
    }

    proptest! {
        #[test]
        fn noise_kick_is_orthogonal(
            v in prop::array::uniform3(-10.0f64..10.0),
            dw in prop::array::uniform3(-3.0f64..3.0),
            b in 0.0f64..5.0,
        ) {
            let v = Vec3::from(v);
            prop_assume!(v.norm() > 1e-6);
            let k = ortho_cross_noise(v, Vec3::from(dw), b).unwrap();
            prop_assert!(v.dot(&k).abs() <= 1e-12 * v.norm() * k.norm() + 1e-300);
            let pr = ortho_project(v, Vec3::from(dw)).unwrap();
            prop_assert!(v.dot(&pr).abs() <= 1e-12 * v.norm() * Vec3::from(dw).norm() + 1e-300);
        }

        #[test]
        fn attraction_bound(a in 0.05f64..5.0, b in 0.0f64..3.0, s0 in 0.01f64..10.0, t in 0.0f64..20.0) {
            let law = SpeedLaw::new(constant(a, b), s0).unwrap();
            let eq = b * b / a;
            let s = law.speed_squared(t).unwrap();
            let bound = (-2.0 * a * t).exp() * (s0 - eq).abs();
            prop_assert!((s - eq).abs() <= bound * (1.0 + 1e-12) + 1e-15 * eq.max(s0));
            prop_assert!(s > 0.0);
        }

        #[test]
        fn closed_form_matches_general_path(a in 0.2f64..3.0, b in 0.1f64..2.0, s0 in 0.1f64..5.0, t in 0.01f64..4.0) {
            let c = SpeedLaw::new(constant(a, b), s0).unwrap().speed_squared(t).unwrap();
            let g = CoefficientProfile::General { a: TimeFn::Const { value: a }, b: TimeFn::Const { value: b } };
            let q = SpeedLaw::new(g, s0).unwrap().speed_squared(t).unwrap();
            prop_assert!((c - q).abs() / c < 1e-8);
        }
    }
}
