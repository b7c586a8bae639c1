//! Time-dependent friction and noise coefficients `a(t)`, `b(t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar function of time from a small closed family, so that profiles stay
/// serializable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fn", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TimeFn {
    /// `value`
    Const { value: f64 },
    /// `offset + amplitude * sin(omega * t + phase)`
    Sine {
        offset: f64,
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `scale * exp(rate * t)`
    Exp { scale: f64, rate: f64 },
    /// `end + (start - end) * exp(-rate * t)`, `rate >= 0`
    Relax { start: f64, end: f64, rate: f64 },
}

impl TimeFn {
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeFn::Const { value } => value,
            TimeFn::Sine { offset, amplitude, omega, phase } => {
                offset + amplitude * (omega * t + phase).sin()
            }
            TimeFn::Exp { scale, rate } => scale * (rate * t).exp(),
            TimeFn::Relax { start, end, rate } => end + (start - end) * (-rate * t).exp(),
        }
    }

    /// Upper bound on `[0, t_max]`.
    pub fn sup_on(&self, t_max: f64) -> f64 {
        match *self {
            TimeFn::Const { value } => value,
            TimeFn::Sine { offset, amplitude, .. } => offset + amplitude.abs(),
            TimeFn::Exp { .. } => self.eval(0.0).max(self.eval(t_max)),
            TimeFn::Relax { start, end, .. } => start.max(end),
        }
    }

    /// Infimum on `[0, ∞)`.
    pub fn infimum(&self) -> f64 {
        match *self {
            TimeFn::Const { value } => value,
            TimeFn::Sine { offset, amplitude, .. } => offset - amplitude.abs(),
            TimeFn::Exp { scale, rate } => match (scale >= 0.0, rate > 0.0) {
                (true, true) => scale,
                (true, false) => 0.0,
                (false, true) => f64::NEG_INFINITY,
                (false, false) => scale,
            },
            TimeFn::Relax { start, end, .. } => start.min(end),
        }
    }

    fn params(&self) -> Vec<f64> {
        match *self {
            TimeFn::Const { value } => vec![value],
            TimeFn::Sine { offset, amplitude, omega, phase } => vec![offset, amplitude, omega, phase],
            TimeFn::Exp { scale, rate } => vec![scale, rate],
            TimeFn::Relax { start, end, rate } => vec![start, end, rate],
        }
    }

    fn validate(&self, name: &str, strictly_positive: bool) -> Result<()> {
        if self.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name}: non-finite parameter")));
        }
        if let TimeFn::Relax { rate, .. } = *self {
            if rate < 0.0 {
                return Err(Error::InvalidParameter(format!("{name}: relax rate must be >= 0")));
            }
        }
        // A decaying exponential with positive scale has infimum 0 but is
        // still pointwise positive.
        let ok = match *self {
            TimeFn::Exp { scale, .. } if strictly_positive => scale > 0.0,
            _ if strictly_positive => self.infimum() > 0.0,
            _ => self.infimum() >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            let want = if strictly_positive { "> 0" } else { ">= 0" };
            Err(Error::InvalidParameter(format!("{name}(t) must stay {want} for all t >= 0")))
        }
    }
}

/// Friction `a(t)` and noise intensity `b(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CoefficientProfile {
    Constant { a: f64, b: f64 },
    /// `b(t) = sqrt(v_eq_sq * a(t))`, so `b²/a` is pinned to `v_eq_sq`.
    RatioLocked { a: TimeFn, v_eq_sq: f64 },
    General { a: TimeFn, b: TimeFn },
}

impl CoefficientProfile {
    pub fn constant(a: f64, b: f64) -> Result<Self> {
        let p = CoefficientProfile::Constant { a, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CoefficientProfile::Constant { a, b } => {
                if !(a.is_finite() && *a > 0.0) {
                    return Err(Error::InvalidParameter("a must be finite and > 0".into()));
                }
                if !(b.is_finite() && *b >= 0.0) {
                    return Err(Error::InvalidParameter("b must be finite and >= 0".into()));
                }
                Ok(())
            }
            CoefficientProfile::RatioLocked { a, v_eq_sq } => {
                a.validate("a", true)?;
                if !(v_eq_sq.is_finite() && *v_eq_sq > 0.0) {
                    return Err(Error::InvalidParameter("v_eq_sq must be finite and > 0".into()));
                }
                Ok(())
            }
            CoefficientProfile::General { a, b } => {
                a.validate("a", true)?;
                b.validate("b", false)
            }
        }
    }

    #[inline]
    pub fn a(&self, t: f64) -> f64 {
        match self {
            CoefficientProfile::Constant { a, .. } => *a,
            CoefficientProfile::RatioLocked { a, .. } | CoefficientProfile::General { a, .. } => {
                a.eval(t)
            }
        }
    }

    #[inline]
    pub fn b(&self, t: f64) -> f64 {
        match self {
            CoefficientProfile::Constant { b, .. } => *b,
            CoefficientProfile::RatioLocked { a, v_eq_sq } => (v_eq_sq * a.eval(t)).sqrt(),
            CoefficientProfile::General { b, .. } => b.eval(t),
        }
    }

    #[inline]
    pub fn b_sq(&self, t: f64) -> f64 {
        match self {
            CoefficientProfile::RatioLocked { a, v_eq_sq } => v_eq_sq * a.eval(t),
            _ => {
                let b = self.b(t);
                b * b
            }
        }
    }

    /// Upper bound of `a` on `[0, t_max]`.
    pub fn sup_a(&self, t_max: f64) -> f64 {
        match self {
            CoefficientProfile::Constant { a, .. } => *a,
            CoefficientProfile::RatioLocked { a, .. } | CoefficientProfile::General { a, .. } => {
                a.sup_on(t_max)
            }
        }
    }

    /// Lower bound of `a` on `[0, ∞)`.
    pub fn inf_a(&self) -> f64 {
        match self {
            CoefficientProfile::Constant { a, .. } => *a,
            CoefficientProfile::RatioLocked { a, .. } | CoefficientProfile::General { a, .. } => {
                a.infimum()
            }
        }
    }

    /// Upper bound of `b²` on `[0, t_max]`.
    pub fn sup_b_sq(&self, t_max: f64) -> f64 {
        match self {
            CoefficientProfile::Constant { b, .. } => b * b,
            CoefficientProfile::RatioLocked { a, v_eq_sq } => v_eq_sq * a.sup_on(t_max),
            CoefficientProfile::General { b, .. } => b.sup_on(t_max).powi(2),
        }
    }

    /// Same profile with time rescaled coefficients `(a, b) -> (a * sa, b * sb)`.
    pub fn scaled(&self, sa: f64, sb: f64) -> Self {
        let scale = |f: &TimeFn, s: f64| match *f {
            TimeFn::Const { value } => TimeFn::Const { value: value * s },
            TimeFn::Sine { offset, amplitude, omega, phase } => {
                TimeFn::Sine { offset: offset * s, amplitude: amplitude * s, omega, phase }
            }
            TimeFn::Exp { scale, rate } => TimeFn::Exp { scale: scale * s, rate },
            TimeFn::Relax { start, end, rate } => TimeFn::Relax { start: start * s, end: end * s, rate },
        };
        match self {
            CoefficientProfile::Constant { a, b } => CoefficientProfile::Constant { a: a * sa, b: b * sb },
            CoefficientProfile::RatioLocked { a, v_eq_sq } => CoefficientProfile::RatioLocked {
                a: scale(a, sa),
                v_eq_sq: v_eq_sq * sb * sb / sa,
            },
            CoefficientProfile::General { a, b } => {
                CoefficientProfile::General { a: scale(a, sa), b: scale(b, sb) }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_locked_keeps_ratio() {
        let p = CoefficientProfile::RatioLocked {
            a: TimeFn::Sine { offset: 2.0, amplitude: 0.5, omega: 3.0, phase: 0.1 },
            v_eq_sq: 1.7,
        };
        p.validate().unwrap();
        for i in 0..50 {
            let t = 0.13 * i as f64;
            let r = p.b(t).powi(2) / p.a(t);
            assert!((r - 1.7).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_nonpositive_friction() {
        assert!(CoefficientProfile::constant(0.0, 1.0).is_err());
        assert!(CoefficientProfile::constant(1.0, -1.0).is_err());
        assert!(CoefficientProfile::constant(1.0, 0.0).is_ok());
        let bad = CoefficientProfile::General {
            a: TimeFn::Sine { offset: 0.5, amplitude: 1.0, omega: 1.0, phase: 0.0 },
            b: TimeFn::Const { value: 1.0 },
        };
        assert!(bad.validate().is_err());
        let decaying = CoefficientProfile::General {
            a: TimeFn::Exp { scale: 1.0, rate: -0.1 },
            b: TimeFn::Const { value: 1.0 },
        };
        assert!(decaying.validate().is_ok());
    }

    #[test]
    fn scaled_ratio_locked_tracks_new_ratio() {
        let p = CoefficientProfile::RatioLocked { a: TimeFn::Const { value: 1.0 }, v_eq_sq: 1.0 };
        let s = p.scaled(10.0, 10.0);
        assert!((s.b_sq(0.3) / s.a(0.3) - 10.0).abs() < 1e-12);
    }
}
