//! Globally adaptive Gauss–Kronrod (7/15) integration on finite intervals.

use crate::error::{Error, Result};

pub const ABS_TOL: f64 = 1e-12;
pub const REL_TOL: f64 = 1e-10;
const MAX_INTERVALS: usize = 4000;

// Kronrod nodes (positive half, descending) and weights; every odd index is
// also a 7-point Gauss node.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Single 15-point Kronrod panel with the embedded 7-point Gauss estimate.
/// Returns `(integral, |kronrod - gauss|)`.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Integrates `f` over `[a, b]` to `max(abs_tol, rel_tol * |I|)`.
pub fn integrate_with<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let (v, e) = gk15(&f, lo, hi);
    let mut intervals = vec![(lo, hi, v, e)];
    let mut total = v;
    let mut err = e;
    while !(err <= abs_tol.max(rel_tol * total.abs())) {
        if intervals.len() >= MAX_INTERVALS || !err.is_finite() {
            return Err(Error::QuadratureFailure { estimate: err });
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap();
        let (l, h, v, e) = intervals.swap_remove(worst);
        let mid = 0.5 * (l + h);
        let (v1, e1) = gk15(&f, l, mid);
        let (v2, e2) = gk15(&f, mid, h);
        total += v1 + v2 - v;
        err += e1 + e2 - e;
        intervals.push((l, mid, v1, e1));
        intervals.push((mid, h, v2, e2));
        // Re-sum periodically to keep running totals from drifting.
        if intervals.len() % 64 == 0 {
            total = intervals.iter().map(|i| i.2).sum();
            err = intervals.iter().map(|i| i.3).sum();
        }
    }
    let total: f64 = intervals.iter().map(|i| i.2).sum();
    Ok(sign * total)
}

/// [`integrate_with`] at the crate default tolerances.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> Result<f64> {
    integrate_with(f, a, b, ABS_TOL, REL_TOL)
}

/// Running integral `G(t) = ∫_0^t g` tabulated on a uniform node grid, with
/// off-node values completed by a single Kronrod panel from the nearest node
/// below.
#[derive(Debug, Clone)]
pub struct CumulativeIntegral<F> {
    g: F,
    step: f64,
    nodes: Vec<f64>,
}

impl<F: Fn(f64) -> f64> CumulativeIntegral<F> {
    /// Tabulates on `[0, t_max]` with `n_nodes` panels.
    pub fn new(g: F, t_max: f64, n_panels: usize) -> Result<Self> {
        let n_panels = n_panels.max(1);
        let step = if t_max > 0.0 { t_max / n_panels as f64 } else { 1.0 };
        let mut nodes = Vec::with_capacity(n_panels + 1);
        nodes.push(0.0);
        let mut acc = 0.0;
        for k in 0..n_panels {
            let lo = k as f64 * step;
            acc += integrate_with(&g, lo, lo + step, ABS_TOL * 1e-2, REL_TOL * 1e-2)?;
            nodes.push(acc);
        }
        Ok(Self { g, step, nodes })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let k = ((t / self.step).floor() as usize).min(self.nodes.len() - 1);
        let base = k as f64 * self.step;
        if t == base {
            return self.nodes[k];
        }
        let (panel, _) = gk15(&self.g, base, t);
        self.nodes[k] + panel
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = integrate(|x| 3.0 * x * x + 1.0, 0.0, 2.0).unwrap();
        assert!((v - 10.0).abs() < 1e-13);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let v = integrate(f64::exp, 1.0, 0.0).unwrap();
        assert!((v + (1f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn oscillatory_and_peaked() {
        let v = integrate(|x| (10.0 * x).sin(), 0.0, std::f64::consts::PI).unwrap();
        assert!(v.abs() < 1e-12);
        let w = integrate(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0).unwrap();
        let exact = 2.0 * (1.0 / 1e-2) * (1.0f64 / 1e-2).atan();
        assert!((w - exact).abs() / exact < 1e-10);
    }

    #[test]
    fn divergent_integrand_reports_failure() {
        let r = integrate(|x: f64| 1.0 / x.abs().sqrt().powi(3), -1.0, 1.0);
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })));
    }

    #[test]
    fn cumulative_matches_antiderivative() {
        let tab = CumulativeIntegral::new(|x: f64| (2.0 * x).cos(), 5.0, 50).unwrap();
        for &t in &[0.0, 0.05, 1.234, 4.99, 5.0] {
            let exact = (2.0f64 * t).sin() / 2.0;
            assert!((tab.eval(t) - exact).abs() < 1e-13, "t={t}");
        }
    }
}
