use super::{pairwise_sum_by, ComparisonReport, Metric};
use crate::error::Result;
use crate::model::speed_squared;
use crate::profile::CoefficientProfile;
use crate::quadrature::integrate;
use crate::sim::Ensemble;
use crate::vec3::Vec3;

/// z-score threshold used by [`moment_report`].
pub const Z_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionMoments {
    pub mean: Vec3,
    /// Sample covariance (divisor `n - 1`), row-major.
    pub cov: [[f64; 3]; 3],
    pub n: usize,
}

pub fn position_moments(ens: &Ensemble, t: f64) -> Result<PositionMoments> {
    let s = ens.sample_index(t)?;
    let n = ens.n_traj;
    let x = |k: usize| ens.state(k, s).x.to_array();
    let mut mean = [0.0; 3];
    for (c, m) in mean.iter_mut().enumerate() {
        *m = pairwise_sum_by(n, &|k| x(k)[c]) / n as f64;
    }
    let mut cov = [[0.0; 3]; 3];
    let denom = (n.max(2) - 1) as f64;
    for r in 0..3 {
        for c in 0..3 {
            cov[r][c] = pairwise_sum_by(n, &|k| (x(k)[r] - mean[r]) * (x(k)[c] - mean[c])) / denom;
        }
    }
    Ok(PositionMoments { mean: Vec3::from(mean), cov, n })
}

/// `∫₀ᵗ exp(-∫₀ˢ a)` ds: with `H = 0` the mean velocity decays as
/// `v0 e^{-∫a}`, so the mean displacement is `v0` times this factor.
pub fn mean_drift_factor(profile: &CoefficientProfile, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    if let CoefficientProfile::Constant { a, .. } = *profile {
        return Ok(-(-a * t).exp_m1() / a);
    }
    integrate(|s| (-integrate(|u| profile.a(u), 0.0, s).unwrap_or(f64::NAN)).exp(), 0.0, t)
}

fn z_score(dev: f64, se: f64, scale: f64) -> f64 {
    if se > 0.0 {
        dev / se
    } else if dev.abs() <= 1e-12 * scale.abs().max(1e-300) {
        0.0
    } else {
        dev.signum() * f64::INFINITY
    }
}

fn mean_and_se<F: Fn(usize) -> f64>(n: usize, f: &F) -> (f64, f64) {
    let m = pairwise_sum_by(n, f) / n as f64;
    if n < 2 {
        return (m, 0.0);
    }
    let var = pairwise_sum_by(n, &|k| (f(k) - m).powi(2)) / (n - 1) as f64;
    (m, (var / n as f64).sqrt())
}

/// Velocity equipartition, mean position and anisotropy of the position
/// spread at sample time `t`, each as a z-score against [`Z_THRESHOLD`].
///
/// * `velocity_moment_x{l}`: mean of `v_l²` against `|v(t)|²/3`.
/// * `position_mean_x{l}` (only for `H = 0`): against
///   `x0 + v0 ∫₀ᵗ e^{-∫a}`.
/// * `variance_ratio` (only when the spread is nonzero): variance along
///   `v0` over the mean transverse variance, against 2, with a delta-method
///   standard error.
pub fn moment_report(ens: &Ensemble, t: f64) -> Result<Vec<ComparisonReport>> {
    let s = ens.sample_index(t)?;
    let t = ens.sample_times[s];
    let n = ens.n_traj;
    let params = &ens.params;
    let mut out = Vec::new();

    let speed_sq = speed_squared(t, &params.speed_law())?;
    for l in 0..3 {
        let (m, se) = mean_and_se(n, &|k| ens.state(k, s).v.component(l).powi(2));
        let expected = speed_sq / 3.0;
        out.push(
            ComparisonReport::new(
                format!("velocity_moment_x{}", l + 1),
                Metric::MomentZScores,
                z_score(m - expected, se, expected),
                Z_THRESHOLD,
            )
            .with("t", t)
            .with("mean", m)
            .with("expected", expected)
            .with("std_error", se),
        );
    }

    if params.h.norm_sq() == 0.0 {
        let drift = mean_drift_factor(&params.coeffs, t)?;
        let expected = params.x0 + params.v0 * drift;
        for l in 0..3 {
            let (m, se) = mean_and_se(n, &|k| ens.state(k, s).x.component(l));
            let e = expected.component(l);
            out.push(
                ComparisonReport::new(
                    format!("position_mean_x{}", l + 1),
                    Metric::MomentZScores,
                    z_score(m - e, se, params.v0.norm() * t.max(1e-300)),
                    Z_THRESHOLD,
                )
                .with("t", t)
                .with("mean", m)
                .with("expected", e)
                .with("std_error", se),
            );
        }
    }

    let u = params.v0.normalized()?;
    let w = if u.x1.abs() < 0.9 { Vec3::new(1.0, 0.0, 0.0) } else { Vec3::new(0.0, 1.0, 0.0) };
    let p1 = (w - u * w.dot(&u)).normalized()?;
    let p2 = u.cross(&p1);
    let mean = position_moments(ens, t)?.mean;
    let d = |k: usize| ens.state(k, s).x - mean;
    let par = |k: usize| d(k).dot(&u).powi(2);
    let perp = |k: usize| 0.5 * (d(k).dot(&p1).powi(2) + d(k).dot(&p2).powi(2));
    let vp = pairwise_sum_by(n, &par) / n as f64;
    let vt = pairwise_sum_by(n, &perp) / n as f64;
    if vt > 0.0 && n > 1 {
        let ratio = vp / vt;
        let (_, se_r) = mean_and_se(n, &|k| par(k) - ratio * perp(k));
        let se = se_r / vt;
        out.push(
            ComparisonReport::new("variance_ratio", Metric::VarianceRatio, z_score(ratio - 2.0, se, 2.0), Z_THRESHOLD)
                .with("t", t)
                .with("ratio", ratio)
                .with("expected", 2.0)
                .with("std_error", se)
                .with("variance_parallel", vp)
                .with("variance_transverse", vt),
        );
    }
    Ok(out)
}
