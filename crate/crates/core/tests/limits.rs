//! Small-parameter regimes: spectral convergence and Monte-Carlo transport.

use orthodyn::analysis::{pairwise_sum, position_moments};
use orthodyn::sim::{simulate_ensemble, IntegratorScheme, SchemeKind};
use orthodyn::spectral::{densities_from_modes, DiffusionKernel, RegimeParams, SpectralGrid};
use orthodyn::{ModelParams, Vec3};

fn gaussian(x: Vec3, c: Vec3, var_par: f64, var_perp: f64) -> f64 {
    // Anisotropic about e1.
    let d = x - c;
    let norm = (2.0 * std::f64::consts::PI).powf(1.5) * var_par.sqrt() * var_perp;
    (-d.x1 * d.x1 / (2.0 * var_par) - (d.x2 * d.x2 + d.x3 * d.x3) / (2.0 * var_perp)).exp() / norm
}

fn l1(grid: &SpectralGrid, a: &[f64], b: &[f64]) -> f64 {
    pairwise_sum(&a.iter().zip(b).map(|(x, y)| (x - y).abs() * grid.cell_volume()).collect::<Vec<_>>())
}

#[test]
fn spectral_density_approaches_diffusion_kernel() {
    let grid = SpectralGrid::new(32, 16.0).unwrap();
    let f0 = grid.gaussian(Vec3::ZERO, 1.0).unwrap();
    let t = 1.0;
    let mut dists = Vec::new();
    for eps in [0.1, 0.03, 0.01] {
        let r = RegimeParams::new(eps, 1.0, 1.0).unwrap();
        let speed_sq = r.base_speed_sq() / eps;
        // Initial velocity at its equilibrium second moment per axis.
        let v0 = Vec3::new((speed_sq / 3.0).sqrt(), 0.0, 0.0);
        let p = ModelParams::new(r.diffusion_profile(), Vec3::ZERO, v0, Vec3::ZERO).unwrap();
        let f = densities_from_modes(&grid, &p, &[t], &f0).unwrap().remove(0);
        let k = DiffusionKernel::new(t, Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), speed_sq, 1.0 / eps).unwrap();
        let pred = grid.sample(|x| gaussian(x, Vec3::ZERO, k.variance_parallel() + 1.0, k.variance_transverse() + 1.0));
        dists.push(l1(&grid, &f.values, &pred));
    }
    assert!(dists.windows(2).all(|w| w[1] < w[0]), "{dists:?}");
    assert!(dists[2] < 0.05, "{dists:?}");
}

#[test]
fn spectral_density_approaches_translation_in_wave_regime() {
    let grid = SpectralGrid::new(32, 16.0).unwrap();
    let f0 = grid.gaussian(Vec3::ZERO, 1.0).unwrap();
    let v0 = Vec3::new(1.0, 0.0, 0.0);
    let mut dists = Vec::new();
    for eps in [1e-2, 1e-3, 1e-4] {
        let r = RegimeParams::new(eps, 1.0, 1.0).unwrap();
        let p = ModelParams::new(r.wave_profile(), Vec3::ZERO, v0, Vec3::ZERO).unwrap();
        let f = densities_from_modes(&grid, &p, &[1.0], &f0).unwrap().remove(0);
        let pred = grid.sample(|x| gaussian(x, v0, 1.0, 1.0));
        dists.push(l1(&grid, &f.values, &pred));
    }
    // First-order convergence in eps.
    for w in dists.windows(2) {
        let rate = w[0] / w[1];
        assert!((5.0..=20.0).contains(&rate), "{dists:?}");
    }
}

#[test]
fn wave_regime_point_source_moves_along_v0() {
    let (eps, t) = (1e-3, 1.0);
    let r = RegimeParams::new(eps, 1.0, 1.0).unwrap();
    let v0 = Vec3::new(1.0, 0.0, 0.0);
    let p = ModelParams::new(r.wave_profile(), Vec3::ZERO, v0, Vec3::ZERO).unwrap();
    let ens = simulate_ensemble(&p, IntegratorScheme::new(SchemeKind::SpeedProjected, 1e-3), 20_000, &[0.0, t], 3).unwrap();
    let m = position_moments(&ens, t).unwrap();
    // Exact mean of the dynamics: x0 + v0 (1 - e^{-a t}) / a.
    let a = eps;
    let expected = v0 * ((1.0 - (-a * t).exp()) / a);
    for k in 0..3 {
        let se = (m.cov[k][k] / m.n as f64).sqrt();
        let dev = m.mean.component(k) - expected.component(k);
        assert!(dev.abs() <= 3.0 * se, "axis {k}: dev {dev}, se {se}");
    }
    let spread = (m.cov[0][0] + m.cov[1][1] + m.cov[2][2]).sqrt();
    assert!(spread <= 0.15 * v0.norm() * t, "{spread}");
    assert!((m.mean - v0 * t).norm() < (m.mean + v0 * t).norm());
}

#[test]
fn zero_mode_conserves_mass_at_every_time() {
    let grid = SpectralGrid::new(32, 16.0).unwrap();
    let f0 = grid.gaussian(Vec3::new(0.5, -0.25, 0.0), 1.0).unwrap();
    let p = ModelParams::new(
        orthodyn::CoefficientProfile::constant(1.0, 1.0).unwrap(),
        Vec3::ZERO,
        Vec3::new(0.6, 0.8, 0.0),
        Vec3::ZERO,
    )
    .unwrap();
    let times = [0.0, 0.25, 0.5, 1.0, 2.0];
    for f in densities_from_modes(&grid, &p, &times, &f0).unwrap() {
        assert!((f.mass() - 1.0).abs() < 1e-12, "t={} mass {}", f.t, f.mass());
        assert!(f.imag_residue < 1e-10, "t={} imag {}", f.t, f.imag_residue);
    }
}
