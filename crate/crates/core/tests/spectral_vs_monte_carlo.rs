//! Spectral predictions against Monte-Carlo ensembles.

use num_complex::Complex64;
use orthodyn::analysis::empirical_char_fn;
use orthodyn::rng::RngLineage;
use orthodyn::sim::{simulate_ensemble, IntegratorScheme, SchemeKind};
use orthodyn::spectral::{densities_from_modes, mode_ode_solve, SpectralGrid};
use orthodyn::{CoefficientProfile, ModelParams, Vec3};

fn unit_model() -> ModelParams {
    ModelParams::new(CoefficientProfile::constant(1.0, 1.0).unwrap(), Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::ZERO).unwrap()
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[test]
fn ballistic_anisotropy_matches_monte_carlo() {
    let p = unit_model();
    let (t, sigma) = (0.1, 0.5);
    let grid = SpectralGrid::new(32, 8.0).unwrap();
    let f0 = grid.gaussian(Vec3::ZERO, sigma).unwrap();
    let f = densities_from_modes(&grid, &p, &[t], &f0).unwrap().remove(0);
    let mean = f.mean();
    let cov = f.covariance();

    // Gaussian initial positions added to a point-source ensemble.
    let n = 100_000;
    let ens = simulate_ensemble(&p, IntegratorScheme::new(SchemeKind::SpeedProjected, 1e-3), n, &[0.0, t], 5).unwrap();
    let mut start = RngLineage::new(6, 0).stream(sigma * sigma, 0);
    let xs: Vec<Vec3> = ens.at(1).map(|s| s.x + start.next_increment()).collect();

    // Raw second moments about x0: ballistic growth along v0 dominates.
    let mut raw = [0.0; 3];
    for l in 0..3 {
        let (m, se) = mean_and_se(&xs.iter().map(|x| x.component(l)).collect::<Vec<_>>());
        assert!((m - mean.component(l)).abs() <= 3.0 * se, "mean x{l}: mc {m} spectral {}", mean.component(l));
        let (m2, se) = mean_and_se(&xs.iter().map(|x| x.component(l).powi(2)).collect::<Vec<_>>());
        raw[l] = cov[l][l] + mean.component(l).powi(2);
        assert!((m2 - raw[l]).abs() <= 3.0 * se, "second moment x{l}: mc {m2} ± {se}, spectral {}", raw[l]);
    }
    let s2 = sigma * sigma;
    assert!(raw[0] - s2 > 10.0 * (raw[1] - s2).abs().max((raw[2] - s2).abs()), "{raw:?}");
    let point: Vec<Vec3> = ens.at(1).map(|s| s.x).collect();
    let second = |l: usize| point.iter().map(|x| x.component(l).powi(2)).sum::<f64>() / n as f64;
    assert!(second(0) > 10.0 * second(1).max(second(2)));
}

/// Wavevectors orthogonal to v0 = e1.
const TRANSVERSE: [[f64; 3]; 3] = [[0.0, 1.0, 0.0], [0.0, 0.0, 1.5], [0.0, 1.0, 1.0]];

#[test]
fn transverse_characteristic_function_agrees() {
    let p = unit_model();
    let times = [0.0, 0.5, 1.0];
    let ens = simulate_ensemble(&p, IntegratorScheme::new(SchemeKind::SpeedProjected, 1e-3), 20_000, &times, 21).unwrap();
    for l in TRANSVERSE {
        let lambda = Vec3::new(l[0], l[1], l[2]);
        let modes = mode_ode_solve(lambda, &p, &times).unwrap();
        for (s, &t) in times.iter().enumerate().skip(1) {
            let cf = empirical_char_fn(&ens, lambda, t).unwrap();
            let err = (cf.estimate - modes[s].psi).norm();
            assert!(err <= 3.0 * cf.std_error, "λ={l:?} t={t}: err {err} se {}", cf.std_error);
        }
    }
}

#[test]
fn characteristic_function_error_scales_as_inverse_root_n() {
    let p = unit_model();
    let times = [0.0, 1.0];
    let exact: Vec<Complex64> = TRANSVERSE.iter().map(|l| mode_ode_solve(Vec3::new(l[0], l[1], l[2]), &p, &times).unwrap()[1].psi).collect();
    let rms = |n: usize, seed0: u64| -> f64 {
        let mut acc = 0.0;
        let mut count = 0.0;
        for rep in 0..16 {
            let ens = simulate_ensemble(&p, IntegratorScheme::new(SchemeKind::SpeedProjected, 5e-3), n, &times, seed0 + rep).unwrap();
            for (l, psi) in TRANSVERSE.iter().zip(&exact) {
                let cf = empirical_char_fn(&ens, Vec3::new(l[0], l[1], l[2]), 1.0).unwrap();
                acc += (cf.estimate - psi).norm_sqr();
                count += 1.0;
            }
        }
        (acc / count).sqrt()
    };
    let ratio = rms(1000, 100) / rms(4000, 200);
    assert!((1.5..=2.7).contains(&ratio), "error ratio for 4x trajectories: {ratio}");
}

#[test]
fn reflected_v0_mirrors_every_trajectory() {
    let p = unit_model();
    let mut q = p.clone();
    q.v0 = -q.v0;
    for kind in [SchemeKind::SpeedProjected, SchemeKind::EulerMaruyama] {
        let scheme = IntegratorScheme::new(kind, 1e-2);
        let a = simulate_ensemble(&p, scheme, 300, &[0.0, 0.5, 1.0], 8).unwrap();
        let b = simulate_ensemble(&q, scheme, 300, &[0.0, 0.5, 1.0], 8).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            assert_eq!(x.x, -y.x);
            assert_eq!(x.v, -y.v);
        }
    }
}
