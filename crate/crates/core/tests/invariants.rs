use orthodyn::model::speed_squared;
use orthodyn::sim::{read_ensemble_binary, simulate_ensemble, write_ensemble_binary, IntegratorScheme, SchemeKind};
use orthodyn::spectral::mode_ode_solve;
use orthodyn::{CoefficientProfile, ModelParams, Vec3};
use proptest::prelude::*;

fn model(a: f64, b: f64, v0: [f64; 3], x0: [f64; 3]) -> ModelParams {
    ModelParams::new(CoefficientProfile::constant(a, b).unwrap(), Vec3::ZERO, Vec3::from(v0), Vec3::from(x0)).unwrap()
}

fn v0_strategy() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-2.0f64..2.0).prop_filter("nonzero", |v| Vec3::from(*v).norm() > 0.1)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn projected_speed_follows_closed_form(a in 0.2f64..3.0, b in 0.0f64..2.0, v0 in v0_strategy(), seed in 0u64..1000) {
        let p = model(a, b, v0, [0.0; 3]);
        let times = [0.0, 0.3, 1.2];
        let ens = simulate_ensemble(&p, IntegratorScheme::new(SchemeKind::SpeedProjected, 1e-2), 16, &times, seed).unwrap();
        for (s, &t) in times.iter().enumerate() {
            let exact = speed_squared(t, &p.speed_law()).unwrap();
            for st in ens.at(s) {
                prop_assert!((st.v.norm_sq() - exact).abs() <= 1e-12 * exact);
            }
        }
    }

    #[test]
    fn modes_are_hermitian(l in prop::array::uniform3(-3.0f64..3.0), v0 in v0_strategy(), x0 in prop::array::uniform3(-1.0f64..1.0)) {
        let p = model(1.0, 1.0, v0, x0);
        let times = [0.0, 0.4, 1.0];
        let lambda = Vec3::from(l);
        let plus = mode_ode_solve(lambda, &p, &times).unwrap();
        let minus = mode_ode_solve(-lambda, &p, &times).unwrap();
        for (u, w) in plus.iter().zip(&minus) {
            prop_assert!((u.psi - w.psi.conj()).norm() <= 1e-12);
            prop_assert!((u.dpsi_dt - w.dpsi_dt.conj()).norm() <= 1e-12);
        }
    }

    #[test]
    fn ensembles_ignore_thread_count_and_round_trip(seed in any::<u64>(), threads in 2usize..6) {
        let p = model(1.0, 0.7, [0.3, -0.4, 1.0], [0.1, 0.0, -0.2]);
        let scheme = IntegratorScheme::new(SchemeKind::EulerMaruyama, 1e-2);
        let run = |n: usize| {
            rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap()
                .install(|| simulate_ensemble(&p, scheme, 40, &[0.0, 0.5], seed).unwrap())
        };
        let one = run(1);
        let many = run(threads);
        prop_assert_eq!(&one, &many);
        let mut bytes = Vec::new();
        write_ensemble_binary(&one, &mut bytes).unwrap();
        prop_assert_eq!(read_ensemble_binary(&bytes[..]).unwrap(), one);
    }
}
