use proptest::prelude::*;

use laminate::cohesive::{CohesiveLaw, LoadingProfile};
use laminate::discretization::{Mesh, SystemState};
use laminate::materials::{DamageDissipation, ElasticModulus, LayerMaterial, Materials};
use laminate::solver::{solve_increment, SolverOptions};

fn materials(a1: f64, a2: f64) -> Materials {
    let layer = |a| LayerMaterial {
        modulus: ElasticModulus::power(a, 0.5).unwrap(),
        dissipation: DamageDissipation::new(0.5, 1.0).unwrap(),
    };
    [layer(a1), layer(a2)]
}

fn previous(alpha1: Vec<f64>, alpha2: Vec<f64>, dh: Vec<f64>) -> SystemState {
    let n = alpha1.len();
    let mut s = SystemState::zeros(n);
    s.alpha1 = alpha1;
    s.alpha2 = alpha2;
    s.delta_h = dh;
    s.delta_h[0] = 0.0;
    s.delta_h[n - 1] = 0.0;
    s.gamma = s.delta_h.clone();
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn diagonal_matches_loading_profile(c in 0.05f64..5.0, k in 0.05f64..5.0, z in 0.0f64..4.0, exp in any::<bool>()) {
        let profile = if exp { LoadingProfile::exponential(c, k) } else { LoadingProfile::parabolic_capped(c, k) }.unwrap();
        let law = CohesiveLaw::quadratic_unloading(profile).unwrap();
        prop_assert!((law.phi(z, z) - law.psi(z)).abs() <= 1e-12 * (1.0 + law.psi(z).abs()));
        prop_assert!(law.d_phi_dy(0.0, z).abs() <= 1e-12);
    }

    #[test]
    fn phi_is_monotone_in_history(c in 0.1f64..2.0, k in 0.1f64..2.0, y in 0.0f64..1.0, z in 0.0f64..1.0, dz in 0.0f64..1.0) {
        let law = CohesiveLaw::quadratic_unloading(LoadingProfile::exponential(c, k).unwrap()).unwrap();
        let z = z.max(y);
        prop_assert!(law.phi(y, z + dz) >= law.phi(y, z) - 1e-14);
    }

    #[test]
    fn increments_lower_energy_and_respect_floors(
        a1 in 5.0f64..40.0,
        a2 in 5.0f64..40.0,
        u_bar in -0.8f64..0.8,
        alpha in proptest::collection::vec(0.0f64..0.9, 18),
        dh in proptest::collection::vec(0.0f64..0.05, 9),
    ) {
        let mesh = Mesh::new(1.0, 8).unwrap();
        let law = CohesiveLaw::quadratic_unloading(LoadingProfile::parabolic_capped(0.5, 0.5).unwrap()).unwrap();
        let mats = materials(a1, a2);
        let mut a1v = alpha[..9].to_vec();
        let mut a2v = alpha[9..].to_vec();
        for v in [&mut a1v, &mut a2v] {
            v[0] = 0.0;
            v[8] = 0.0;
        }
        let prev = previous(a1v, a2v, dh);
        let r = solve_increment(&mesh, &prev, u_bar, &law, &mats, &SolverOptions::default()).unwrap();
        prop_assert!(r.converged);
        prop_assert!(r.energy <= r.warm_start_energy + 1e-12 * (1.0 + r.warm_start_energy.abs()));
        for j in 0..9 {
            prop_assert!(r.state.alpha1[j] >= prev.alpha1[j] && r.state.alpha1[j] <= 1.0);
            prop_assert!(r.state.alpha2[j] >= prev.alpha2[j] && r.state.alpha2[j] <= 1.0);
            prop_assert!(r.state.delta_h[j] >= prev.delta_h[j]);
        }
        prop_assert_eq!(r.state.u1[8], u_bar);
        prop_assert_eq!(r.state.u2[0], 0.0);
    }

    #[test]
    fn restarts_never_raise_the_energy(seed in any::<u64>(), u_bar in 0.2f64..1.0) {
        let mesh = Mesh::new(1.0, 6).unwrap();
        let law = CohesiveLaw::quadratic_unloading(LoadingProfile::exponential(0.1, 2.0).unwrap()).unwrap();
        let mats = materials(10.0, 20.0);
        let prev = SystemState::zeros(7);
        let plain = solve_increment(&mesh, &prev, u_bar, &law, &mats, &SolverOptions::default()).unwrap();
        let opts = SolverOptions { n_restarts: 4, rng_seed: seed, ..SolverOptions::default() };
        let polished = solve_increment(&mesh, &prev, u_bar, &law, &mats, &opts).unwrap();
        prop_assert!(polished.energy <= plain.energy);
    }
}
