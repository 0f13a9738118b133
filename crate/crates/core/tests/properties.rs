use std::sync::Arc;

use proptest::prelude::*;
use singular_pq::barriers::{power_profile, unit_profile, BarrierParams};
use singular_pq::diagnostics::{fit_boundary_exponent, FitWindow};
use singular_pq::solver::solve_with_source;
use singular_pq::{build_mesh, DiscreteField, Domain, ProblemSpec, SolverSettings};

fn spec_strategy() -> impl Strategy<Value = ProblemSpec> {
    (1.2f64..4.0, 0.05f64..0.95, 0.1f64..3.0, 0.0f64..0.99, 0.1f64..5.0).prop_map(|(p, qf, delta, bf, c_f)| {
        let q = 1.0 + qf * (p - 1.0);
        ProblemSpec::new(p, q, delta, bf * p, c_f, Domain::interval(1.0).unwrap()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mesh_invariants(n2 in 1usize..200, grading in 1.0f64..6.0, extent in 0.1f64..10.0) {
        let n = 2 * n2;
        let m = build_mesh(Domain::interval(extent).unwrap(), n, grading).unwrap();
        let x = m.nodes();
        prop_assert_eq!(x[0], 0.0);
        prop_assert_eq!(x[n], extent);
        prop_assert!(x.windows(2).all(|w| w[1] > w[0]));
        for i in 0..=n {
            prop_assert!((x[i] + x[n - i] - extent).abs() <= 1e-12 * extent);
        }
        let total: f64 = m.element_lengths().iter().sum();
        prop_assert!((total - extent).abs() <= 1e-12 * extent);
    }

    #[test]
    fn weights_increase_and_stay_below_f(spec in spec_strategy(), d in 1e-10f64..0.5, e1 in -10.0f64..0.0, shrink in 0.0f64..5.0) {
        let eps = 10f64.powf(e1);
        let smaller = eps * 10f64.powf(-shrink);
        let a = spec.f_eps_at_distance(d, eps).unwrap();
        let b = spec.f_eps_at_distance(d, smaller).unwrap();
        let f = spec.f_at_distance(d);
        prop_assert!(b >= a);
        prop_assert!(b <= f * (1.0 + 4.0 * f64::EPSILON));
    }

    #[test]
    fn exact_powers_are_recovered(s in 0.05f64..2.0, c in prop::sample::select(vec![0.5, 1.0, 3.0])) {
        let m = Arc::new(build_mesh(Domain::interval(1.0).unwrap(), 1024, 3.0).unwrap());
        let u = DiscreteField::from_fn(m, |_, d| c * d.powf(s));
        let fit = fit_boundary_exponent(&u, FitWindow::default()).unwrap();
        prop_assert!((fit.slope - s).abs() < 1e-10);
        prop_assert!((fit.intercept - c.ln()).abs() < 1e-10);
    }

    #[test]
    fn power_profile_vanishes_at_boundary_and_increases(eps in 1e-8f64..1e-1, tau in 0.05f64..1.0, d in 1e-6f64..0.5) {
        prop_assert_eq!(power_profile(0.0, eps, tau), 0.0);
        prop_assert!(power_profile(d, eps, tau) > 0.0);
        prop_assert!(power_profile(1.5 * d, eps, tau) > power_profile(d, eps, tau));
    }

    #[test]
    fn unit_profile_is_nonnegative(spec in spec_strategy(), d in 0.0f64..0.5, eps in 1e-8f64..1e-2) {
        let params = BarrierParams::for_spec(&spec);
        let v = unit_profile(d, eps, &spec, &params).unwrap();
        prop_assert!(v >= 0.0 && v.is_finite());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ordered_sources_give_ordered_solutions(
        p in 1.5f64..4.0,
        qf in 0.3f64..1.0,
        low in prop::collection::vec(0.0f64..5.0, 64),
        bump in prop::collection::vec(0.0f64..1.0, 64),
    ) {
        let q = 1.0 + qf * (p - 1.0);
        let m = Arc::new(build_mesh(Domain::interval(1.0).unwrap(), 64, 2.0).unwrap());
        let high: Vec<f64> = low.iter().zip(&bump).map(|(a, b)| a + b).collect();
        let settings = SolverSettings::default();
        let (w1, s1) = solve_with_source(&m, p, q, &low, &settings).unwrap();
        let (w2, s2) = solve_with_source(&m, p, q, &high, &settings).unwrap();
        prop_assert!(w1.max_excess_over(&w2) <= settings.newton_tol);
        prop_assert_eq!(s1.descent_violations + s2.descent_violations, 0);
        prop_assert!(w1.satisfies_dirichlet() && w1.is_nonnegative());
    }
}
