//! Property tests over random points: coordinate splittings, interpolation,
//! the cutoff, the Hölder bound, inverse maps, solved sequences and the
//! conjugacy.

use std::sync::{Arc, OnceLock};

use nalgebra::DVector;
use partlin::catalog;
use partlin::cocycle::holder_exponent_bound;
use partlin::cutoff::{cutoff, cutoff_derivative};
use partlin::linearize::{linearize, Linearization, LinearizeConfig};
use partlin::lp::{solve_unstable_lp, LPConfig};
use partlin::pipeline::{normalize, Chebyshev, PipelineConfig};
use partlin::{DiscreteMap, MapModel, MapRef, Projection};
use proptest::prelude::*;

fn vector(d: usize, w: f64) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-w..w, d).prop_map(DVector::from_vec)
}

fn poly3_linearization() -> &'static Linearization {
    static LIN: OnceLock<Linearization> = OnceLock::new();
    LIN.get_or_init(|| {
        let m = catalog::poly3();
        let flags = m.flags;
        let map: MapRef = Arc::new(m);
        let n = normalize(map, flags, &PipelineConfig::default()).expect("normalize");
        linearize(n, &LinearizeConfig::default()).expect("linearize")
    })
}

fn models() -> Vec<MapModel> {
    vec![catalog::lin3(), catalog::poly3(), catalog::poly3b(), catalog::twou4(), catalog::cex1()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projections_partition_the_space(idx in 0usize..5, seed in vector(4, 1.0)) {
        let m = &models()[idx];
        let s = m.structure();
        let x = seed.rows(0, s.dim()).into_owned();
        let sum = s.project(&x, Projection::S).unwrap()
            + s.project(&x, Projection::C).unwrap()
            + s.project(&x, Projection::U).unwrap();
        prop_assert_eq!(&sum, &x);
        for p in [Projection::S, Projection::C, Projection::U, Projection::CS] {
            let part = s.split(&x, p).unwrap();
            prop_assert_eq!(s.embed(&part, p).unwrap(), s.project(&x, p).unwrap());
        }
    }

    #[test]
    fn chebyshev_reproduces_low_degree_polynomials(
        c in prop::collection::vec(-1.0f64..1.0, 6),
        x in vector(2, 0.5),
    ) {
        let poly = |y: &DVector<f64>| {
            c[0] + c[1] * y[0] + c[2] * y[1] + c[3] * y[0] * y[1] + c[4] * y[0].powi(3) + c[5] * y[1].powi(2) * y[0]
        };
        let grad = |y: &DVector<f64>| {
            [
                c[1] + c[3] * y[1] + 3.0 * c[4] * y[0].powi(2) + c[5] * y[1].powi(2),
                c[2] + c[3] * y[0] + 2.0 * c[5] * y[1] * y[0],
            ]
        };
        let table = Chebyshev::fit(|y| Ok(DVector::from_element(1, poly(y))), 2, 1, 4, 0.5).unwrap();
        let (v, j) = table.eval_with_jacobian(&x);
        prop_assert!((table.eval(&x)[0] - poly(&x)).abs() < 1e-12);
        prop_assert!((v[0] - poly(&x)).abs() < 1e-12);
        let g = grad(&x);
        prop_assert!((j[(0, 0)] - g[0]).abs() < 1e-10);
        prop_assert!((j[(0, 1)] - g[1]).abs() < 1e-10);
    }

    #[test]
    fn cutoff_is_a_monotone_step(r in 0.0f64..2.0, radius in 0.1f64..1.0) {
        let v = cutoff(r, radius);
        prop_assert!((0.0..=1.0).contains(&v));
        if r <= radius / 2.0 { prop_assert_eq!(v, 1.0); }
        if r >= radius { prop_assert_eq!(v, 0.0); }
        prop_assert!(cutoff_derivative(r, radius) <= 0.0);
        prop_assert!(cutoff(r + 1e-3, radius) <= v);
    }

    #[test]
    fn holder_bound_lies_in_unit_interval_and_matches_cases(
        tau1 in 0.05f64..0.95,
        tau2 in 0.1f64..4.0,
        alpha in 0.1f64..1.0,
        eps in 0.0f64..0.05,
        rho_frac in 0.05f64..0.95,
    ) {
        let rho = rho_frac / tau1;
        let b = holder_exponent_bound(tau1, tau2, rho, alpha, eps).unwrap();
        prop_assert!(b <= alpha);
        prop_assert!(b > -1e-12);
        if rho * tau2 < 1.0 - 1e-9 {
            prop_assert_eq!(b, alpha);
        } else if rho * tau2 > 1.0 + 1e-9 {
            // Equivalent form: log(rho tau1) / log(tau1 / tau2).
            let direct = (rho * tau1).ln() / (tau1 / tau2).ln() * alpha;
            prop_assert!((b - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn holder_bound_rejects_rho_tau1_at_least_one(tau1 in 0.1f64..0.9, over in 1.0f64..3.0) {
        prop_assert!(holder_exponent_bound(tau1, 2.0, over / tau1, 1.0, 0.01).is_err());
    }

    #[test]
    fn inverse_undoes_forward(idx in 0usize..5, seed in vector(4, 0.3)) {
        let m = &models()[idx];
        let x = seed.rows(0, m.structure().dim()).into_owned();
        let back = m.inverse(&m.eval(&x).unwrap()).unwrap();
        prop_assert!((back - &x).norm() <= 1e-10 * x.norm().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn solved_sequence_matches_backward_orbit_differences(x in vector(3, 0.2), z in vector(1, 0.2)) {
        let m = catalog::poly3();
        let cfg = LPConfig::unstable_default(&m.structure().envelopes);
        let q = solve_unstable_lp(&m, &x, &z, &cfg).unwrap();
        let s = m.structure();
        prop_assert!((s.split(&(&x + q.zeroth()), Projection::U).unwrap() - &z).norm() < 1e-12);
        let (mut a, mut b) = (x.clone(), &x + q.zeroth());
        for n in 1..=5i64 {
            a = m.inverse(&a).unwrap();
            b = m.inverse(&b).unwrap();
            prop_assert!((q.at(-n) - (&b - &a)).norm() < 1e-9);
        }
    }

    #[test]
    fn conjugacy_inverse_undoes_conjugacy(y in vector(3, 0.25)) {
        let lin = poly3_linearization();
        let back = lin.conjugacy_inverse(&lin.conjugacy(&y).unwrap()).unwrap();
        prop_assert!((back - &y).norm() < 1e-9);
    }

    #[test]
    fn conjugacy_fixes_the_center_axis(c in -0.25f64..0.25) {
        let lin = poly3_linearization();
        let s = lin.normal_form.structure().clone();
        let x = s.embed(&DVector::from_element(s.dim_c(), c), Projection::C).unwrap();
        prop_assert!((lin.conjugacy(&x).unwrap() - &x).norm() < 1e-10);
    }
}
