//! Lyapunov-Perron solvers against orbit-difference and finite-difference
//! oracles.

use nalgebra::{DMatrix, DVector};
use partlin::catalog;
use partlin::lp::{
    leaf_membership_oracle, solve_classical_lp, solve_derivative_lp, solve_stable_lp_on_xcs,
    solve_unstable_lp, LPConfig, UnstableFoliation,
};
use partlin::{DiscreteMap, Projection};
use std::sync::Arc;

fn pt(v: &[f64]) -> DVector<f64> {
    DVector::from_vec(v.to_vec())
}

#[test]
fn unstable_sequence_is_an_orbit_difference() {
    let m = catalog::poly3();
    let cfg = LPConfig::unstable_default(&m.structure().envelopes).with_truncation(25);
    let x = pt(&[0.2, 0.1, 0.1]);
    let q = solve_unstable_lp(&m, &x, &pt(&[0.3]), &cfg).unwrap();
    let x0 = &x + q.zeroth();
    assert!((x0[2] - 0.3).abs() < 1e-15);
    let scale = q.norm.max(1.0);
    for n in -10..=0 {
        let diff = m.iterate(&x0, n).unwrap() - m.iterate(&x, n).unwrap();
        assert!((q.at(n) - diff).norm() <= 1e-8 * scale, "n = {n}");
    }
    assert!(q.lipschitz < 0.5, "lipschitz {}", q.lipschitz);
}

#[test]
fn doubling_truncation_stays_within_tail_bound() {
    let m = catalog::poly3b();
    let base = LPConfig::unstable_default(&m.structure().envelopes);
    let x = pt(&[0.05, -0.2, 0.15]);
    let z = pt(&[-0.2]);
    let a = solve_unstable_lp(&m, &x, &z, &base.with_truncation(15)).unwrap();
    let b = solve_unstable_lp(&m, &x, &z, &base.with_truncation(30)).unwrap();
    let change = (a.zeroth() - b.zeroth()).norm();
    assert!(change <= a.tail_bound + 1e-12, "{change} vs {}", a.tail_bound);
}

#[test]
fn unstable_leaf_point_passes_backward_oracle() {
    let m: Arc<dyn DiscreteMap> = Arc::new(catalog::poly3());
    let cfg = LPConfig::unstable_default(&m.structure().envelopes);
    let chart = UnstableFoliation::new(m.clone(), cfg).unwrap();
    let x = pt(&[0.2, 0.1, 0.1]);
    let z = chart.leaf_point(&x, &pt(&[0.3])).unwrap();
    let check = leaf_membership_oracle(m.as_ref(), &x, &z, cfg.rho, 20, None).unwrap();
    assert!(check.member, "{check:?}");
    // Moving off the leaf in the stable direction breaks membership.
    let off = &z + pt(&[0.05, 0.0, 0.0]);
    assert!(!leaf_membership_oracle(m.as_ref(), &x, &off, cfg.rho, 20, None).unwrap().member);
}

#[test]
fn stable_sequence_on_xcs_is_an_orbit_difference() {
    let m = catalog::poly3b();
    let s = m.structure().clone();
    let cfg = LPConfig::stable_default(&s.envelopes);
    let x_cs = pt(&[0.2, 0.15]);
    let (p, h) = solve_stable_lp_on_xcs(&m, &x_cs, &pt(&[-0.1]), &cfg).unwrap();
    let g = |y: &DVector<f64>, n: usize| {
        let mut v = s.embed(y, Projection::CS).unwrap();
        for _ in 0..n {
            v = m.eval(&v).unwrap();
        }
        s.split(&v, Projection::CS).unwrap()
    };
    let y0 = &x_cs + p.zeroth();
    for n in 0..=10 {
        let diff = g(&y0, n) - g(&x_cs, n);
        assert!((p.at(n as i64) - diff).norm() < 1e-8, "n = {n}");
    }
    assert!((h[0] - y0[1]).abs() < 1e-15);
}

#[test]
fn classical_and_center_orbit_solvers_agree_on_xcs() {
    let m = catalog::poly3();
    let cfg = LPConfig::stable_default(&m.structure().envelopes);
    let (p, _) = solve_stable_lp_on_xcs(&m, &pt(&[0.1, 0.2]), &pt(&[0.25]), &cfg).unwrap();
    let c = solve_classical_lp(&m, &pt(&[0.1, 0.2, 0.0]), &pt(&[0.25]), &cfg).unwrap();
    for n in 0..=cfg.truncation as i64 {
        let full = c.at(n);
        assert!(full[2].abs() < 1e-14);
        assert!((full.rows(0, 2) - p.at(n)).norm() < 1e-8, "n = {n}");
    }
}

#[test]
fn derivative_solver_matches_differences_of_classical_solver() {
    let m = catalog::poly3b();
    let cfg = LPConfig::stable_default(&m.structure().envelopes);
    let xc = 0.2;
    let d = solve_derivative_lp(&m, &pt(&[xc]), &cfg).unwrap();
    let h = 1e-5;
    let p0 = |zs: f64| {
        solve_classical_lp(&m, &pt(&[0.0, xc, 0.0]), &pt(&[zs]), &cfg)
            .unwrap()
            .zeroth()
            .clone()
    };
    let fd = (p0(h) - p0(-h)) / (2.0 * h);
    let fd = DMatrix::from_column_slice(3, 1, fd.as_slice());
    assert!((&d[0] - fd).abs().max() < 1e-6, "{} vs", d[0]);
    assert!((d[0][(0, 0)] - 1.0).abs() < 0.1);
}
