//! Cocycle engine against brute-force and direct-product oracles.

use nalgebra::{DMatrix, DVector};
use partlin::catalog;
use partlin::cocycle::{
    assemble_p1, assemble_pu, compute_invariant_splitting, cocycle_product, estimate_dichotomy,
    holder_exponent_bound, transfer_map_b, CenterCocycle, TransferEngine, TransferOptions,
};
use partlin::numeric::subspace_distance;
use partlin::{DiscreteMap, MapRef};
use std::sync::Arc;

fn pt(v: &[f64]) -> DVector<f64> {
    DVector::from_vec(v.to_vec())
}

fn line(theta: f64) -> DMatrix<f64> {
    DMatrix::from_column_slice(2, 1, &[theta.cos(), theta.sin()])
}

/// Angle minimizing `|M v_theta|` by a grid scan refined by ternary search.
fn argmin_angle(m: &DMatrix<f64>) -> f64 {
    let f = |t: f64| (m * line(t)).norm();
    let n = 3600;
    let step = std::f64::consts::PI / n as f64;
    let mut best = 0.0;
    for i in 0..n {
        let t = i as f64 * step;
        if f(t) < f(best) {
            best = t;
        }
    }
    let (mut a, mut b) = (best - step, best + step);
    for _ in 0..200 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if f(m1) < f(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    0.5 * (a + b)
}

#[test]
fn twou4_splitting_matches_angle_grid() {
    let c = CenterCocycle::unstable(Arc::new(catalog::twou4()));
    let x = pt(&[0.3, -0.25]);
    let field = compute_invariant_splitting(&c, &x, 40).unwrap();
    // Slow line: least growth under forward products.
    let fwd = cocycle_product(&c, 20, 0, &x).unwrap();
    let slow = line(argmin_angle(&fwd));
    // Fast line: least growth under backward products.
    let bwd = cocycle_product(&c, -20, 0, &x).unwrap();
    let fast = line(argmin_angle(&bwd));
    assert!(subspace_distance(&field.frames[0], &slow) < 1e-6);
    assert!(subspace_distance(&field.frames[1], &fast) < 1e-6);
    assert!(field.invariance_residual < 1e-8);
}

#[test]
fn poly3_transfer_matches_direct_product() {
    let m: MapRef = Arc::new(catalog::poly3());
    let engine = TransferEngine::new(m.clone(), TransferOptions::default()).unwrap();
    let x = pt(&[0.2, 0.1]);
    let (b, _) = transfer_map_b(&engine, &x, 0).unwrap();
    let c = CenterCocycle::unstable(m);
    let xc = pt(&[0.0, 0.1]);
    let direct = cocycle_product(&c, 0, 40, &xc).unwrap() * cocycle_product(&c, 40, 0, &x).unwrap();
    assert!((&b - &direct).abs().max() < 1e-10);
    // Conjugation identity B(g x) A(x) = A(x_c) B(x).
    let gx = c.step(&x, true).unwrap();
    let (bg, _) = transfer_map_b(&engine, &gx, 0).unwrap();
    let lhs = bg * c.generator(&x).unwrap();
    let rhs = c.generator(&xc).unwrap() * b;
    assert!((lhs - rhs).abs().max() < 1e-8);
}

#[test]
fn dichotomy_fits() {
    let pts: Vec<DVector<f64>> = [-0.5, -0.2, 0.1, 0.4].iter().map(|v| pt(&[*v])).collect();
    let poly = CenterCocycle::center(Arc::new(catalog::poly3()));
    let est = estimate_dichotomy(&poly, &pts, 30).unwrap();
    let center = est.blocks.iter().find(|b| b.label == "center").unwrap();
    assert!(center.forward_rate <= 1.1 && center.backward_rate >= 0.9);
    assert!(est.violations.is_empty(), "{:?}", est.violations);

    let tw = CenterCocycle::center(Arc::new(catalog::twou4()));
    let est = estimate_dichotomy(&tw, &pts, 30).unwrap();
    for b in est.blocks.iter().filter(|b| b.label.starts_with("lambda_") && b.forward_rate > 1.0) {
        assert!(b.backward_rate > 1.5 && b.forward_rate < 5.0, "{b:?}");
    }
}

#[test]
fn cohomology_residual_on_grids() {
    for m in [catalog::poly3(), catalog::poly3b(), catalog::twou4()] {
        let name = m.name.clone();
        let engine = TransferEngine::new(Arc::new(m), TransferOptions::default()).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..5 {
            for j in 0..4 {
                let x = pt(&[-0.4 + 0.2 * i as f64, -0.3 + 0.2 * j as f64]);
                let t = assemble_pu(&engine, &x).unwrap();
                worst = worst.max(t.cohomology_residual.unwrap());
            }
        }
        assert!(worst <= 1e-6, "{name}: {worst}");
    }
}

#[test]
fn transfer_series_terms_decay_geometrically() {
    let engine = TransferEngine::new(Arc::new(catalog::twou4()), TransferOptions::default()).unwrap();
    let t = engine.compute(&pt(&[0.35, 0.2])).unwrap();
    for (terms, theta) in t.term_norms.iter().zip(engine.thetas()) {
        let nz: Vec<f64> = terms.iter().cloned().filter(|v| *v > 1e-300).collect();
        if nz.len() < 3 {
            continue;
        }
        let rate = (nz[nz.len() - 1] / nz[1]).powf(1.0 / (nz.len() - 2) as f64);
        assert!(rate <= theta + 0.05, "rate {rate} vs theta {theta}");
    }
}

#[test]
fn transfer_map_is_holder_on_dyadic_pairs() {
    let m = catalog::twou4();
    let s = m.structure().clone();
    let engine = TransferEngine::new(Arc::new(m), TransferOptions::default()).unwrap();
    let beta = holder_exponent_bound(
        s.envelopes.lambda_s_plus,
        1.0 + s.envelopes.margin,
        1.0,
        1.0,
        0.01,
    )
    .unwrap();
    let x = pt(&[0.2, 0.1]);
    let px = engine.pu(&x).unwrap();
    let mut worst: f64 = 0.0;
    for k in 2..9 {
        let h = 0.5f64.powi(k);
        let y = &x + pt(&[h, -h]);
        let q = (engine.pu(&y).unwrap().as_ref() - px.as_ref()).norm() / (y - &x).norm().powf(beta);
        worst = worst.max(q);
    }
    assert!(worst < 10.0, "Hölder quotient {worst}");
}

#[test]
fn p1_at_origin_and_without_coupling() {
    let c = CenterCocycle::unstable(Arc::new(catalog::twou4_with(0.0)));
    let f = compute_invariant_splitting(&c, &pt(&[0.3, 0.3]), 30).unwrap();
    assert!((assemble_p1(&f).unwrap() - DMatrix::identity(2, 2)).abs().max() < 1e-14);
    let m = catalog::lin3();
    let c = CenterCocycle::center(Arc::new(m.clone()));
    let p = cocycle_product(&c, 7, 2, &pt(&[0.3])).unwrap();
    assert!((p - m.linear_part().pow(5)).abs().max() < 1e-13);
}
