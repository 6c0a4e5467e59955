//! Acceptance suite: one PASS/FAIL line per criterion, with the measured
//! values, thresholds and runtimes. Values are recomputed here with
//! test-side oracles (central differences, direct orbit iteration, direct
//! formula evaluation, an independent least-squares fit) rather than read
//! from the library's own check records.
//!
//! Runs as a plain binary (`harness = false`) so the lines always print;
//! exits non-zero when any gating criterion fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use partlin::catalog;
use partlin::cocycle::holder_exponent_bound;
use partlin::linearize::{linearize, Linearization, LinearizeConfig};
use partlin::lp::{solve_stable_lp_on_xcs, solve_unstable_lp, LPConfig, UnstableFoliation};
use partlin::pipeline::{lattice, normalize, PipelineConfig};
use partlin::verify::{
    counterexample_demo, inner_grid, reduced_map, run_scope, seeded_directions, seeded_points, DemoConfig, Scope,
    VerifyConfig,
};
use partlin::{DiscreteMap, MapModel, MapRef, Projection};

struct Outcome {
    id: &'static str,
    title: &'static str,
    passed: bool,
    gating: bool,
    detail: String,
    runtime_s: f64,
}

type Check = fn() -> Result<(bool, String), String>;

fn pt(v: &[f64]) -> DVector<f64> {
    DVector::from_vec(v.to_vec())
}

/// Central-difference Jacobian with step `eps^{1/3} max(1, |x|)`.
fn central_jacobian(f: &dyn Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>) -> DMatrix<f64> {
    let h = f64::EPSILON.cbrt() * x.norm().max(1.0);
    let n = x.len();
    let m = f(x).len();
    let mut j = DMatrix::zeros(m, n);
    for k in 0..n {
        let (mut a, mut b) = (x.clone(), x.clone());
        a[k] += h;
        b[k] -= h;
        j.set_column(k, &((f(&a) - f(&b)) / (2.0 * h)));
    }
    j
}

fn block(m: &DMatrix<f64>, r: std::ops::Range<usize>) -> DMatrix<f64> {
    m.view((r.start, r.start), (r.len(), r.len())).into_owned()
}

fn build(model: MapModel) -> Result<Linearization, String> {
    let flags = model.flags;
    let map: MapRef = Arc::new(model);
    let n = normalize(map, flags, &PipelineConfig::default()).map_err(|e| e.to_string())?;
    linearize(n, &LinearizeConfig::default()).map_err(|e| e.to_string())
}

/// `DF4(y_c)` by central differences.
fn center_jacobian(lin: &Linearization, y_c: &DVector<f64>) -> Result<DMatrix<f64>, String> {
    let f4 = lin.normalization.model.clone();
    let s = f4.structure().clone();
    let base = s.embed(y_c, Projection::C).map_err(|e| e.to_string())?;
    Ok(central_jacobian(&|x| f4.eval(x).expect("model evaluation"), &base))
}

/// `(A_s(y_c) y_s, π_c F4(y_c), A_u(y_c) y_u)` from central differences.
fn normal_form_oracle(lin: &Linearization, y: &DVector<f64>) -> Result<DVector<f64>, String> {
    let f4 = &lin.normalization.model;
    let s = f4.structure().clone();
    let e = |r: partlin::Result<DVector<f64>>| r.map_err(|e| e.to_string());
    let y_c = e(s.split(y, Projection::C))?;
    let j = center_jacobian(lin, &y_c)?;
    let center = e(f4.eval(&e(s.embed(&y_c, Projection::C))?))?;
    let mut out = DVector::zeros(s.dim());
    for r in [s.s_range(), s.u_range()] {
        let part = block(&j, r.clone()) * y.rows(r.start, r.len());
        out.rows_mut(r.start, r.len()).copy_from(&part);
    }
    let c = s.c_range();
    out.rows_mut(c.start, c.len()).copy_from(&center.rows(c.start, c.len()));
    Ok(out)
}

fn grid_points(d: usize) -> Vec<DVector<f64>> {
    inner_grid(d, 10, 0.25)
}

fn c1() -> Result<(bool, String), String> {
    let t0 = Instant::now();
    let lin = build(catalog::lin3())?;
    let f = lin.normalization.original.clone();
    let grid = grid_points(3);
    let mut worst = 0.0f64;
    for y in &grid {
        let hy = lin.conjugacy(y).map_err(|e| e.to_string())?;
        let back = lin
            .conjugacy_inverse(&f.eval(&hy).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        worst = worst.max((back - normal_form_oracle(&lin, y)?).norm());
        worst = worst.max((hy - y).norm());
    }
    let rt = t0.elapsed().as_secs_f64();
    let ok = lin.is_identity() && worst <= 1e-12 && rt < 5.0;
    Ok((
        ok,
        format!(
            "identity stack {}; max residual {worst:.2e} <= 1e-12 on {} points; {rt:.2} s < 5 s",
            lin.is_identity(),
            grid.len()
        ),
    ))
}

fn c2() -> Result<(bool, String), String> {
    let t0 = Instant::now();
    let m = catalog::poly3();
    let cfg = LPConfig::unstable_default(&m.structure().envelopes).with_truncation(25);
    let xs = seeded_points(3, 25, 0.2, 11);
    let zs = seeded_points(1, 25, 0.2, 12);
    let mut worst = 0.0f64;
    for (x, z) in xs.iter().zip(&zs) {
        let q = solve_unstable_lp(&m, x, z, &cfg).map_err(|e| e.to_string())?;
        // Orbit differences by direct backward iteration.
        let (mut a, mut b) = (x.clone(), x + q.zeroth());
        for n in 0..=10i64 {
            if n > 0 {
                a = m.inverse(&a).map_err(|e| e.to_string())?;
                b = m.inverse(&b).map_err(|e| e.to_string())?;
            }
            worst = worst.max((q.at(-n) - (&b - &a)).norm() / q.norm.max(1.0));
        }
    }
    let rt = t0.elapsed().as_secs_f64();
    Ok((
        worst <= 1e-8 && rt < 30.0,
        format!("max deviation {worst:.2e} <= 1e-8 over 25 samples, n in [-10, 0]; {rt:.2} s < 30 s"),
    ))
}

fn c3() -> Result<(bool, String), String> {
    let mut details = Vec::new();
    let mut ok = true;
    for model in [catalog::poly3(), catalog::poly3b(), catalog::twou4()] {
        let name = model.name.clone();
        let s = model.structure().clone();
        let lin = build(model.clone())?;
        let f4 = lin.normalization.model.clone();
        let ucfg = LPConfig::unstable_default(&s.envelopes);
        let scfg = LPConfig::stable_default(&s.envelopes);
        let (mut wu, mut ws) = (0.0f64, 0.0f64);
        for x in seeded_points(s.dim(), 25, 0.2, 13) {
            // z_u = π_u x: the leaf through x is hit at x itself, so q_0 = 0
            // and h_u(x, π_u x) = π_cs x + π_cs q_0.
            let z = s.split(&x, Projection::U).map_err(|e| e.to_string())?;
            let q = solve_unstable_lp(&model, &x, &z, &ucfg).map_err(|e| e.to_string())?;
            wu = wu.max(s.split(q.zeroth(), Projection::CS).map_err(|e| e.to_string())?.norm());
            // Stable chart on X_cs of the normalized model: z_s = pi_s x_cs
            // gives h_s(x_cs, z_s) = x_c.
            let x_cs = s.split(&x, Projection::CS).map_err(|e| e.to_string())?;
            let z_s = x_cs.rows(0, s.dim_s()).into_owned();
            let (_, h_s) = solve_stable_lp_on_xcs(f4.as_ref(), &x_cs, &z_s, &scfg).map_err(|e| e.to_string())?;
            ws = ws.max((h_s - x_cs.rows(s.dim_s(), s.dim_c())).norm());
        }
        ok &= wu <= 1e-10 && ws <= 1e-10;
        details.push(format!("{name}: h_u {wu:.1e}, h_s {ws:.1e}"));
    }
    Ok((ok, format!("{} (threshold 1e-10, 25 samples each)", details.join("; "))))
}

fn c4() -> Result<(bool, String), String> {
    let mut details = Vec::new();
    let mut ok = true;
    for model in [catalog::poly3(), catalog::poly3b()] {
        let name = model.name.clone();
        let s = model.structure().clone();
        let map: MapRef = Arc::new(model);
        let cfg = LPConfig::unstable_default(&s.envelopes);
        let rho = cfg.rho;
        let chart = UnstableFoliation::new(map.clone(), cfg).map_err(|e| e.to_string())?;
        let xs = seeded_points(s.dim(), 100, 0.2, 14);
        let zs = seeded_points(s.dim_u(), 100, 0.2, 15);
        let (mut agree, mut invariance) = (0usize, 0.0f64);
        for (x, z) in xs.iter().zip(&zs) {
            let p = chart.leaf_point(x, z).map_err(|e| e.to_string())?;
            // Backward-orbit membership, iterated here: weighted deviation
            // against 10 |p - x| over a horizon of 20.
            let (mut a, mut b) = (x.clone(), p.clone());
            let mut dev = (&b - &a).norm();
            for n in 1..=20 {
                a = map.inverse(&a).map_err(|e| e.to_string())?;
                b = map.inverse(&b).map_err(|e| e.to_string())?;
                dev = dev.max(rho.powi(n) * (&b - &a).norm());
            }
            agree += (dev <= 10.0 * (&p - x).norm()) as usize;
            // Invariance: F(p) lies on the leaf through F(x).
            let (fx, fp) = (map.eval(x).map_err(|e| e.to_string())?, map.eval(&p).map_err(|e| e.to_string())?);
            let zu = s.split(&fp, Projection::U).map_err(|e| e.to_string())?;
            let q = chart.leaf_point(&fx, &zu).map_err(|e| e.to_string())?;
            invariance = invariance.max((q - fp).norm());
        }
        ok &= agree == xs.len() && invariance <= 1e-7;
        details.push(format!("{name}: oracle {agree}/{}, invariance {invariance:.1e}", xs.len()));
    }
    Ok((ok, format!("{} (horizon 20, bound 10|z - x|)", details.join("; "))))
}

fn c5() -> Result<(bool, String), String> {
    let mut details = Vec::new();
    let mut ok = true;
    for model in [catalog::poly3(), catalog::twou4()] {
        let name = model.name.clone();
        let lin = build(model)?;
        let engine = lin.reduction.engine().ok_or("no transfer engine")?;
        let f4 = lin.normalization.model.clone();
        let s = f4.structure().clone();
        let dcs = s.dim_s() + s.dim_c();
        let a_u = |x_cs: &DVector<f64>| -> DMatrix<f64> {
            let x = s.embed(x_cs, Projection::CS).expect("embed");
            block(&central_jacobian(&|y| f4.eval(y).expect("eval"), &x), s.u_range())
        };
        let mut worst = 0.0f64;
        for x in seeded_points(dcs, 20, 0.3, 16) {
            let full = s.embed(&x, Projection::CS).map_err(|e| e.to_string())?;
            let gx = s
                .split(&f4.eval(&full).map_err(|e| e.to_string())?, Projection::CS)
                .map_err(|e| e.to_string())?;
            let mut xc = x.clone();
            xc.rows_mut(0, s.dim_s()).fill(0.0);
            let p = engine.pu(&x).map_err(|e| e.to_string())?;
            let pg = engine.pu(&gx).map_err(|e| e.to_string())?;
            let r = (pg.as_ref() * a_u(&x) - a_u(&xc) * p.as_ref()).norm();
            worst = worst.max(r);
        }
        // Series rate: geometric fit of the term norms against θ.
        let probe = pt(&vec![0.2; dcs]);
        let t = engine.compute(&probe).map_err(|e| e.to_string())?;
        let mut rates = Vec::new();
        for (terms, theta) in t.term_norms.iter().zip(engine.thetas()) {
            let used: Vec<(f64, f64)> = terms
                .iter()
                .enumerate()
                .filter(|(_, v)| **v > 1e-14)
                .map(|(k, v)| (k as f64, v.ln()))
                .collect();
            if used.len() >= 3 {
                let n = used.len() as f64;
                let mx = used.iter().map(|p| p.0).sum::<f64>() / n;
                let my = used.iter().map(|p| p.1).sum::<f64>() / n;
                let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
                let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
                let rate = (sxy / sxx).exp();
                ok &= rate < 1.0 && rate <= theta + 0.05;
                rates.push(format!("{rate:.3} vs theta {theta:.3}"));
            } else {
                rates.push(format!("terms vanish (theta {theta:.3})"));
            }
        }
        ok &= worst <= 1e-6;
        details.push(format!("{name}: residual {worst:.1e}, rates [{}]", rates.join(", ")));
    }
    Ok((ok, format!("{} (threshold 1e-6, 20 base points)", details.join("; "))))
}

fn c6() -> Result<(bool, String), String> {
    let lin = build(catalog::twou4())?;
    let f = reduced_map(&lin);
    let s = f.structure().clone();
    let u = s.u_range();
    let mut worst = 0.0f64;
    let base = lattice(s.dim_s() + s.dim_c(), 5, 0.25);
    for x_cs in &base {
        let x = s.embed(x_cs, Projection::CS).map_err(|e| e.to_string())?;
        let fiber = |v: &DVector<f64>| {
            let mut y = x.clone();
            y.rows_mut(u.start, u.len()).copy_from(v);
            let out = f.eval(&y).expect("reduced map");
            out.rows(u.start, u.len()).into_owned()
        };
        let d = central_jacobian(&fiber, &DVector::zeros(u.len()));
        let x_c = x_cs.rows(s.dim_s(), s.dim_c()).into_owned();
        let a = block(&center_jacobian(&lin, &x_c)?, u.clone());
        worst = worst.max((d - a).norm());
    }
    Ok((worst <= 1e-6, format!("TWOU4: max |D_u(pi_u F~) - A_u(x_c)| {worst:.2e} <= 1e-6 on {} base points", base.len())))
}

fn c7() -> Result<(bool, String), String> {
    let lin = build(catalog::poly3())?;
    let f = reduced_map(&lin);
    let f4 = lin.normalization.model.clone();
    let s = f4.structure().clone();
    let (u, cs) = (s.u_range(), s.cs_range());
    let grid = grid_points(3);
    let (mut worst, mut worst_ratio, mut non_cauchy) = (0.0f64, 0.0f64, 0usize);
    for y in &grid {
        let image = f.eval(&lin.fiber.phi(y).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let (back, trace) = lin.fiber.phi_inverse_traced(&image).map_err(|e| e.to_string())?;
        if let Some(r) = trace.cauchy_ratio() {
            worst_ratio = worst_ratio.max(r);
            non_cauchy += (r >= 1.0) as usize;
        }
        let y_cs = y.rows(cs.start, cs.len()).into_owned();
        let mut expect = f4
            .eval(&s.embed(&y_cs, Projection::CS).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let y_c = s.split(y, Projection::C).map_err(|e| e.to_string())?;
        let a = block(&center_jacobian(&lin, &y_c)?, u.clone());
        expect.rows_mut(u.start, u.len()).copy_from(&(a * y.rows(u.start, u.len())));
        worst = worst.max((back - expect).norm());
    }
    Ok((
        worst <= 1e-7 && non_cauchy == 0,
        format!(
            "POLY3: max residual {worst:.2e} <= 1e-7 on {} points; largest backward Cauchy ratio {worst_ratio:.3} < 1",
            grid.len()
        ),
    ))
}

fn c8() -> Result<(bool, String), String> {
    let mut details = Vec::new();
    let mut ok = true;
    for model in [catalog::poly3(), catalog::poly3b(), catalog::twou4()] {
        let t0 = Instant::now();
        let name = model.name.clone();
        let lin = build(model)?;
        let f = lin.normalization.original.clone();
        let s = f.structure().clone();
        let grid = grid_points(s.dim());
        let mut worst = 0.0f64;
        for y in &grid {
            let hy = lin.conjugacy(y).map_err(|e| e.to_string())?;
            let back = lin
                .conjugacy_inverse(&f.eval(&hy).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
            worst = worst.max((back - normal_form_oracle(&lin, y)?).norm());
        }
        let mut center = 0.0f64;
        for c in lattice(s.dim_c(), 10, 0.25) {
            let x = s.embed(&c, Projection::C).map_err(|e| e.to_string())?;
            center = center.max((lin.conjugacy(&x).map_err(|e| e.to_string())? - &x).norm());
            center = center.max((lin.conjugacy_inverse(&x).map_err(|e| e.to_string())? - &x).norm());
        }
        let rt = t0.elapsed().as_secs_f64();
        ok &= worst <= 1e-6 && center <= 1e-10 && rt < 300.0;
        details.push(format!(
            "{name}: residual {worst:.1e} on {} points, center {center:.1e}, {rt:.0} s",
            grid.len()
        ));
    }
    Ok((ok, format!("{} (thresholds 1e-6, 1e-10, 300 s)", details.join("; "))))
}

/// Least-squares slope of `log r` against `log s`, on remainders above
/// `floor`.
fn slope(points: &[(f64, f64)], floor: f64) -> Option<f64> {
    let used: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.1 >= floor)
        .map(|p| (p.0.ln(), p.1.ln()))
        .collect();
    if used.len() < 3 {
        return None;
    }
    let n = used.len() as f64;
    let mx = used.iter().map(|p| p.0).sum::<f64>() / n;
    let my = used.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

fn c9() -> Result<(bool, String), String> {
    let mut details = Vec::new();
    let mut ok = true;
    for model in [catalog::poly3(), catalog::poly3b()] {
        let name = model.name.clone();
        let lin = build(model)?;
        let s = lin.normal_form.structure().clone();
        let d = s.dim();
        let dirs = seeded_directions(d, 20, 17);
        let floor = 100.0 * LinearizeConfig::default().tol;
        let mut worst = f64::INFINITY;
        for c in lattice(s.dim_c(), 5, 0.2) {
            let center = s.embed(&c, Projection::C).map_err(|e| e.to_string())?;
            let jet = lin.center_jet(&c).map_err(|e| e.to_string())?;
            let h0 = lin.conjugacy(&center).map_err(|e| e.to_string())?;
            let mut pts = Vec::new();
            for v in &dirs {
                for j in 3..=10 {
                    let sc = 0.5f64.powi(j);
                    let hx = lin.conjugacy(&(&center + v * sc)).map_err(|e| e.to_string())?;
                    pts.push((sc, (hx - &h0 - &jet * v * sc).norm()));
                }
            }
            worst = worst.min(slope(&pts, floor).unwrap_or(f64::NAN));
        }
        let jet0 = lin.center_jet(&DVector::zeros(s.dim_c())).map_err(|e| e.to_string())?;
        let id_dev = (jet0 - DMatrix::identity(d, d)).amax();
        // Continuity: neighbour differences of Δ shrink when the spacing halves.
        let jump = |k: usize| -> Result<f64, String> {
            let pts = lattice(s.dim_c(), k, 0.25);
            let mut w = 0.0f64;
            for pair in pts.windows(2) {
                let a = lin.center_jet(&pair[0]).map_err(|e| e.to_string())?;
                let b = lin.center_jet(&pair[1]).map_err(|e| e.to_string())?;
                w = w.max((a - b).amax());
            }
            Ok(w)
        };
        let (coarse, fine) = (jump(5)?, jump(9)?);
        let continuous = fine <= 1e-12 || fine <= 0.75 * coarse;
        ok &= worst >= 1.05 && id_dev <= 1e-8 && continuous;
        details.push(format!(
            "{name}: min exponent {worst:.3}, |Delta(0) - id| {id_dev:.1e}, jumps {coarse:.1e} -> {fine:.1e}"
        ));
    }
    Ok((ok, format!("{} (threshold 1.05, 5 centers x 20 directions)", details.join("; "))))
}

fn c10() -> Result<(bool, String), String> {
    // (tau1, tau2, rho, alpha, eps) covering the three cases.
    let cases = [
        (0.5, 0.8, 1.0, 1.0, 0.01),
        (0.5, 2.0, 1.0, 1.0, 0.01),
        (0.5, 1.0, 1.0, 1.0, 0.01),
        (0.3, 3.0, 1.5, 0.7, 0.01),
        (0.4, 0.5, 1.2, 0.9, 0.02),
        (0.6, 1.25, 0.8, 0.5, 0.05),
    ];
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (t1, t2, r, a, e) in cases {
        let direct = if r * t2 < 1.0 - 1e-12 {
            a
        } else if r * t2 > 1.0 + 1e-12 {
            (f64::ln(t1) + f64::ln(r)) / (f64::ln(t1) - f64::ln(t2)) * a
        } else {
            a - e
        };
        let got = holder_exponent_bound(t1, t2, r, a, e).map_err(|e| e.to_string())?;
        worst = worst.max((got - direct).abs());
        parts.push(format!("{got:.4}"));
    }
    let sample = holder_exponent_bound(0.5, 2.0, 1.0, 1.0, 0.01).map_err(|e| e.to_string())?;
    let boundary = holder_exponent_bound(0.5, 1.0, 1.0, 1.0, 0.01).map_err(|e| e.to_string())?;
    Ok((
        worst <= 1e-12 && (sample - 0.5).abs() <= 1e-12 && (boundary - 0.99).abs() <= 1e-12,
        format!("max |computed - direct| {worst:.1e} <= 1e-12 over {} cases [{}]", cases.len(), parts.join(", ")),
    ))
}

fn c11() -> Result<(bool, String), String> {
    let r = counterexample_demo(&DemoConfig::default()).map_err(|e| e.to_string())?;
    let below = r.counterexample.local_slopes.iter().filter(|p| p.1 < 1.05).count();
    let ok = !r.counterexample.stays_above && r.contrast.stays_above;
    Ok((
        ok,
        format!(
            "CEX1 local slopes below 1.05 in {below}/{} windows (min {:.3}); contrast min {:.3}",
            r.counterexample.local_slopes.len(),
            r.counterexample.min_local_slope,
            r.contrast.min_local_slope
        ),
    ))
}

fn c12() -> Result<(bool, String), String> {
    let cfg = VerifyConfig {
        grid: 5,
        ..VerifyConfig::default()
    };
    let mut compared = 0usize;
    let mut differing = Vec::new();
    for model in [catalog::lin3(), catalog::poly3(), catalog::cex1()] {
        let a = run_scope(model.clone(), &cfg, Scope::Full).map_err(|e| e.to_string())?;
        let b = run_scope(model, &cfg, Scope::Full).map_err(|e| e.to_string())?;
        for (x, y) in a.tables.iter().zip(&b.tables) {
            compared += 1;
            if x.to_csv() != y.to_csv() {
                differing.push(format!("{}:{}", a.report.map, x.name));
            }
        }
        if a.tables.len() != b.tables.len() {
            differing.push(format!("{}: table count", a.report.map));
        }
    }
    Ok((
        differing.is_empty(),
        format!("{compared} CSV tables compared across two runs; differing: {:?}", differing),
    ))
}

fn main() -> ExitCode {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [(&str, &str, bool, Check); 12] = [
        ("C1", "linear identity (LIN3)", true, c1),
        ("C2", "LP / orbit equivalence (POLY3)", true, c2),
        ("C3", "chart identities", true, c3),
        ("C4", "foliation invariance + oracle", true, c4),
        ("C5", "cocycle cohomology", true, c5),
        ("C6", "reduction outcome (TWOU4)", true, c6),
        ("C7", "fiber linearization (POLY3)", true, c7),
        ("C8", "full conjugacy residual", true, c8),
        ("C9", "differentiability on the center manifold", true, c9),
        ("C10", "Hoelder-exponent calculator", true, c10),
        ("C11", "sharpness demo (report-only)", false, c11),
        ("C12", "determinism", true, c12),
    ];
    let mut outcomes = Vec::new();
    for (id, title, gating, check) in criteria {
        if let Some(f) = &filter {
            if !id.eq_ignore_ascii_case(f) {
                continue;
            }
        }
        let t0 = Instant::now();
        let (passed, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let o = Outcome {
            id,
            title,
            passed,
            gating,
            detail,
            runtime_s: t0.elapsed().as_secs_f64(),
        };
        println!(
            "{} {:<4} {}: {} [{:.1} s]",
            if o.passed { "PASS" } else { "FAIL" },
            o.id,
            o.title,
            o.detail,
            o.runtime_s
        );
        outcomes.push(o);
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| o.gating && !o.passed).map(|o| o.id).collect();
    println!(
        "acceptance: {}/{} criteria passed{}",
        outcomes.iter().filter(|o| o.passed).count(),
        outcomes.len(),
        if failed.is_empty() { String::new() } else { format!("; gating failures: {}", failed.join(", ")) }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
