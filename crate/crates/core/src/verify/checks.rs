//! Residual grids and oracle cross-checks.

use std::ops::RangeInclusive;
use std::sync::Arc;

use nalgebra::DVector;
use serde::Serialize;

use crate::blocks::{Projection, SpectralStructure};
use crate::cocycle::{assemble_pu, holder_exponent_bound, TransferEngine};
use crate::error::{Error, Result};
use crate::linearize::Linearization;
use crate::lp::{
    leaf_membership_oracle, solve_stable_lp_on_xcs, solve_unstable_lp, LPConfig, LeafCheck, StableFoliation,
    UnstableFoliation, WeightedSequence,
};
use crate::map::{DiscreteMap, MapRef};
use crate::numeric::{fd_jacobian, max_abs};
use crate::pipeline::{ConjugatedMap, Transform, TransformRef};

/// Summary of a residual sample.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ResidualStats {
    pub count: usize,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
    /// Residual per sample, in sample order.
    pub values: Vec<f64>,
}

impl ResidualStats {
    pub fn from_values(values: Vec<f64>) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let rank = |q: f64| sorted[((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1];
        Self {
            count: values.len(),
            max: *sorted.last().unwrap(),
            mean: values.iter().sum::<f64>() / values.len() as f64,
            median: rank(0.5),
            p95: rank(0.95),
            values,
        }
    }
}

/// `|𝓗^{-1}(F(𝓗(y))) - nf(y)|` over `grid`, with `h.forward = 𝓗`.
pub fn conjugacy_residual_grid(
    f: &dyn DiscreteMap,
    h: &dyn Transform,
    nf: &dyn DiscreteMap,
    grid: &[DVector<f64>],
) -> Result<ResidualStats> {
    let mut values = Vec::with_capacity(grid.len());
    for y in grid {
        let lhs = h.inverse(&f.eval(&h.forward(y)?)?)?;
        values.push((lhs - nf.eval(y)?).norm());
    }
    Ok(ResidualStats::from_values(values))
}

/// Largest `|𝓗(x_c) - x_c|` and `|𝓗^{-1}(x_c) - x_c|` over center
/// coordinates `centers`.
pub fn center_fixing(h: &dyn Transform, s: &SpectralStructure, centers: &[DVector<f64>]) -> Result<(f64, f64)> {
    let (mut fwd, mut inv) = (0.0f64, 0.0f64);
    for c in centers {
        let x = s.embed(c, Projection::C)?;
        fwd = fwd.max((h.forward(&x)? - &x).norm());
        inv = inv.max((h.inverse(&x)? - &x).norm());
    }
    Ok((fwd, inv))
}

/// Largest relative error `max|DF - DF_fd| / max(max|DF|, 1)` between the
/// map's Jacobian and central differences, per sample.
pub fn jacobian_fd_check(map: &dyn DiscreteMap, samples: &[DVector<f64>]) -> Result<ResidualStats> {
    let mut values = Vec::with_capacity(samples.len());
    for x in samples {
        let j = map.jacobian(x)?;
        let fd = fd_jacobian(|y| map.eval(y), x)?;
        values.push(max_abs(&(&j - fd)) / max_abs(&j).max(1.0));
    }
    Ok(ResidualStats::from_values(values))
}

/// Largest `|q_n - (F^n(x + q_0) - F^n(x))|` over `range` (which must lie
/// within the stored indices of `seq`).
pub fn lp_orbit_consistency_check(
    map: &dyn DiscreteMap,
    seq: &WeightedSequence,
    x: &DVector<f64>,
    range: RangeInclusive<i64>,
) -> Result<f64> {
    let hi = seq.lo() + seq.entries.len() as i64 - 1;
    if *range.start() < seq.lo() || *range.end() > hi {
        return Err(Error::input(format!(
            "indices {range:?} outside the stored range {}..={hi}",
            seq.lo()
        )));
    }
    let x0 = x + seq.zeroth();
    let mut worst = 0.0f64;
    for n in range {
        let diff = map.iterate(&x0, n)? - map.iterate(x, n)?;
        worst = worst.max((seq.at(n) - diff).norm());
    }
    Ok(worst)
}

/// Chart identities evaluated through the solvers (not the shortcuts of
/// the chart types).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChartIdentity {
    /// `max |h_u(x, π_u x) - π_cs x|`.
    pub unstable: f64,
    /// `max |h_s(x_cs, x_s) - x_c|`; `None` when no stable chart was given.
    pub stable: Option<f64>,
}

/// Solves the unstable problem with `z_u = π_u x` on `map`, and the stable
/// problem on `X_cs` with `z_s = x_s` on `stable_map`, for every sample.
pub fn chart_identity_check(
    map: &dyn DiscreteMap,
    unstable: &LPConfig,
    stable: Option<(&dyn DiscreteMap, &LPConfig)>,
    samples: &[DVector<f64>],
) -> Result<ChartIdentity> {
    let s = map.structure();
    let mut worst_u = 0.0f64;
    let mut worst_s = 0.0f64;
    for x in samples {
        let x_cs = s.split(x, Projection::CS)?;
        if s.dim_u() > 0 {
            let q = solve_unstable_lp(map, x, &s.split(x, Projection::U)?, unstable)?;
            worst_u = worst_u.max(s.split(q.zeroth(), Projection::CS)?.norm());
        }
        if let Some((m, cfg)) = stable {
            let z_s = x_cs.rows(0, s.dim_s()).into_owned();
            let (_, h) = solve_stable_lp_on_xcs(m, &x_cs, &z_s, cfg)?;
            worst_s = worst_s.max((h - s.split(x, Projection::C)?).norm());
        }
    }
    Ok(ChartIdentity {
        unstable: worst_u,
        stable: stable.map(|_| worst_s),
    })
}

/// One unstable leaf sample.
#[derive(Debug, Clone, Serialize)]
pub struct LeafSample {
    pub x: Vec<f64>,
    pub z_u: Vec<f64>,
    /// `z_u + h_u(x, z_u)`.
    pub leaf: Vec<f64>,
    /// `|π_cs F(z) - h_u(F(x), π_u F(z))|`.
    pub invariance: f64,
    pub oracle: LeafCheck,
    /// Oracle verdict for the leaf point pushed off the leaf along the first
    /// center-stable axis.
    pub control: LeafCheck,
}

/// Leaf invariance and backward-orbit oracle agreement.
#[derive(Debug, Clone, Serialize)]
pub struct FoliationCheck {
    pub samples: Vec<LeafSample>,
    pub invariance_max: f64,
    pub members: usize,
    pub control_rejections: usize,
}

impl FoliationCheck {
    pub fn agreement(&self) -> [usize; 2] {
        [self.members, self.samples.len()]
    }
}

/// For every `(x, z_u)`: builds the leaf point `z`, checks that `F(z)` lies
/// on the leaf through `F(x)` and runs the membership oracle (weight of the
/// chart, horizon `horizon`, bound `10 |z - x|`) on `z` and on a control
/// point moved off the leaf.
pub fn foliation_invariance_check(
    chart: &UnstableFoliation,
    samples: &[(DVector<f64>, DVector<f64>)],
    horizon: usize,
) -> Result<FoliationCheck> {
    let map = chart.map.as_ref();
    let s = map.structure();
    let mut out = Vec::with_capacity(samples.len());
    for (x, z_u) in samples {
        let z = chart.leaf_point(x, z_u)?;
        let (fx, fz) = (map.eval(x)?, map.eval(&z)?);
        let image = chart.h_u(&fx, &s.split(&fz, Projection::U)?)?;
        let invariance = (s.split(&fz, Projection::CS)? - image).norm();
        let oracle = leaf_membership_oracle(map, x, &z, chart.cfg.rho, horizon, None)?;
        let mut off = z.clone();
        off[s.cs_range().start] += 0.25 * (&z - x).norm().max(1e-3);
        let control = leaf_membership_oracle(map, x, &off, chart.cfg.rho, horizon, None)?;
        out.push(LeafSample {
            x: x.iter().cloned().collect(),
            z_u: z_u.iter().cloned().collect(),
            leaf: z.iter().cloned().collect(),
            invariance,
            oracle,
            control,
        });
    }
    Ok(FoliationCheck {
        invariance_max: out.iter().map(|p| p.invariance).fold(0.0, f64::max),
        members: out.iter().filter(|p| p.oracle.member).count(),
        control_rejections: out.iter().filter(|p| !p.control.member).count(),
        samples: out,
    })
}

/// Mirrored check on `X_cs`: for `z = (z_s, h_s(x_cs, z_s))`,
/// `|π_c g(z) - h_s(g(x_cs), π_s g(z))|` with `g = π_cs F(·, 0)`.
pub fn stable_invariance_check(
    chart: &StableFoliation,
    samples: &[(DVector<f64>, DVector<f64>)],
) -> Result<ResidualStats> {
    let s = chart.map.structure().clone();
    let ds = s.dim_s();
    let g = |v: &DVector<f64>| -> Result<DVector<f64>> {
        s.split(&chart.map.eval(&s.embed(v, Projection::CS)?)?, Projection::CS)
    };
    let mut values = Vec::with_capacity(samples.len());
    for (x_cs, z_s) in samples {
        let mut z = x_cs.clone();
        z.rows_mut(0, ds).copy_from(z_s);
        let zc = chart.h_s(x_cs, z_s)?;
        z.rows_mut(ds, zc.len()).copy_from(&zc);
        let (gx, gz) = (g(x_cs)?, g(&z)?);
        let image = chart.h_s(&gx, &gz.rows(0, ds).into_owned())?;
        values.push((gz.rows(ds, gz.len() - ds) - image).norm());
    }
    Ok(ResidualStats::from_values(values))
}

/// Cohomology residuals and transfer-series ratios.
#[derive(Debug, Clone, Serialize)]
pub struct CohomologyCheck {
    pub residuals: ResidualStats,
    /// Largest observed term ratio per unstable block; `None` when the
    /// series terminated before three nonzero terms at every base point.
    pub ratios: Vec<Option<f64>>,
    /// Predicted rate `θ_i` per block.
    pub thetas: Vec<f64>,
}

impl CohomologyCheck {
    /// Every observed ratio is below one and at most `θ_i + slack`.
    pub fn ratios_ok(&self, slack: f64) -> bool {
        self.ratios
            .iter()
            .zip(&self.thetas)
            .all(|(r, t)| r.map_or(true, |r| r < 1.0 && r <= t + slack))
    }
}

/// `|P_u(g x) A_u(x) - A_u(x_c) P_u(x)|` and the geometric rate
/// `(|t_last| / |t_1|)^{1/(n-2)}` of the series terms at each base point.
pub fn cohomology_check(engine: &TransferEngine, points: &[DVector<f64>]) -> Result<CohomologyCheck> {
    let nb = engine.thetas().len();
    let mut ratios: Vec<Option<f64>> = vec![None; nb];
    let mut residuals = Vec::with_capacity(points.len());
    for x in points {
        let t = assemble_pu(engine, x)?;
        residuals.push(t.cohomology_residual.unwrap_or(f64::NAN));
        for (i, terms) in t.term_norms.iter().enumerate() {
            let nz: Vec<f64> = terms.iter().cloned().filter(|v| *v > 1e-300).collect();
            if nz.len() < 3 {
                continue;
            }
            let rate = (nz[nz.len() - 1] / nz[1]).powf(1.0 / (nz.len() - 2) as f64);
            ratios[i] = Some(ratios[i].map_or(rate, |r: f64| r.max(rate)));
        }
    }
    Ok(CohomologyCheck {
        residuals: ResidualStats::from_values(residuals),
        ratios,
        thetas: engine.thetas().to_vec(),
    })
}

/// `F̃ = Θ ∘ H^{-1} ∘ F4 ∘ H ∘ Θ^{-1}`, the reduced map of a linearization.
pub fn reduced_map(lin: &Linearization) -> MapRef {
    let semi: TransformRef = lin.semi.clone();
    let reduction: TransformRef = lin.reduction.clone();
    let fhat: MapRef = Arc::new(ConjugatedMap::new(lin.normalization.model.clone(), semi));
    Arc::new(ConjugatedMap::new(fhat, reduction))
}

/// Finite-difference fiber derivative of the reduced map.
#[derive(Debug, Clone, Serialize)]
pub struct ReducedCocycleCheck {
    /// `max |∂_{x_u} π_u F̃(x_cs, 0) - A_u(x_c)|` per base point.
    pub deviations: ResidualStats,
}

pub fn reduced_cocycle_check(lin: &Linearization, points_cs: &[DVector<f64>]) -> Result<ReducedCocycleCheck> {
    let f = reduced_map(lin);
    let s = lin.normal_form.structure().clone();
    let (u, du) = (s.u_range(), s.dim_u());
    let mut values = Vec::with_capacity(points_cs.len());
    for b in points_cs {
        let base = s.embed(b, Projection::CS)?;
        let fiber = |v: &DVector<f64>| -> Result<DVector<f64>> {
            let mut x = base.clone();
            x.rows_mut(u.start, du).copy_from(v);
            Ok(f.eval(&x)?.rows(u.start, du).into_owned())
        };
        let j = fd_jacobian(fiber, &DVector::zeros(du))?;
        let xc = s.split(&base, Projection::C)?;
        values.push(max_abs(&(j - lin.normal_form.a_u(&xc)?)));
    }
    Ok(ReducedCocycleCheck {
        deviations: ResidualStats::from_values(values),
    })
}

/// Conjugacy of the reduced map to its fiberwise linear part.
#[derive(Debug, Clone, Serialize)]
pub struct FiberConjugacy {
    /// `|Φ^{-1}(F̃(Φ(y))) - (g(y_cs), A_u(y_c) y_u)|` per grid point.
    pub residuals: ResidualStats,
    /// Largest Cauchy ratio of the backward limits that had enough steps.
    pub max_cauchy_ratio: Option<f64>,
    /// Number of limits with a fitted ratio.
    pub fitted_limits: usize,
    /// Longest limit, in steps.
    pub max_steps: usize,
    pub predicted_ratio: f64,
}

pub fn fiber_conjugacy_check(lin: &Linearization, grid: &[DVector<f64>]) -> Result<FiberConjugacy> {
    let f = reduced_map(lin);
    let nf = &lin.normal_form;
    let s = nf.structure().clone();
    let (cs, u) = (s.cs_range(), s.u_range());
    let model = &lin.normalization.model;
    let mut values = Vec::with_capacity(grid.len());
    let mut ratio: Option<f64> = None;
    let (mut fitted, mut steps) = (0usize, 0usize);
    for y in grid {
        let image = f.eval(&lin.fiber.phi(y)?)?;
        let (back, trace) = lin.fiber.phi_inverse_traced(&image)?;
        steps = steps.max(trace.steps());
        if let Some(r) = trace.cauchy_ratio() {
            fitted += 1;
            ratio = Some(ratio.map_or(r, |q: f64| q.max(r)));
        }
        let y_cs = y.rows(cs.start, cs.len()).into_owned();
        let mut expect = model.eval(&s.embed(&y_cs, Projection::CS)?)?;
        let xc = s.split(y, Projection::C)?;
        expect
            .rows_mut(u.start, u.len())
            .copy_from(&(nf.a_u(&xc)? * y.rows(u.start, u.len())));
        values.push((back - expect).norm());
    }
    Ok(FiberConjugacy {
        residuals: ResidualStats::from_values(values),
        max_cauchy_ratio: ratio,
        fitted_limits: fitted,
        max_steps: steps,
        predicted_ratio: lin.fiber.predicted_ratio(),
    })
}

/// One evaluation of the Hölder-exponent calculator.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HolderCase {
    pub tau1: f64,
    pub tau2: f64,
    pub rho: f64,
    pub alpha: f64,
    pub eps: f64,
    pub computed: f64,
    /// The case formula written out directly.
    pub direct: f64,
}

/// Runs the calculator on cases covering `ρτ_2 < 1`, `= 1` and `> 1`
/// (with `ρ = 1` and `ρ ≠ 1`).
pub fn holder_calculator_check() -> Result<Vec<HolderCase>> {
    let cases = [
        (0.5, 0.8, 1.0, 1.0, 0.01),
        (0.4, 1.5, 0.5, 0.8, 0.01),
        (0.5, 1.0, 1.0, 1.0, 0.01),
        (0.2, 2.5, 0.4, 0.6, 0.05),
        (0.25, 2.0, 1.0, 1.0, 0.01),
        (0.5, 2.0, 1.0, 1.0, 0.01),
        (0.3, 3.0, 0.9, 0.7, 0.01),
    ];
    cases
        .iter()
        .map(|&(tau1, tau2, rho, alpha, eps): &(f64, f64, f64, f64, f64)| {
            let direct = if rho * tau2 < 1.0 {
                alpha
            } else if rho * tau2 == 1.0 {
                alpha - eps
            } else {
                (tau1.ln() + rho.ln()) / (tau1.ln() - tau2.ln()) * alpha
            };
            Ok(HolderCase {
                tau1,
                tau2,
                rho,
                alpha,
                eps,
                computed: holder_exponent_bound(tau1, tau2, rho, alpha, eps)?,
                direct,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::pipeline::IdentityTransform;

    #[test]
    fn stats_of_a_small_sample() {
        let s = ResidualStats::from_values(vec![3.0, 1.0, 2.0, 4.0]);
        assert_eq!((s.max, s.mean, s.median, s.p95), (4.0, 2.5, 2.0, 4.0));
    }

    #[test]
    fn identity_conjugacy_with_the_map_itself_has_zero_residual() {
        let m = catalog::poly3();
        let id = IdentityTransform { dim: 3 };
        let grid = crate::pipeline::lattice(3, 3, 0.2);
        let r = conjugacy_residual_grid(&m, &id, &m, &grid).unwrap();
        assert_eq!(r.max, 0.0);
    }

    #[test]
    fn zero_sequence_is_consistent() {
        let m = catalog::poly3();
        let cfg = LPConfig::unstable_default(&m.structure().envelopes).with_truncation(10);
        let x = DVector::from_vec(vec![0.1, 0.2, 0.1]);
        let q = solve_unstable_lp(&m, &x, &DVector::from_vec(vec![0.1]), &cfg).unwrap();
        assert!(q.entries.iter().all(|e| e.norm() == 0.0));
        assert_eq!(lp_orbit_consistency_check(&m, &q, &x, -10..=0).unwrap(), 0.0);
        assert!(lp_orbit_consistency_check(&m, &q, &x, -11..=0).is_err());
    }

    #[test]
    fn leaf_through_its_own_point_is_invariant() {
        let m: MapRef = Arc::new(catalog::lin3());
        let chart = UnstableFoliation::new(m.clone(), LPConfig::unstable_default(&m.structure().envelopes)).unwrap();
        let x = DVector::from_vec(vec![0.1, 0.2, 0.1]);
        let r = foliation_invariance_check(&chart, &[(x.clone(), DVector::from_vec(vec![0.1]))], 20).unwrap();
        assert_eq!(r.invariance_max, 0.0);
        assert_eq!(r.agreement(), [1, 1]);
    }
}
