//! Fiber linearization `Φ` and the weak-unstable flatness check.
//!
//! Both limits run in the coordinates of the normalized model `F4` and use
//! the unstable cocycle `𝒜_u` along base orbits; the reduction `Θ` enters
//! only through `P_u` at the base point, because
//! `𝒜_red(n; b) P_u(b) = P_u(g^n b) 𝒜_u(n; b)`.
//!
//! * `Φ^{-1}(x)_u = P_u(x_cs) lim 𝒜_u(n, 0; b_n) π_u F4^{-n}(w)` with
//!   `w = H(Θ^{-1} x)` and `b_n = g^{-n}(x_cs)`.
//! * `Φ(y)_u = P_u(y_cs) lim π_u F4^n(p_n)`, where `p_n` is the first-order
//!   lift `(b_n + T_n v_n, v_n)` of `v_n = 𝒜_u(n, 0; b_n)^{-1} P_u(y_cs)^{-1} y_u`
//!   to the unstable leaf through `b_n = g^{-n}(y_cs)`, and `T_n` is the
//!   unstable bundle over `b_n` written as a graph over `X_u`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{max_until_nonzero, run_limit, CocycleReduction, LimitTrace, LinearizeConfig, SemiDecoupling};
use crate::blocks::{sub_matrix, SpectralStructure};
use crate::cocycle::CenterCocycle;
use crate::error::{Error, Result};
use crate::lp::BOUND_FACTOR;
use crate::map::MapRef;
use crate::pipeline::{Transform, FLAG_TOL};

/// Base orbit segments are extended in chunks of this many steps.
const ORBIT_CHUNK: usize = 20;

/// Per-fiber conjugacy `Φ(x) = (x_cs, φ^{-1}_{x_cs}(x_u))` of `F̃` to
/// `(g(x_cs), A_u(x_c) x_u)`.
pub struct FiberLinearization {
    model: MapRef,
    structure: SpectralStructure,
    semi: Arc<SemiDecoupling>,
    reduction: Arc<CocycleReduction>,
    cocycle: CenterCocycle,
    cfg: LinearizeConfig,
    nonlinearity: f64,
    identity: bool,
}

/// Base orbit `b_k = g^{-k}(b_0)` with the unstable bundle graphs `T_k`.
struct BundleOrbit {
    points: Vec<DVector<f64>>,
    graphs: Vec<DMatrix<f64>>,
}

impl FiberLinearization {
    /// Records `max |π_u F̂(x) - A_u(x_cs) x_u|` on the check lattice; the
    /// stage is the identity when it vanishes and `H`, `Θ` are identities.
    pub fn new(
        model: MapRef,
        semi: Arc<SemiDecoupling>,
        reduction: Arc<CocycleReduction>,
        cfg: &LinearizeConfig,
    ) -> Result<Self> {
        let structure = model.structure().clone();
        let cocycle = CenterCocycle::unstable(model.clone());
        let mut f = Self {
            model,
            structure,
            semi,
            reduction,
            cocycle,
            cfg: *cfg,
            nonlinearity: 0.0,
            identity: true,
        };
        if f.structure.dim_u() == 0 {
            return Ok(f);
        }
        let grid = cfg.check_grid(f.structure.dim());
        let (cs, u) = (f.structure.cs_range(), f.structure.u_range());
        f.nonlinearity = max_until_nonzero(&grid, |x| {
            let b = x.rows(cs.start, cs.len()).into_owned();
            let xu = x.rows(u.start, u.len()).into_owned();
            let y = f.model.eval(&f.semi.lift(&b, &xu)?)?;
            let lin = f.cocycle.generator(&b)? * &xu;
            Ok((y.rows(u.start, u.len()) - lin).norm())
        })?;
        f.identity = f.nonlinearity <= FLAG_TOL && f.semi.is_identity() && f.reduction.is_identity();
        Ok(f)
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// `max |π_u F̂(x) - A_u(x_cs) x_u|` on the check lattice (early exit).
    pub fn nonlinearity(&self) -> f64 {
        self.nonlinearity
    }

    /// Predicted bound on the Cauchy ratio of the limits:
    /// `max_ℓ (λ_ℓ + ς)/(λ_ℓ - ς)` times the fiber-inverse contraction
    /// `1/(λ_min - ς)`.
    pub fn predicted_ratio(&self) -> f64 {
        let env = self.structure.envelopes;
        let blocks = self.structure.unstable_blocks();
        let slowest = blocks.iter().map(|b| b.modulus).fold(f64::INFINITY, f64::min);
        let spread = blocks
            .iter()
            .map(|b| (b.modulus + env.margin) / (b.modulus - env.margin))
            .fold(0.0, f64::max);
        spread / (slowest - env.margin)
    }

    fn not_cauchy(&self, what: &str, trace: &LimitTrace) -> Error {
        Error::NoConvergence {
            what: format!("{what} (fiber expansivity margin too small?)"),
            iterations: trace.steps(),
            residual: trace.differences.last().cloned().unwrap_or(f64::NAN),
        }
    }

    /// `φ̂(w) = lim 𝒜_u(n, 0; b_n) π_u F4^{-n}(w)` for a model point `w`
    /// whose leaf meets `X_cs` at `foot`.
    pub fn backward_limit(&self, w: &DVector<f64>, foot: &DVector<f64>) -> Result<(DVector<f64>, LimitTrace)> {
        let u = self.structure.u_range();
        let du = u.len();
        let mut z = w.clone();
        let mut b = foot.clone();
        let mut m = DMatrix::<f64>::identity(du, du);
        let (v, trace) = run_limit(w.rows(u.start, u.len()).into_owned(), self.cfg.horizon, self.cfg.tol, |_| {
            z = self.model.inverse(&z)?;
            b = self.cocycle.step(&b, false)?;
            m = &m * self.cocycle.generator(&b)?;
            Ok(&m * z.rows(u.start, u.len()))
        })?;
        if !trace.converged {
            return Err(self.not_cauchy("fiber backward limit", &trace));
        }
        Ok((v, trace))
    }

    /// Extends the base orbit to `len + bundle_lead` points and recomputes
    /// the bundle graphs `T_k` for `k < len` from `T = 0` at the far end.
    fn extend(&self, orbit: &mut BundleOrbit, len: usize) -> Result<()> {
        let far = len + self.cfg.bundle_lead;
        while orbit.points.len() <= far {
            let next = self.cocycle.step(orbit.points.last().expect("nonempty orbit"), false)?;
            orbit.points.push(next);
        }
        let (cs, u) = (self.structure.cs_range(), self.structure.u_range());
        let mut t = DMatrix::zeros(cs.len(), u.len());
        let mut graphs = vec![DMatrix::zeros(0, 0); len];
        for k in (1..=far).rev() {
            let j = self.model.jacobian(&self.cocycle.embed(&orbit.points[k])?)?;
            let top = sub_matrix(&j, cs.clone(), cs.clone()) * &t + sub_matrix(&j, cs.clone(), u.clone());
            let bottom = sub_matrix(&j, u.clone(), cs.clone()) * &t + sub_matrix(&j, u.clone(), u.clone());
            let inv = bottom
                .try_inverse()
                .ok_or_else(|| Error::numeric("unstable bundle recursion: singular fiber block"))?;
            t = top * inv;
            if k - 1 < len {
                graphs[k - 1] = t.clone();
            }
        }
        orbit.graphs = graphs;
        Ok(())
    }

    /// `φ̂^{-1}_{x_cs}(v)` together with the model point it represents on the
    /// unstable leaf through `x_cs`, i.e. `H(x_cs, φ̂^{-1}_{x_cs}(v))`.
    pub fn forward_limit(&self, x_cs: &DVector<f64>, v: &DVector<f64>) -> Result<(DVector<f64>, LimitTrace)> {
        let (cs, u) = (self.structure.cs_range(), self.structure.u_range());
        let mut orbit = BundleOrbit {
            points: vec![x_cs.clone()],
            graphs: Vec::new(),
        };
        self.extend(&mut orbit, ORBIT_CHUNK.min(self.cfg.horizon) + 1)?;
        let lift = |b: &DVector<f64>, t: &DMatrix<f64>, vn: &DVector<f64>| {
            let mut p = DVector::zeros(self.structure.dim());
            p.rows_mut(cs.start, cs.len()).copy_from(&(b + t * vn));
            p.rows_mut(u.start, u.len()).copy_from(vn);
            p
        };
        let first = lift(x_cs, &orbit.graphs[0], v);
        let mut vn = v.clone();
        let (point, trace) = run_limit(first, self.cfg.horizon, self.cfg.tol, |n| {
            if n >= orbit.graphs.len() {
                self.extend(&mut orbit, (n + ORBIT_CHUNK).min(self.cfg.horizon) + 1)?;
            }
            vn = self.cocycle.generator_inverse(&orbit.points[n])? * &vn;
            let mut p = lift(&orbit.points[n], &orbit.graphs[n], &vn);
            for _ in 0..n {
                p = self.model.eval(&p)?;
            }
            Ok(p)
        })?;
        if !trace.converged {
            return Err(self.not_cauchy("fiber forward limit", &trace));
        }
        Ok((point, trace))
    }

    /// `Φ(y) = (y_cs, P_u(y_cs) φ̂^{-1}(P_u(y_cs)^{-1} y_u))` in reduced
    /// coordinates.
    pub fn phi(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        if self.identity {
            return Ok(y.clone());
        }
        let (cs, u) = (self.structure.cs_range(), self.structure.u_range());
        let b = y.rows(cs.start, cs.len()).into_owned();
        let v = self.reduction.pu_inverse(&b)? * y.rows(u.start, u.len());
        let (p, _) = self.forward_limit(&b, &v)?;
        let mut out = y.clone();
        out.rows_mut(u.start, u.len())
            .copy_from(&(self.reduction.pu(&b)? * p.rows(u.start, u.len())));
        Ok(out)
    }

    /// `Φ^{-1}(x) = (x_cs, P_u(x_cs) φ̂(H(Θ^{-1} x)))` with its trace.
    pub fn phi_inverse_traced(&self, x: &DVector<f64>) -> Result<(DVector<f64>, LimitTrace)> {
        if self.identity {
            return Ok((x.clone(), LimitTrace::default()));
        }
        let (cs, u) = (self.structure.cs_range(), self.structure.u_range());
        let b = x.rows(cs.start, cs.len()).into_owned();
        let xu = self.reduction.pu_inverse(&b)? * x.rows(u.start, u.len());
        let w = self.semi.lift(&b, &xu)?;
        let (v, trace) = self.backward_limit(&w, &b)?;
        let mut out = x.clone();
        out.rows_mut(u.start, u.len()).copy_from(&(self.reduction.pu(&b)? * v));
        Ok((out, trace))
    }

    pub fn phi_inverse(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.phi_inverse_traced(x)?.0)
    }
}

impl Transform for FiberLinearization {
    fn name(&self) -> &str {
        "fiber_linearization"
    }

    fn forward(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.phi(x)
    }

    fn inverse(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.phi_inverse(y)
    }

    fn is_identity(&self) -> bool {
        self.identity
    }
}

/// Outcome of the weak-unstable check at one block boundary.
#[derive(Debug, Clone, Serialize)]
pub struct WeakUnstableStraightening {
    /// Unstable blocks `0..=boundary` are slow, the rest fast.
    pub boundary: usize,
    /// Admissible growth window `(λ_ℓ + ς, λ_{ℓ+1} - ς)`.
    pub window: (f64, f64),
    pub rho: f64,
    /// `max |π_fast F̂(x_cs, u_slow, 0)| / |u_slow|` over the samples.
    pub residual: f64,
    /// The slow manifold is `{u_fast = 0}` in every sampled fiber, so the
    /// straightening is the identity.
    pub flat: bool,
    pub samples: usize,
    /// Samples on `{u_fast = 0}` passing the `ρ`-growth oracle.
    pub members: usize,
    /// Control samples off `{u_fast = 0}` rejected by the oracle.
    pub control_rejections: usize,
    /// Relative gap between the two blocks below 10%.
    pub close_blocks: bool,
}

/// Horizon of the forward growth oracle.
pub const GROWTH_HORIZON: usize = 15;

/// `max_{0 <= n <= horizon} ρ^{-n} |π_u F4^n(w)|`.
fn forward_growth(model: &MapRef, w: &DVector<f64>, rho: f64, u: std::ops::Range<usize>) -> Result<f64> {
    let mut z = w.clone();
    let mut dev = z.rows(u.start, u.len()).norm();
    for n in 1..=GROWTH_HORIZON {
        z = model.eval(&z)?;
        dev = dev.max(rho.powi(-(n as i32)) * z.rows(u.start, u.len()).norm());
    }
    Ok(dev)
}

/// Checks whether the weak-unstable manifold tangent to the unstable blocks
/// `0..=boundary` is `{u_fast = 0}` in every fiber of `F̂`, and runs the
/// forward growth oracle with weight `ρ` in the window on its points.
///
/// Membership is tested on the model orbit of `H(x_cs, u)`: its unstable
/// part differs from the orbit of `F̃` only by the bounded factor `P_u`.
pub fn weak_unstable_straighten(
    model: &MapRef,
    semi: &SemiDecoupling,
    boundary: usize,
    cfg: &LinearizeConfig,
) -> Result<WeakUnstableStraightening> {
    let s = model.structure();
    let blocks = s.unstable_blocks();
    if blocks.len() < 2 {
        return Err(Error::input(
            "weak-unstable straightening not applicable: a single unstable block leaves the rate window empty",
        ));
    }
    if boundary + 1 >= blocks.len() {
        return Err(Error::input(format!(
            "block boundary {boundary} out of range for {} unstable blocks",
            blocks.len()
        )));
    }
    let margin = s.envelopes.margin;
    let (slow, fast) = (blocks[boundary].modulus, blocks[boundary + 1].modulus);
    let window = (slow + margin, fast - margin);
    if !(window.0 < window.1) {
        return Err(Error::Inadmissible {
            name: "weak-unstable window".into(),
            value: window.1 - window.0,
            reason: format!("window ({:.4}, {:.4}) is empty; blocks too close", window.0, window.1),
        });
    }
    let rho = (window.0 * window.1).sqrt();
    let ranges = s.unstable_local_ranges();
    let n_slow = ranges[boundary].end;
    let du = s.dim_u();
    let u = s.u_range();
    let base_grid = cfg.check_grid(s.cs_range().len());
    let mut out = WeakUnstableStraightening {
        boundary,
        window,
        rho,
        residual: 0.0,
        flat: true,
        samples: 0,
        members: 0,
        control_rejections: 0,
        close_blocks: (fast - slow) / fast < 0.1,
    };
    for b in &base_grid {
        for amp in [0.1, -0.07] {
            let mut xu = DVector::zeros(du);
            xu.rows_mut(0, n_slow).fill(amp);
            let w = semi.lift(b, &xu)?;
            let y = model.eval(&w)?;
            let r = y.rows(u.start + n_slow, du - n_slow).norm() / xu.norm();
            out.residual = out.residual.max(r);
            let bound = BOUND_FACTOR * xu.norm();
            if forward_growth(model, &w, rho, u.clone())? <= bound {
                out.members += 1;
            }
            let mut off = xu.clone();
            off.rows_mut(n_slow, du - n_slow).fill(amp);
            let w_off = semi.lift(b, &off)?;
            if forward_growth(model, &w_off, rho, u.clone())? > BOUND_FACTOR * off.norm() {
                out.control_rejections += 1;
            }
            out.samples += 1;
        }
    }
    out.flat = out.residual <= FLAG_TOL;
    Ok(out)
}
