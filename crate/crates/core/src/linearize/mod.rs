//! The conjugacy from the normalized model to its Takens normal form.
//!
//! Starting from the normalized model `F4 = 𝒯^{-1} ∘ F ∘ 𝒯`, the chain is
//!
//! * `H`: semi-decoupling by the unstable foliation, `F̂ = H^{-1} ∘ F4 ∘ H`
//!   preserves the fibers `{x_cs} × X_u`;
//! * `Θ(x) = (x_cs, P_u(x_cs) x_u)`: cocycle reduction, `F̃ = Θ ∘ F̂ ∘ Θ^{-1}`
//!   has fiber derivative `A_u(x_c)` at `x_u = 0`;
//! * `Φ`: fiber linearization, `Φ^{-1} ∘ F̃ ∘ Φ = (g(x_cs), A_u(x_c) x_u)`;
//! * `ψ`: stable-side conjugacy on `X_cs`,
//!   `ψ^{-1} ∘ g ∘ ψ = (A_s(x_c) x_s, g_c(x_c))`.
//!
//! The full conjugacy is `𝓗 = 𝒯 ∘ H ∘ Θ^{-1} ∘ Φ ∘ (ψ, id_u)`, mapping
//! normal-form coordinates to original coordinates.

mod fiber;
mod normal_form;
mod reduce;
mod semi;
mod stable_side;

pub use fiber::{weak_unstable_straighten, FiberLinearization, WeakUnstableStraightening};
pub use normal_form::NormalForm;
pub use reduce::CocycleReduction;
pub use semi::SemiDecoupling;
pub use stable_side::StableSideConjugacy;

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cocycle::TransferOptions;
use crate::error::Result;
use crate::lp::{LPConfig, DEFAULT_TRUNCATION};
use crate::map::DiscreteMap;
use crate::numeric::linear_fit;
use crate::pipeline::{lattice, Normalization, StageRecord, Transform, FLAG_TOL};

/// Settings shared by every linearization stage.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LinearizeConfig {
    /// A limit stops once successive iterates differ by at most `tol`
    /// relative to the iterate.
    pub tol: f64,
    /// Largest number of steps in a limit.
    pub horizon: usize,
    /// Steps behind the base point at which the unstable-bundle recursion
    /// of the forward fiber limit starts.
    pub bundle_lead: usize,
    /// Weight of the unstable foliation solver; midpoint of the admissible
    /// interval when `None`.
    pub rho: Option<f64>,
    pub lp_truncation: usize,
    pub transfer: TransferOptions,
    /// Chebyshev degree of an optional `P_u` table; `0` (the default)
    /// evaluates pointwise. `P_u` is only Hölder along the stable
    /// directions, so a table is accurate only for maps where it is smooth.
    pub transfer_degree: usize,
    pub transfer_half_width: f64,
    /// Lattice used to detect identity stages.
    pub check_half_width: f64,
    pub check_points: usize,
}

impl Default for LinearizeConfig {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            horizon: 80,
            bundle_lead: 20,
            rho: None,
            lp_truncation: DEFAULT_TRUNCATION,
            transfer: TransferOptions::default(),
            transfer_degree: 0,
            transfer_half_width: 0.3,
            check_half_width: 0.2,
            check_points: 3,
        }
    }
}

impl LinearizeConfig {
    /// Unstable foliation solver settings for `map`.
    pub fn unstable_lp(&self, map: &dyn DiscreteMap) -> LPConfig {
        let mut cfg = LPConfig::unstable_default(&map.structure().envelopes).with_truncation(self.lp_truncation);
        if let Some(r) = self.rho {
            cfg = cfg.with_rho(r);
        }
        cfg
    }

    fn check_grid(&self, m: usize) -> Vec<DVector<f64>> {
        lattice(m, self.check_points, self.check_half_width)
    }
}

/// Successive-iterate differences of one limit evaluation.
#[derive(Debug, Clone, Default, Serialize)]
pub struct LimitTrace {
    /// `|X_n - X_{n-1}|` for `n = 1, 2, ...`.
    pub differences: Vec<f64>,
    pub converged: bool,
}

impl LimitTrace {
    pub fn steps(&self) -> usize {
        self.differences.len()
    }

    /// `exp` of the least-squares slope of `log |X_n - X_{n-1}|` against `n`,
    /// skipping the first difference and exact zeros; `None` with fewer
    /// than three usable differences.
    pub fn cauchy_ratio(&self) -> Option<f64> {
        let (ns, ls): (Vec<f64>, Vec<f64>) = self
            .differences
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, d)| **d > 0.0)
            .map(|(n, d)| (n as f64, d.ln()))
            .unzip();
        if ns.len() < 3 {
            return None;
        }
        linear_fit(&ns, &ls).map(|(slope, _)| slope.exp())
    }
}

/// Runs `next(n)` for `n = 1..=horizon` until two successive values differ
/// by at most `tol` relative to the newer one (or exactly agree).
pub(crate) fn run_limit<F>(first: DVector<f64>, horizon: usize, tol: f64, mut next: F) -> Result<(DVector<f64>, LimitTrace)>
where
    F: FnMut(usize) -> Result<DVector<f64>>,
{
    let mut trace = LimitTrace::default();
    let mut prev = first;
    for n in 1..=horizon {
        let x = next(n)?;
        let d = (&x - &prev).norm();
        trace.differences.push(d);
        prev = x;
        if d == 0.0 || d <= tol * prev.norm() {
            trace.converged = true;
            break;
        }
    }
    Ok((prev, trace))
}

/// Settings, stage records and weak-unstable diagnostics of a run.
#[derive(Debug, Clone, Serialize)]
pub struct LinearizationManifest {
    pub config: LinearizeConfig,
    pub stages: Vec<StageRecord>,
    pub weak_unstable: Vec<WeakUnstableStraightening>,
}

/// The full conjugacy `𝓗` and its constituents.
#[derive(Clone)]
pub struct Linearization {
    pub normalization: Normalization,
    pub semi: Arc<SemiDecoupling>,
    pub reduction: Arc<CocycleReduction>,
    pub fiber: Arc<FiberLinearization>,
    pub stable_side: Arc<StableSideConjugacy>,
    pub normal_form: Arc<NormalForm>,
    pub manifest: LinearizationManifest,
}

fn record(name: &str, identity: bool, detail: String, residual: Option<f64>, t0: Instant) -> StageRecord {
    StageRecord {
        name: name.into(),
        status: if identity { "identity" } else { "ran" }.into(),
        detail,
        residual,
        runtime_s: t0.elapsed().as_secs_f64(),
    }
}

/// Builds every stage on top of a normalization.
pub fn linearize(normalization: Normalization, cfg: &LinearizeConfig) -> Result<Linearization> {
    let model = normalization.model.clone();
    let mut stages = Vec::new();

    let t0 = Instant::now();
    let semi = Arc::new(SemiDecoupling::new(model.clone(), cfg.unstable_lp(model.as_ref()), cfg)?);
    stages.push(record(
        "semi_decoupling",
        semi.is_identity(),
        "unstable foliation chart of the normalized model".into(),
        Some(semi.flatness()),
        t0,
    ));

    let t0 = Instant::now();
    let reduction = Arc::new(CocycleReduction::new(model.clone(), cfg)?);
    stages.push(record(
        "cocycle_reduction",
        reduction.is_identity(),
        format!("max |P_u - I| on the check lattice; table degree {}", reduction.table_degree()),
        Some(reduction.deviation()),
        t0,
    ));

    let t0 = Instant::now();
    let nu = model.structure().unstable_blocks().len();
    let mut weak = Vec::new();
    for boundary in 0..nu.saturating_sub(1) {
        weak.push(weak_unstable_straighten(&model, &semi, boundary, cfg)?);
    }
    if !weak.is_empty() {
        let flat = weak.iter().all(|w| w.flat);
        stages.push(record(
            "weak_unstable",
            flat,
            if flat {
                "weak-unstable manifolds flat in every fiber".into()
            } else {
                "weak-unstable manifold not flat; blocks linearized jointly".into()
            },
            Some(weak.iter().map(|w| w.residual).fold(0.0, f64::max)),
            t0,
        ));
    }

    let t0 = Instant::now();
    let fiber = Arc::new(FiberLinearization::new(model.clone(), semi.clone(), reduction.clone(), cfg)?);
    stages.push(record(
        "fiber_linearization",
        fiber.is_identity(),
        "backward limit for Phi^{-1}, forward limit for Phi".into(),
        Some(fiber.nonlinearity()),
        t0,
    ));

    let t0 = Instant::now();
    let stable_side = Arc::new(StableSideConjugacy::new(model.clone(), cfg)?);
    stages.push(record(
        "stable_side",
        stable_side.is_identity(),
        "forward limit for psi, mirrored limit for psi^{-1}".into(),
        Some(stable_side.nonlinearity()),
        t0,
    ));

    let normal_form = Arc::new(NormalForm::new(model));
    Ok(Linearization {
        normalization,
        semi,
        reduction,
        fiber,
        stable_side,
        normal_form,
        manifest: LinearizationManifest {
            config: *cfg,
            stages,
            weak_unstable: weak,
        },
    })
}

impl Linearization {
    /// Whether every stage, including `𝒯`, is the identity.
    pub fn is_identity(&self) -> bool {
        self.normalization.transform.is_identity()
            && self.semi.is_identity()
            && self.reduction.is_identity()
            && self.fiber.is_identity()
            && self.stable_side.is_identity()
    }

    /// `𝓗(y)`: normal-form coordinates to original coordinates.
    ///
    /// `Θ^{-1} ∘ Φ` reduces to `(x_cs, φ̂^{-1}(P_u(x_cs)^{-1} y_u))` and the
    /// forward fiber limit already lands on the unstable leaf through
    /// `x_cs`, so `H` needs no separate chart solve.
    pub fn conjugacy(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let s = self.normal_form.structure();
        let (cs, u) = (s.cs_range(), s.u_range());
        let x_cs = self.stable_side.psi(&y.rows(cs.start, cs.len()).into_owned())?;
        let v = self.reduction.pu_inverse(&x_cs)? * y.rows(u.start, u.len());
        let x4 = if self.fiber.is_identity() {
            self.semi.lift(&x_cs, &v)?
        } else {
            self.fiber.forward_limit(&x_cs, &v)?.0
        };
        self.normalization.transform.forward(&x4)
    }

    /// `𝓗^{-1}(x)`: original coordinates to normal-form coordinates.
    pub fn conjugacy_inverse(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let s = self.normal_form.structure();
        let (cs, u) = (s.cs_range(), s.u_range());
        let x4 = self.normalization.transform.inverse(x)?;
        let foot = self.semi.foot(&x4)?;
        let fiber_u = if self.fiber.is_identity() {
            x4.rows(u.start, u.len()).into_owned()
        } else {
            self.fiber.backward_limit(&x4, &foot)?.0
        };
        let out_u = self.reduction.pu(&foot)? * fiber_u;
        let out_cs = self.stable_side.psi_inverse(&foot)?;
        let mut out = DVector::zeros(s.dim());
        out.rows_mut(cs.start, cs.len()).copy_from(&out_cs);
        out.rows_mut(u.start, u.len()).copy_from(&out_u);
        Ok(out)
    }

    /// `Δ(x_c) = D𝒯(x_c)`, the derivative of `𝓗` at a center point.
    pub fn center_jet(&self, x_c: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.normalization.center_jet(x_c)
    }
}

impl Transform for Linearization {
    fn name(&self) -> &str {
        "full_conjugacy"
    }

    fn forward(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.conjugacy(x)
    }

    fn inverse(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.conjugacy_inverse(y)
    }

    fn is_identity(&self) -> bool {
        Linearization::is_identity(self)
    }
}

/// Largest value of `f` over `points`, stopping early once it exceeds
/// [`FLAG_TOL`] (the stage is then known to be needed).
pub(crate) fn max_until_nonzero<F>(points: &[DVector<f64>], mut f: F) -> Result<f64>
where
    F: FnMut(&DVector<f64>) -> Result<f64>,
{
    let mut worst = 0.0f64;
    for p in points {
        worst = worst.max(f(p)?);
        if worst > FLAG_TOL {
            break;
        }
    }
    Ok(worst)
}
