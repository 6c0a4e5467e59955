//! Normalization pipeline: center manifold → tangent-frame extension `Υ` →
//! invariant-manifold straightening `𝒢` → stable-foliation straightening
//! `φ`, composed into `𝒯` with normalized model `𝒯^{-1} ∘ F ∘ 𝒯`.
//!
//! A stage is skipped when the model's flags declare the corresponding
//! normalization and a residual check on a grid confirms it.

mod chebyshev;
mod graph;
mod stages;
mod transform;

pub use chebyshev::Chebyshev;
pub use graph::{shoot_manifold_point, shoot_manifold_point_from, GraphOptions, InvariantGraph, ManifoldKind, DEFAULT_SHOOTING_STEPS};
pub use stages::{
    tangent_frames_on_center, CenterStraightening, FrameField, ManifoldStraightening,
    StableStraightening, TangentFrames, Upsilon,
};
pub use transform::{ConjugatedMap, IdentityTransform, Transform, TransformChain, TransformRef};

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::blocks::{Projection, SpectralStructure};
use crate::error::Result;
use crate::lp::{LPConfig, StableFoliation};
use crate::map::{MapRef, NormalizationFlags};

/// A flag is confirmed when its residual is at most this.
pub const FLAG_TOL: f64 = 1e-12;

/// Pipeline settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipelineConfig {
    /// Half-width of the graph interpolation cubes.
    pub graph_half_width: f64,
    pub shooting_steps: usize,
    /// Chebyshev degree override (per axis).
    pub graph_degree: Option<usize>,
    /// Half-width of the coarse center-manifold table, which covers the
    /// center coordinates visited by the orbits of later stages.
    pub center_half_width: f64,
    /// Half-width of the residual-check grids.
    pub check_half_width: f64,
    /// Points per axis of the residual-check grids.
    pub check_points: usize,
    /// Backward orbit length for unstable tangent frames.
    pub frame_horizon: usize,
    /// Outer cutoff radius of `Υ`; `P(x_c)` is tabulated on the center cube
    /// of this half-width.
    pub cutoff_radius: f64,
    /// Skip stages whose flags are confirmed.
    pub trust_flags: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            graph_half_width: 0.45,
            shooting_steps: DEFAULT_SHOOTING_STEPS,
            graph_degree: None,
            center_half_width: 1.0,
            check_half_width: 0.2,
            check_points: 5,
            frame_horizon: 40,
            cutoff_radius: 0.6,
            trust_flags: true,
        }
    }
}

impl PipelineConfig {
    fn graph_options(&self, m: usize) -> GraphOptions {
        let mut o = GraphOptions::for_dimension(m, self.graph_half_width);
        o.steps = self.shooting_steps;
        if let Some(d) = self.graph_degree {
            o.degree = d;
        }
        o
    }
}

/// What happened to one stage.
#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub name: String,
    /// `ran`, `skipped` or `identity`.
    pub status: String,
    pub detail: String,
    /// Residual of the stage's defining property on its check grid.
    pub residual: Option<f64>,
    pub runtime_s: f64,
}

/// Reproducibility record of a pipeline run.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineManifest {
    pub config: PipelineConfig,
    pub flags: NormalizationFlags,
    pub stages: Vec<StageRecord>,
}

/// Uniform lattice with `k` points per axis on `[-w, w]^m`.
pub fn lattice(m: usize, k: usize, w: f64) -> Vec<DVector<f64>> {
    let total = k.pow(m as u32);
    let coord = |i: usize| if k == 1 { 0.0 } else { -w + 2.0 * w * i as f64 / (k - 1) as f64 };
    (0..total)
        .map(|lin| {
            let mut rem = lin;
            let mut v = DVector::zeros(m);
            for a in (0..m).rev() {
                v[a] = coord(rem % k);
                rem /= k;
            }
            v
        })
        .collect()
}

fn grid_on(s: &SpectralStructure, which: Projection, cfg: &PipelineConfig) -> Result<Vec<DVector<f64>>> {
    let m = s.indices(which)?.len();
    lattice(m, cfg.check_points, cfg.check_half_width)
        .iter()
        .map(|p| s.embed(p, which))
        .collect()
}

/// `max |π_su F(x_c)|` over the center grid.
pub fn center_invariance_residual(map: &MapRef, cfg: &PipelineConfig) -> Result<f64> {
    let s = map.structure().clone();
    let mut worst: f64 = 0.0;
    for x in grid_on(&s, Projection::C, cfg)? {
        worst = worst.max(s.split(&map.eval(&x)?, Projection::SU)?.amax());
    }
    Ok(worst)
}

/// Largest entry of `DF(x_c)` outside the block-diagonal pattern
/// `s|c|u` over the center grid.
pub fn block_pattern_residual(map: &MapRef, cfg: &PipelineConfig) -> Result<f64> {
    let s = map.structure().clone();
    let class = |i: usize| {
        if s.s_range().contains(&i) {
            0
        } else if s.c_range().contains(&i) {
            1
        } else {
            2
        }
    };
    let mut worst: f64 = 0.0;
    for x in grid_on(&s, Projection::C, cfg)? {
        let j = map.jacobian(&x)?;
        for r in 0..s.dim() {
            for c in 0..s.dim() {
                if class(r) != class(c) {
                    worst = worst.max(j[(r, c)].abs());
                }
            }
        }
    }
    Ok(worst)
}

/// `max |π_u F(x_cs)|` and `max |π_s F(x_cu)|` over the grids.
pub fn manifold_invariance_residuals(map: &MapRef, cfg: &PipelineConfig) -> Result<(f64, f64)> {
    let s = map.structure().clone();
    let mut cs: f64 = 0.0;
    let mut cu: f64 = 0.0;
    if s.dim_u() > 0 {
        for x in grid_on(&s, Projection::CS, cfg)? {
            cs = cs.max(s.split(&map.eval(&x)?, Projection::U)?.amax());
        }
    }
    if s.dim_s() > 0 {
        for x in grid_on(&s, Projection::CU, cfg)? {
            cu = cu.max(s.split(&map.eval(&x)?, Projection::S)?.amax());
        }
    }
    Ok((cs, cu))
}

/// `max |π_c F(x_cs) - π_c F(x_c)|`: zero when the stable leaves inside
/// `X_cs` are the flat sets `{x_c = const}`.
pub fn stable_flatness_residual(map: &MapRef, cfg: &PipelineConfig) -> Result<f64> {
    let s = map.structure().clone();
    let mut worst: f64 = 0.0;
    for x in grid_on(&s, Projection::CS, cfg)? {
        let xc = s.project(&x, Projection::C)?;
        let a = s.split(&map.eval(&x)?, Projection::C)?;
        let b = s.split(&map.eval(&xc)?, Projection::C)?;
        worst = worst.max((a - b).amax());
    }
    Ok(worst)
}

/// Builds `ϖ_c` and the model in straightened coordinates.
pub fn center_manifold(map: &MapRef, cfg: &PipelineConfig) -> Result<(CenterStraightening, MapRef)> {
    let s = map.structure().clone();
    let mut opts = cfg.graph_options(s.dim_c());
    let outer_degree = match s.dim_c() {
        1 => 160,
        2 => 40,
        _ => 0,
    };
    if outer_degree > 0 && cfg.center_half_width > opts.half_width {
        opts.outer = Some((outer_degree, cfg.center_half_width));
    }
    let graph = InvariantGraph::build(map.clone(), ManifoldKind::Center, opts)?;
    let stage = CenterStraightening::new(s, graph);
    let model: MapRef = Arc::new(ConjugatedMap::new(map.clone(), Arc::new(stage.clone())));
    Ok((stage, model))
}

/// Builds `Υ` from the tangent frames of `map` and the transformed model.
pub fn build_upsilon(map: &MapRef, cfg: &PipelineConfig) -> Result<(Arc<Upsilon>, MapRef)> {
    let s = map.structure().clone();
    let lp = LPConfig::stable_default(&s.envelopes);
    let opts = cfg.graph_options(s.dim_c());
    let frames = FrameField::new(map.clone(), lp, cfg.frame_horizon, opts.degree, cfg.cutoff_radius)?;
    let stage = Arc::new(Upsilon::new(s, frames, cfg.cutoff_radius));
    let model: MapRef = Arc::new(ConjugatedMap::new(map.clone(), stage.clone()));
    Ok((stage, model))
}

/// Builds `𝒢` from the requested graphs and the transformed model. With
/// `plateau = Some(r)` the interpolation cubes are shrunk into the ball of
/// radius `r` on which the model is smooth at the scale of the cube.
pub fn straighten_invariant_manifolds(
    map: &MapRef,
    cs: bool,
    cu: bool,
    plateau: Option<f64>,
    cfg: &PipelineConfig,
) -> Result<(ManifoldStraightening, MapRef)> {
    let s = map.structure().clone();
    let build = |kind: ManifoldKind| -> Result<InvariantGraph> {
        let m = s.indices(kind.domain())?.len();
        let mut opts = cfg.graph_options(m);
        if let Some(r) = plateau {
            opts.half_width = opts.half_width.min(r / (m as f64).sqrt());
        }
        InvariantGraph::build(map.clone(), kind, opts)
    };
    let cs_graph = if cs && s.dim_u() > 0 { Some(build(ManifoldKind::CenterStable)?) } else { None };
    let cu_graph = if cu && s.dim_s() > 0 { Some(build(ManifoldKind::CenterUnstable)?) } else { None };
    let stage = ManifoldStraightening::new(s, cs_graph, cu_graph);
    let model: MapRef = Arc::new(ConjugatedMap::new(map.clone(), Arc::new(stage.clone())));
    Ok((stage, model))
}

/// Builds `φ` from the stable foliation of `map` on `X_cs`; `plateau` as
/// in [`straighten_invariant_manifolds`].
pub fn straighten_stable_foliation(
    map: &MapRef,
    plateau: Option<f64>,
    cfg: &PipelineConfig,
) -> Result<(StableStraightening, MapRef)> {
    let s = map.structure();
    let m = s.dim_s() + s.dim_c();
    let mut opts = cfg.graph_options(m);
    if let Some(r) = plateau {
        opts.half_width = opts.half_width.min(r / (m as f64).sqrt());
    }
    let lp = LPConfig::stable_default(&s.envelopes);
    let stage = StableStraightening::new(StableFoliation::new(map.clone(), lp)?, opts.degree, opts.half_width)?;
    let model: MapRef = Arc::new(ConjugatedMap::new(map.clone(), Arc::new(stage.clone())));
    Ok((stage, model))
}

/// `max |h_s(x_cs, z_s) - x_c|` over a grid of base points and offsets:
/// zero when the stable foliation on `X_cs` is flat.
pub fn stable_leaf_residual(map: &MapRef, cfg: &PipelineConfig) -> Result<f64> {
    let s = map.structure().clone();
    if s.dim_s() == 0 {
        return Ok(0.0);
    }
    let fol = StableFoliation::new(map.clone(), LPConfig::stable_default(&s.envelopes))?;
    let ds = s.dim_s();
    let mut worst: f64 = 0.0;
    for x in grid_on(&s, Projection::CS, cfg)? {
        let x_cs = s.split(&x, Projection::CS)?;
        let z = DVector::from_element(ds, -0.5 * cfg.check_half_width);
        let h = fol.h_s(&x_cs, &z)?;
        worst = worst.max((h - x_cs.rows(ds, s.dim_c())).amax());
    }
    Ok(worst)
}

/// `𝒯` as a chain applied in the order `φ`, `𝒢^{-1}`, `Υ^{-1}`, `C^{-1}`.
pub fn compose_t(dim: usize, stages_in_pipeline_order: Vec<TransformRef>) -> TransformChain {
    let mut order = stages_in_pipeline_order;
    order.reverse();
    TransformChain::new("T", dim, order)
}

/// Result of the pipeline.
#[derive(Clone)]
pub struct Normalization {
    pub original: MapRef,
    /// `𝒯`: normalized coordinates → original coordinates.
    pub transform: Arc<TransformChain>,
    /// `𝒯^{-1} ∘ F ∘ 𝒯`.
    pub model: MapRef,
    pub manifest: PipelineManifest,
}

impl Normalization {
    /// `Δ(x_c) = D𝒯(x_c)` at a center point.
    pub fn center_jet(&self, x_c: &DVector<f64>) -> Result<DMatrix<f64>> {
        let s = self.original.structure();
        self.transform.jacobian(&s.embed(x_c, Projection::C)?)
    }
}

fn record(name: &str, status: &str, detail: String, residual: Option<f64>, t0: Instant) -> StageRecord {
    StageRecord {
        name: name.into(),
        status: status.into(),
        detail,
        residual,
        runtime_s: t0.elapsed().as_secs_f64(),
    }
}

/// Runs the pipeline on `map` with declared `flags`.
pub fn normalize(map: MapRef, flags: NormalizationFlags, cfg: &PipelineConfig) -> Result<Normalization> {
    let s = map.structure().clone();
    let mut records = Vec::new();
    let mut stages: Vec<TransformRef> = Vec::new();
    let mut current = map.clone();
    let mut plateau = None;
    let confirmed = |declared: bool, residual: f64| cfg.trust_flags && declared && residual <= FLAG_TOL;

    // Center manifold.
    let t0 = Instant::now();
    let r = center_invariance_residual(&current, cfg)?;
    if confirmed(flags.center_is_xc, r) {
        records.push(record("center_manifold", "skipped", "flag center_is_xc confirmed".into(), Some(r), t0));
    } else {
        let (stage, model) = center_manifold(&current, cfg)?;
        let after = center_invariance_residual(&model, cfg)?;
        records.push(record(
            "center_manifold",
            "ran",
            format!("residual before {r:.3e}"),
            Some(after),
            t0,
        ));
        stages.push(Arc::new(stage));
        current = model;
    }

    // Tangent-frame extension.
    let t0 = Instant::now();
    let r = block_pattern_residual(&current, cfg)?;
    if confirmed(flags.block_diagonal_on_xc, r) {
        records.push(record("upsilon", "skipped", "flag block_diagonal_on_xc confirmed".into(), Some(r), t0));
    } else {
        let (stage, model) = build_upsilon(&current, cfg)?;
        plateau = Some(0.5 * cfg.cutoff_radius);
        let after = block_pattern_residual(&model, cfg)?;
        records.push(record("upsilon", "ran", format!("pattern residual before {r:.3e}"), Some(after), t0));
        stages.push(stage);
        current = model;
    }

    // Invariant manifolds.
    let t0 = Instant::now();
    let (rcs, rcu) = manifold_invariance_residuals(&current, cfg)?;
    let need_cs = !confirmed(flags.cs_invariant, rcs) && s.dim_u() > 0 && rcs > 0.0;
    let need_cu = !confirmed(flags.cu_invariant, rcu) && s.dim_s() > 0 && rcu > 0.0;
    if !need_cs && !need_cu {
        records.push(record(
            "invariant_manifolds",
            "skipped",
            "both center-stable and center-unstable subspaces invariant".into(),
            Some(rcs.max(rcu)),
            t0,
        ));
    } else {
        let (stage, model) = straighten_invariant_manifolds(&current, need_cs, need_cu, plateau, cfg)?;
        let (acs, acu) = manifold_invariance_residuals(&model, cfg)?;
        records.push(record(
            "invariant_manifolds",
            "ran",
            format!(
                "graphs: cs {need_cs}, cu {need_cu}; residuals before cs {rcs:.3e} cu {rcu:.3e}, after cs {acs:.3e} cu {acu:.3e}"
            ),
            Some(acs.max(acu)),
            t0,
        ));
        stages.push(Arc::new(stage));
        current = model;
    }

    // Stable foliation on X_cs.
    let t0 = Instant::now();
    let r = stable_flatness_residual(&current, cfg)?;
    if confirmed(flags.stable_foliation_flat, r) || s.dim_s() == 0 {
        records.push(record(
            "stable_foliation",
            "skipped",
            "flag stable_foliation_flat confirmed".into(),
            Some(r),
            t0,
        ));
    } else {
        let (stage, model) = straighten_stable_foliation(&current, plateau, cfg)?;
        let after = stable_leaf_residual(&model, cfg)?;
        records.push(record("stable_foliation", "ran", format!("flatness before {r:.3e}"), Some(after), t0));
        stages.push(Arc::new(stage));
    }

    let transform = Arc::new(compose_t(s.dim(), stages));
    let model: MapRef = if transform.is_identity() {
        map.clone()
    } else {
        Arc::new(ConjugatedMap::new(map.clone(), transform.clone()))
    };
    Ok(Normalization {
        original: map,
        transform,
        model,
        manifest: PipelineManifest {
            config: *cfg,
            flags,
            stages: records,
        },
    })
}
