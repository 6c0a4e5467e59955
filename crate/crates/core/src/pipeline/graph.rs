//! Invariant manifolds as graphs over coordinate subspaces.
//!
//! A point of the center-unstable manifold is characterized by a backward
//! orbit whose stable component stays small, a point of the center-stable
//! manifold by a forward orbit whose unstable component stays small, and a
//! point of the center manifold by both. The graph value at a base point is
//! found by shooting: the missing coordinates are adjusted by Newton's
//! method until the selected components vanish at the ends of an orbit of
//! length `N`. Graphs are tabulated by Chebyshev interpolation on a cube and
//! evaluated pointwise outside it.

use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::chebyshev::Chebyshev;
use crate::blocks::Projection;
use crate::error::{Error, Result};
use crate::map::{DiscreteMap, MapRef};
use crate::numeric::fd_jacobian;

/// Default orbit length of the shooting problems.
pub const DEFAULT_SHOOTING_STEPS: usize = 30;

/// Which invariant manifold a graph describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    /// `ϖ_c : X_c → X_su`.
    Center,
    /// `ϖ_cs : X_cs → X_u`.
    CenterStable,
    /// `ϖ_cu : X_cu → X_s`.
    CenterUnstable,
}

impl ManifoldKind {
    pub fn domain(self) -> Projection {
        match self {
            ManifoldKind::Center => Projection::C,
            ManifoldKind::CenterStable => Projection::CS,
            ManifoldKind::CenterUnstable => Projection::CU,
        }
    }

    pub fn target(self) -> Projection {
        match self {
            ManifoldKind::Center => Projection::SU,
            ManifoldKind::CenterStable => Projection::U,
            ManifoldKind::CenterUnstable => Projection::S,
        }
    }
}

/// Interpolation settings of a graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraphOptions {
    pub steps: usize,
    /// Chebyshev degree per axis; 0 disables tabulation.
    pub degree: usize,
    pub half_width: f64,
    /// Coarser table `(degree, half_width)` on a larger cube, used between
    /// the two cubes before falling back to shooting.
    pub outer: Option<(usize, f64)>,
}

impl GraphOptions {
    /// Degree decreasing with the domain dimension.
    pub fn for_dimension(m: usize, half_width: f64) -> Self {
        let degree = match m {
            0 => 0,
            1 => 24,
            2 => 18,
            3 => 12,
            _ => 8,
        };
        Self {
            steps: DEFAULT_SHOOTING_STEPS,
            degree,
            half_width,
            outer: None,
        }
    }
}

/// Jacobian of `F^n` at `x` (negative `n` iterates the inverse) together
/// with the end point.
fn orbit_jacobian(map: &dyn DiscreteMap, x: &DVector<f64>, n: i64) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let d = x.len();
    let mut j = DMatrix::identity(d, d);
    let mut p = x.clone();
    if n >= 0 {
        for _ in 0..n {
            let (next, jp) = map.eval_and_jacobian(&p)?;
            j = jp * j;
            p = next;
        }
    } else {
        for _ in 0..(-n) {
            let q = map.inverse(&p)?;
            let inv = map
                .jacobian(&q)?
                .try_inverse()
                .ok_or_else(|| Error::numeric("singular Jacobian on a shooting orbit"))?;
            j = inv * j;
            p = q;
        }
    }
    Ok((p, j))
}

/// Solves for the `target` coordinates of the manifold point over the
/// `domain` coordinates of `x` by shooting. Returns the full point.
pub fn shoot_manifold_point(
    map: &dyn DiscreteMap,
    kind: ManifoldKind,
    base: &DVector<f64>,
    steps: usize,
) -> Result<DVector<f64>> {
    shoot_manifold_point_from(map, kind, base, None, steps)
}

/// [`shoot_manifold_point`] with an initial guess for the target
/// coordinates.
pub fn shoot_manifold_point_from(
    map: &dyn DiscreteMap,
    kind: ManifoldKind,
    base: &DVector<f64>,
    guess: Option<&DVector<f64>>,
    steps: usize,
) -> Result<DVector<f64>> {
    let s = map.structure().clone();
    let unknown = s.indices(kind.target())?;
    let mut x = s.embed(base, kind.domain())?;
    if let Some(g) = guess {
        for (c, &u) in unknown.iter().enumerate() {
            x[u] = g[c];
        }
    }
    let si = s.indices(Projection::S)?;
    let ui = s.indices(Projection::U)?;
    let n = steps as i64;
    let mut conds: Vec<(i64, &[usize])> = Vec::new();
    if matches!(kind, ManifoldKind::Center | ManifoldKind::CenterUnstable) && !si.is_empty() {
        conds.push((-n, &si));
    }
    if matches!(kind, ManifoldKind::Center | ManifoldKind::CenterStable) && !ui.is_empty() {
        conds.push((n, &ui));
    }
    if unknown.is_empty() {
        return Ok(x);
    }
    let m = unknown.len();
    let mut last = f64::INFINITY;
    for _ in 0..50 {
        let mut r = DVector::zeros(m);
        let mut jac = DMatrix::zeros(m, m);
        let mut row = 0;
        for (steps, idx) in &conds {
            let (end, j) = orbit_jacobian(map, &x, *steps)?;
            for &i in idx.iter() {
                r[row] = end[i];
                for (c, &u) in unknown.iter().enumerate() {
                    jac[(row, c)] = j[(i, u)];
                }
                row += 1;
            }
        }
        let step = jac
            .lu()
            .solve(&r)
            .ok_or_else(|| Error::numeric("singular shooting Jacobian"))?;
        for (c, &u) in unknown.iter().enumerate() {
            x[u] -= step[c];
        }
        let size = step.norm();
        if size <= 1e-15 * x.norm().max(1e-3) || (size >= last && size < 1e-12) {
            return Ok(x);
        }
        last = size;
    }
    Err(Error::NoConvergence {
        what: format!("{kind:?} manifold shooting"),
        iterations: 50,
        residual: last,
    })
}

/// An invariant manifold `{x_target = ϖ(x_domain)}` of a model.
#[derive(Clone)]
pub struct InvariantGraph {
    kind: ManifoldKind,
    map: MapRef,
    opts: GraphOptions,
    table: Option<Arc<Chebyshev>>,
    outer: Option<Arc<Chebyshev>>,
}

impl InvariantGraph {
    /// Builds the graph, tabulating it on the interpolation cube.
    pub fn build(map: MapRef, kind: ManifoldKind, opts: GraphOptions) -> Result<Self> {
        let s = map.structure().clone();
        let m = s.indices(kind.domain())?.len();
        let out = s.indices(kind.target())?.len();
        let mut g = Self {
            kind,
            map,
            opts,
            table: None,
            outer: None,
        };
        if m > 0 && out > 0 {
            if opts.degree > 0 {
                g.table = Some(Arc::new(g.tabulate(opts.degree, opts.half_width)?));
            }
            if let Some((deg, w)) = opts.outer {
                g.outer = Some(Arc::new(g.tabulate(deg, w)?));
            }
        }
        Ok(g)
    }

    fn tabulate(&self, degree: usize, half_width: f64) -> Result<Chebyshev> {
        let s = self.map.structure();
        let m = s.indices(self.kind.domain())?.len();
        let out = s.indices(self.kind.target())?.len();
        // Consecutive nodes are close, so each solve starts from the last.
        let last: Mutex<Option<DVector<f64>>> = Mutex::new(None);
        Chebyshev::fit(
            |x| {
                let guess = last.lock().unwrap().clone();
                let p = shoot_manifold_point_from(self.map.as_ref(), self.kind, x, guess.as_ref(), self.opts.steps)?;
                let v = s.split(&p, self.kind.target())?;
                *last.lock().unwrap() = Some(v.clone());
                Ok(v)
            },
            m,
            out,
            degree,
            half_width,
        )
    }

    /// The table covering `x`, if any.
    fn table_at(&self, x: &DVector<f64>) -> Option<&Chebyshev> {
        [&self.table, &self.outer]
            .into_iter()
            .flatten()
            .find(|t| t.contains(x))
            .map(|t| t.as_ref())
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn options(&self) -> GraphOptions {
        self.opts
    }

    /// Graph value by shooting at one point.
    pub fn pointwise(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let s = self.map.structure();
        let p = shoot_manifold_point(self.map.as_ref(), self.kind, x, self.opts.steps)?;
        s.split(&p, self.kind.target())
    }

    /// The base point on `X_c` below `x`, where the graph vanishes.
    fn anchor(&self, x: &DVector<f64>) -> DVector<f64> {
        let s = self.map.structure();
        let mut a = x.clone();
        match self.kind {
            ManifoldKind::Center => a.fill(0.0),
            ManifoldKind::CenterStable => a.rows_mut(0, s.dim_s()).fill(0.0),
            ManifoldKind::CenterUnstable => {
                let dc = s.dim_c();
                let len = a.len();
                a.rows_mut(dc, len - dc).fill(0.0);
            }
        }
        a
    }

    /// `ϖ(x)`. The tabulated value is shifted so that the graph vanishes on
    /// `X_c` exactly.
    pub fn eval(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.iter().all(|v| *v == 0.0) {
            return Ok(DVector::zeros(self.map.structure().indices(self.kind.target())?.len()));
        }
        match self.table_at(x) {
            Some(t) => Ok(t.eval(x) - t.eval(&self.anchor(x))),
            None => self.pointwise(x),
        }
    }

    /// `Dϖ(x)`.
    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        match self.table_at(x) {
            Some(t) => {
                let (_, j) = t.eval_with_jacobian(x);
                let (_, ja) = t.eval_with_jacobian(&self.anchor(x));
                // The anchor depends on the center coordinates only.
                let s = self.map.structure();
                let c_cols: Vec<usize> = match self.kind {
                    ManifoldKind::Center => vec![],
                    ManifoldKind::CenterStable => (s.dim_s()..s.dim_s() + s.dim_c()).collect(),
                    ManifoldKind::CenterUnstable => (0..s.dim_c()).collect(),
                };
                let mut out = j;
                for c in c_cols {
                    for r in 0..out.nrows() {
                        out[(r, c)] -= ja[(r, c)];
                    }
                }
                Ok(out)
            }
            None => fd_jacobian(|y| self.pointwise(y), x),
        }
    }

    /// Largest difference between the table and pointwise shooting over
    /// `samples` points of the cube.
    pub fn table_error(&self, samples: &[DVector<f64>]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for x in samples {
            worst = worst.max((self.eval(x)? - self.pointwise(x)?).norm());
        }
        Ok(worst)
    }
}
