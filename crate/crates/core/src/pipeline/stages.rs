//! The normalization stages. Each is a [`Transform`] from the coordinates
//! after the stage to the coordinates before it.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};

use super::chebyshev::Chebyshev;
use super::graph::InvariantGraph;
use super::transform::Transform;
use crate::blocks::{Projection, SpectralStructure};
use crate::cutoff::{cutoff, cutoff_derivative};
use crate::error::{Error, Result};
use crate::lp::{stable_tangent_frame, LPConfig, StableFoliation};
use crate::map::MapRef;
use crate::numeric::{bit_key, fd_jacobian};

/// Fixed-point iterations of implicit stage inverses.
const FIXED_POINT_ITER: usize = 200;

/// Straightens the center manifold: new coordinates are
/// `(x_c, x_su - ϖ_c(x_c))`.
#[derive(Clone)]
pub struct CenterStraightening {
    structure: SpectralStructure,
    graph: InvariantGraph,
}

impl CenterStraightening {
    pub fn new(structure: SpectralStructure, graph: InvariantGraph) -> Self {
        Self { structure, graph }
    }

    pub fn graph(&self) -> &InvariantGraph {
        &self.graph
    }

    fn lift(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let s = &self.structure;
        let w = self.graph.eval(&s.split(x, Projection::C)?)?;
        s.embed(&w, Projection::SU)
    }
}

impl Transform for CenterStraightening {
    fn name(&self) -> &str {
        "center_manifold"
    }

    fn forward(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(x + self.lift(x)?)
    }

    fn inverse(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(y - self.lift(y)?)
    }

    fn forward_correction(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.lift(x)
    }

    fn inverse_correction(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(-self.lift(y)?)
    }

    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let s = &self.structure;
        let dw = self.graph.jacobian(&s.split(x, Projection::C)?)?;
        let rows = s.indices(Projection::SU)?;
        let cols = s.indices(Projection::C)?;
        let mut j = DMatrix::identity(s.dim(), s.dim());
        for (a, &r) in rows.iter().enumerate() {
            for (b, &c) in cols.iter().enumerate() {
                j[(r, c)] += dw[(a, b)];
            }
        }
        Ok(j)
    }

    fn inverse_jacobian(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        let d = self.structure.dim();
        Ok(DMatrix::identity(d, d) * 2.0 - self.jacobian(y)?)
    }
}

/// Frames of the stable and unstable directions along `X_c` and the
/// transition matrix `P(x_c)` sending them to `X_s`, `X_u`.
#[derive(Debug, Clone)]
pub struct TangentFrames {
    /// `d × d_s`, stable rows equal to the identity.
    pub e_s: DMatrix<f64>,
    /// `d × d_u`, unstable rows equal to the identity.
    pub e_u: DMatrix<f64>,
    pub p: DMatrix<f64>,
}

fn graph_normalize(frame: &DMatrix<f64>, rows: &[usize]) -> Result<DMatrix<f64>> {
    let k = rows.len();
    let head = DMatrix::from_fn(k, k, |r, c| frame[(rows[r], c)]);
    let inv = head
        .try_inverse()
        .ok_or_else(|| Error::numeric("tangent frame is not a graph over its block"))?;
    Ok(frame * inv)
}

/// Computes `E_s(x_c)` from the derivative of the stable foliation,
/// `E_u(x_c)` by pushing `X_u` forward along the backward center orbit, and
/// `P(x_c) = [E_s | X_c | E_u]^{-1}`.
pub fn tangent_frames_on_center(
    map: &MapRef,
    x_c: &DVector<f64>,
    cfg: &LPConfig,
    horizon: usize,
) -> Result<TangentFrames> {
    let s = map.structure().clone();
    let d = s.dim();
    let si = s.indices(Projection::S)?;
    let ui = s.indices(Projection::U)?;
    let e_s = if si.is_empty() {
        DMatrix::zeros(d, 0)
    } else {
        graph_normalize(&stable_tangent_frame(map.as_ref(), x_c, cfg)?, &si)?
    };
    let e_u = if ui.is_empty() {
        DMatrix::zeros(d, 0)
    } else {
        let mut orbit = vec![s.embed(x_c, Projection::C)?];
        for _ in 0..horizon {
            orbit.push(map.inverse(orbit.last().unwrap())?);
        }
        let mut frame = DMatrix::from_fn(d, ui.len(), |r, c| if r == ui[c] { 1.0 } else { 0.0 });
        for p in orbit[1..].iter().rev() {
            frame = graph_normalize(&(map.jacobian(p)? * frame), &ui)?;
        }
        frame
    };
    let mut q = DMatrix::zeros(d, d);
    for (c, &i) in si.iter().enumerate() {
        q.set_column(i, &e_s.column(c));
    }
    for i in s.indices(Projection::C)? {
        q[(i, i)] = 1.0;
    }
    for (c, &i) in ui.iter().enumerate() {
        q.set_column(i, &e_u.column(c));
    }
    let p = q
        .try_inverse()
        .ok_or_else(|| Error::numeric("tangent frames along X_c are degenerate"))?;
    Ok(TangentFrames { e_s, e_u, p })
}

/// Evaluator of `P(x_c)`: a Chebyshev table on a cube of center points,
/// pointwise (cached) outside it.
pub struct FrameField {
    map: MapRef,
    cfg: LPConfig,
    horizon: usize,
    table: Option<Chebyshev>,
    cache: Mutex<HashMap<Vec<u64>, Arc<DMatrix<f64>>>>,
}

impl FrameField {
    /// Builds the field; `degree = 0` disables the table.
    pub fn new(map: MapRef, cfg: LPConfig, horizon: usize, degree: usize, half_width: f64) -> Result<Self> {
        let mut f = Self {
            map,
            cfg,
            horizon,
            table: None,
            cache: Mutex::new(HashMap::new()),
        };
        let s = f.map.structure().clone();
        if degree > 0 && s.dim_c() > 0 {
            let d = s.dim();
            let table = Chebyshev::fit(
                |x| Ok(DVector::from_column_slice(f.pointwise(x)?.as_slice())),
                s.dim_c(),
                d * d,
                degree,
                half_width,
            )?;
            f.table = Some(table);
        }
        Ok(f)
    }

    fn pointwise(&self, x_c: &DVector<f64>) -> Result<Arc<DMatrix<f64>>> {
        let key = bit_key(x_c);
        if let Some(p) = self.cache.lock().unwrap().get(&key) {
            return Ok(p.clone());
        }
        let p = Arc::new(tangent_frames_on_center(&self.map, x_c, &self.cfg, self.horizon)?.p);
        self.cache.lock().unwrap().insert(key, p.clone());
        Ok(p)
    }

    pub fn p(&self, x_c: &DVector<f64>) -> Result<Arc<DMatrix<f64>>> {
        let d = self.map.structure().dim();
        match &self.table {
            Some(t) if t.contains(x_c) => Ok(Arc::new(DMatrix::from_column_slice(d, d, t.eval(x_c).as_slice()))),
            _ => self.pointwise(x_c),
        }
    }

    /// `P(x_c)` and its partial derivatives `∂P/∂x_c[k]`.
    pub fn p_with_derivatives(&self, x_c: &DVector<f64>) -> Result<(Arc<DMatrix<f64>>, Vec<DMatrix<f64>>)> {
        let d = self.map.structure().dim();
        match &self.table {
            Some(t) if t.contains(x_c) => {
                let (v, j) = t.eval_with_jacobian(x_c);
                let parts = (0..x_c.len())
                    .map(|k| DMatrix::from_column_slice(d, d, j.column(k).as_slice()))
                    .collect();
                Ok((Arc::new(DMatrix::from_column_slice(d, d, v.as_slice())), parts))
            }
            _ => {
                let p = self.pointwise(x_c)?;
                let mut parts = Vec::with_capacity(x_c.len());
                for k in 0..x_c.len() {
                    let h = f64::EPSILON.cbrt() * x_c[k].abs().max(1.0);
                    let mut a = x_c.clone();
                    let mut b = x_c.clone();
                    a[k] += h;
                    b[k] -= h;
                    parts.push((self.pointwise(&a)?.as_ref() - self.pointwise(&b)?.as_ref()) / (2.0 * h));
                }
                Ok((p, parts))
            }
        }
    }
}

/// `Υ(x) = x + ρ(|x|) (P(x_c) - I)(x - x_c)`: fixes `X_c`, has derivative
/// `P(x_c)` there, and is the identity outside the cutoff radius.
pub struct Upsilon {
    structure: SpectralStructure,
    frames: FrameField,
    radius: f64,
}

impl Upsilon {
    pub fn new(structure: SpectralStructure, frames: FrameField, radius: f64) -> Self {
        Self {
            structure,
            frames,
            radius,
        }
    }

    /// `Υ(x) - x`.
    fn shift(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let rho = cutoff(x.norm(), self.radius);
        if rho == 0.0 {
            return Ok(DVector::zeros(x.len()));
        }
        let s = &self.structure;
        let x_c = s.split(x, Projection::C)?;
        let normal = x - s.embed(&x_c, Projection::C)?;
        let p = self.frames.p(&x_c)?;
        Ok((p.as_ref() * &normal - &normal) * rho)
    }

    /// `DΥ(x)`.
    fn shift_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let s = &self.structure;
        let d = s.dim();
        let r = x.norm();
        let rho = cutoff(r, self.radius);
        let mut j = DMatrix::identity(d, d);
        if rho == 0.0 {
            return Ok(j);
        }
        let x_c = s.split(x, Projection::C)?;
        let normal = x - s.embed(&x_c, Projection::C)?;
        let (p, dp) = self.frames.p_with_derivatives(&x_c)?;
        let pm = p.as_ref() - DMatrix::identity(d, d);
        let v = &pm * &normal;
        if r > 0.0 {
            let drho = cutoff_derivative(r, self.radius);
            j += &v * (x.transpose() * (drho / r));
        }
        let ci: Vec<usize> = s.c_range().collect();
        let mut inner = pm.clone();
        for &c in &ci {
            inner.column_mut(c).fill(0.0);
        }
        for (k, &c) in ci.iter().enumerate() {
            let col = &dp[k] * &normal;
            inner.column_mut(c).copy_from(&col);
        }
        j += inner * rho;
        Ok(j)
    }

    /// `P(x_c)`.
    pub fn frame(&self, x_c: &DVector<f64>) -> Result<Arc<DMatrix<f64>>> {
        self.frames.p(x_c)
    }
}

impl Transform for Upsilon {
    fn name(&self) -> &str {
        "upsilon"
    }

    /// `Υ^{-1}` by fixed-point iteration.
    fn forward(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(y + self.forward_correction(y)?)
    }

    fn inverse(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(x + self.shift(x)?)
    }

    fn forward_correction(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let mut c = -self.shift(y)?;
        for _ in 0..FIXED_POINT_ITER {
            let next = -self.shift(&(y + &c))?;
            let change = (&next - &c).norm();
            c = next;
            if change <= 1e-16 * y.norm().max(1e-3) {
                return Ok(c);
            }
        }
        Err(Error::NoConvergence {
            what: "inverse of the tangent-frame extension".into(),
            iterations: FIXED_POINT_ITER,
            residual: (self.shift(&(y + &c))? + &c).norm(),
        })
    }

    fn inverse_correction(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.shift(x)
    }

    fn jacobian(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.jacobian_with_forward(y, &self.forward(y)?)
    }

    fn jacobian_with_forward(&self, _y: &DVector<f64>, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.shift_jacobian(x)?
            .try_inverse()
            .ok_or_else(|| Error::numeric("singular tangent-frame extension"))
    }

    fn inverse_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.shift_jacobian(x)
    }
}

/// `𝒢(x) = (x_s - ϖ_cu(x_cu), x_c, x_u - ϖ_cs(x_cs))`.
#[derive(Clone)]
pub struct ManifoldStraightening {
    structure: SpectralStructure,
    cs: Option<InvariantGraph>,
    cu: Option<InvariantGraph>,
}

impl ManifoldStraightening {
    pub fn new(structure: SpectralStructure, cs: Option<InvariantGraph>, cu: Option<InvariantGraph>) -> Self {
        Self { structure, cs, cu }
    }

    pub fn cs_graph(&self) -> Option<&InvariantGraph> {
        self.cs.as_ref()
    }

    pub fn cu_graph(&self) -> Option<&InvariantGraph> {
        self.cu.as_ref()
    }

    /// `(ϖ_cu(x_cu), 0, ϖ_cs(x_cs))` embedded.
    fn graphs_at(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let s = &self.structure;
        let mut out = DVector::zeros(s.dim());
        if let Some(g) = &self.cu {
            out += s.embed(&g.eval(&s.split(x, Projection::CU)?)?, Projection::S)?;
        }
        if let Some(g) = &self.cs {
            out += s.embed(&g.eval(&s.split(x, Projection::CS)?)?, Projection::U)?;
        }
        Ok(out)
    }

    /// Jacobian of `𝒢` (old → new).
    fn straightening_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let s = &self.structure;
        let mut j = DMatrix::identity(s.dim(), s.dim());
        let mut sub = |g: &InvariantGraph, dom: Projection, tgt: Projection| -> Result<()> {
            let dw = g.jacobian(&s.split(x, dom)?)?;
            let rows = s.indices(tgt)?;
            let cols = s.indices(dom)?;
            for (a, &r) in rows.iter().enumerate() {
                for (b, &c) in cols.iter().enumerate() {
                    j[(r, c)] -= dw[(a, b)];
                }
            }
            Ok(())
        };
        if let Some(g) = &self.cu {
            sub(g, Projection::CU, Projection::S)?;
        }
        if let Some(g) = &self.cs {
            sub(g, Projection::CS, Projection::U)?;
        }
        Ok(j)
    }
}

impl Transform for ManifoldStraightening {
    fn name(&self) -> &str {
        "invariant_manifolds"
    }

    /// `𝒢^{-1}`: explicit with one graph, fixed-point iteration with two.
    fn forward(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(y + self.forward_correction(y)?)
    }

    fn inverse(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(x - self.graphs_at(x)?)
    }

    fn forward_correction(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let mut c = self.graphs_at(y)?;
        if self.cs.is_none() || self.cu.is_none() {
            return Ok(c);
        }
        for _ in 0..FIXED_POINT_ITER {
            let next = self.graphs_at(&(y + &c))?;
            let change = (&next - &c).norm();
            c = next;
            if change <= 1e-16 * y.norm().max(1e-3) {
                return Ok(c);
            }
        }
        Err(Error::NoConvergence {
            what: "inverse of the manifold straightening".into(),
            iterations: FIXED_POINT_ITER,
            residual: (self.graphs_at(&(y + &c))? - &c).norm(),
        })
    }

    fn inverse_correction(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(-self.graphs_at(x)?)
    }

    fn jacobian(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.jacobian_with_forward(y, &self.forward(y)?)
    }

    fn jacobian_with_forward(&self, _y: &DVector<f64>, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.straightening_jacobian(x)?
            .try_inverse()
            .ok_or_else(|| Error::numeric("singular manifold straightening"))
    }

    fn inverse_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.straightening_jacobian(x)
    }
}

/// `(φ(x_cs), x_u)` with `φ(x_s, x_c) = (x_s, h_s((0, x_c), x_s))`: maps the
/// flat foliation `{x_c = const}` onto the stable leaves inside `X_cs`.
/// The center shifts of `φ` and `φ^{-1}` are tabulated on a cube of
/// `X_cs` and computed by the stable LP outside it.
#[derive(Clone)]
pub struct StableStraightening {
    structure: SpectralStructure,
    foliation: StableFoliation,
    to_leaf: Option<Arc<Chebyshev>>,
    from_leaf: Option<Arc<Chebyshev>>,
}

impl StableStraightening {
    /// Builds the stage; `degree = 0` disables the tables.
    pub fn new(foliation: StableFoliation, degree: usize, half_width: f64) -> Result<Self> {
        let structure = foliation.map.structure().clone();
        let mut st = Self {
            structure,
            foliation,
            to_leaf: None,
            from_leaf: None,
        };
        let s = st.structure.clone();
        if degree > 0 && s.dim_s() > 0 && s.dim_c() > 0 {
            let m = s.dim_s() + s.dim_c();
            let fit = |to_leaf: bool| {
                Chebyshev::fit(
                    |x_cs| st.c_shift_pointwise(x_cs, to_leaf),
                    m,
                    s.dim_c(),
                    degree,
                    half_width,
                )
            };
            let a = fit(true)?;
            let b = fit(false)?;
            st.to_leaf = Some(Arc::new(a));
            st.from_leaf = Some(Arc::new(b));
        }
        Ok(st)
    }

    /// Center shift at `x_cs` by the stable LP.
    fn c_shift_pointwise(&self, x_cs: &DVector<f64>, to_leaf: bool) -> Result<DVector<f64>> {
        let s = &self.structure;
        let ds = s.dim_s();
        let c_old = x_cs.rows(ds, s.dim_c()).into_owned();
        let h = if to_leaf {
            let x_s = x_cs.rows(0, ds).into_owned();
            let mut base = x_cs.clone();
            base.rows_mut(0, ds).fill(0.0);
            self.foliation.h_s(&base, &x_s)?
        } else {
            self.foliation.h_s(x_cs, &DVector::zeros(ds))?
        };
        Ok(h - c_old)
    }

    fn table(&self, to_leaf: bool) -> Option<&Chebyshev> {
        if to_leaf { self.to_leaf.as_deref() } else { self.from_leaf.as_deref() }
    }

    /// Center shift vanishing on `X_c`: the tables are corrected by their
    /// value at `x_s = 0`.
    fn c_shift_cs(&self, x_cs: &DVector<f64>, to_leaf: bool) -> Result<DVector<f64>> {
        let ds = self.structure.dim_s();
        if x_cs.rows(0, ds).iter().all(|v| *v == 0.0) {
            return Ok(DVector::zeros(self.structure.dim_c()));
        }
        match self.table(to_leaf) {
            Some(t) if t.contains(x_cs) => {
                let mut base = x_cs.clone();
                base.rows_mut(0, ds).fill(0.0);
                Ok(t.eval(x_cs) - t.eval(&base))
            }
            _ => self.c_shift_pointwise(x_cs, to_leaf),
        }
    }

    fn c_shift(&self, x: &DVector<f64>, to_leaf: bool) -> Result<DVector<f64>> {
        let s = &self.structure;
        let shift = self.c_shift_cs(&s.split(x, Projection::CS)?, to_leaf)?;
        s.embed(&shift, Projection::C)
    }

    fn shift_jacobian(&self, x: &DVector<f64>, to_leaf: bool) -> Result<DMatrix<f64>> {
        let s = &self.structure;
        let d = s.dim();
        let ds = s.dim_s();
        let x_cs = s.split(x, Projection::CS)?;
        let dj = match self.table(to_leaf) {
            Some(t) if t.contains(&x_cs) => {
                let (_, j) = t.eval_with_jacobian(&x_cs);
                let mut base = x_cs.clone();
                base.rows_mut(0, ds).fill(0.0);
                let (_, jb) = t.eval_with_jacobian(&base);
                let mut out = j;
                for c in ds..x_cs.len() {
                    for r in 0..out.nrows() {
                        out[(r, c)] -= jb[(r, c)];
                    }
                }
                out
            }
            _ => fd_jacobian(|y| self.c_shift_cs(y, to_leaf), &x_cs)?,
        };
        let rows = s.indices(Projection::C)?;
        let cols = s.indices(Projection::CS)?;
        let mut j = DMatrix::identity(d, d);
        for (a, &r) in rows.iter().enumerate() {
            for (b, &c) in cols.iter().enumerate() {
                j[(r, c)] += dj[(a, b)];
            }
        }
        Ok(j)
    }
}

impl Transform for StableStraightening {
    fn name(&self) -> &str {
        "stable_foliation"
    }

    fn forward(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(x + self.c_shift(x, true)?)
    }

    fn inverse(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(y + self.c_shift(y, false)?)
    }

    fn forward_correction(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.c_shift(x, true)
    }

    fn inverse_correction(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.c_shift(y, false)
    }

    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.shift_jacobian(x, true)
    }

    fn inverse_jacobian(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.shift_jacobian(y, false)
    }
}
