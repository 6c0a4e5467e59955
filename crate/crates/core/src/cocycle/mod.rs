//! Linear cocycles along base orbits, dichotomy fits, invariant splittings
//! of the unstable cocycle and the cohomology transfer map `P_u`.
//!
//! Two cocycles are used. The center cocycle lives over `X_c` with generator
//! the full Jacobian `DF(x_c)`. The unstable cocycle lives over `X_cs` with
//! generator `A_u(x_cs) = d/dx_u (pi_u F)(x_cs, 0)`.

mod splitting;
mod transfer;

pub use splitting::{assemble_p1, compute_invariant_splitting, SplittingField};
pub use transfer::{
    assemble_pu, fit_beta_e, holder_exponent_bound, transfer_map_b, TransferEngine, TransferMap,
    TransferOptions,
};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::blocks::{sub_matrix, BlockClass, Projection};
use crate::error::{Error, Result};
use crate::map::MapRef;

/// Default largest `|m|`, `|n|` accepted by [`cocycle_product`].
pub const DEFAULT_HORIZON: i64 = 400;

/// Base set of a cocycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CocycleBase {
    /// `X_c`, base map `g = pi_c F` on `X_c`.
    Center,
    /// `X_cs`, base map `g = pi_cs F` on `X_cs`.
    CenterStable,
}

/// A linear cocycle over the restriction of `F` to an invariant coordinate
/// subspace.
#[derive(Clone)]
pub struct CenterCocycle {
    map: MapRef,
    base: CocycleBase,
    /// Rows and columns of `DF` forming the generator; `None` for all of `DF`.
    block: Option<Projection>,
    horizon: i64,
}

/// Points `g^k(x)` for `k` in `lo..=hi`.
#[derive(Debug, Clone)]
pub struct BaseOrbit {
    lo: i64,
    points: Vec<DVector<f64>>,
}

impl BaseOrbit {
    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.points.len() as i64 - 1
    }

    /// The point `g^k(x)`.
    pub fn at(&self, k: i64) -> &DVector<f64> {
        &self.points[(k - self.lo) as usize]
    }
}

impl CenterCocycle {
    /// The cocycle of `DF` over `X_c`.
    pub fn center(map: MapRef) -> Self {
        Self {
            map,
            base: CocycleBase::Center,
            block: None,
            horizon: DEFAULT_HORIZON,
        }
    }

    /// The cocycle of `A_u` over `X_cs`.
    pub fn unstable(map: MapRef) -> Self {
        Self {
            map,
            base: CocycleBase::CenterStable,
            block: Some(Projection::U),
            horizon: DEFAULT_HORIZON,
        }
    }

    pub fn with_horizon(mut self, horizon: i64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn map(&self) -> &MapRef {
        &self.map
    }

    pub fn base(&self) -> CocycleBase {
        self.base
    }

    fn base_projection(&self) -> Projection {
        match self.base {
            CocycleBase::Center => Projection::C,
            CocycleBase::CenterStable => Projection::CS,
        }
    }

    pub fn base_dim(&self) -> usize {
        let s = self.map.structure();
        match self.base {
            CocycleBase::Center => s.dim_c(),
            CocycleBase::CenterStable => s.dim_s() + s.dim_c(),
        }
    }

    /// Dimension of the generator matrices.
    pub fn fiber_dim(&self) -> usize {
        let s = self.map.structure();
        match self.block {
            None => s.dim(),
            Some(p) => s.indices(p).map(|v| v.len()).unwrap_or(0),
        }
    }

    /// Embeds a base point into the full state space.
    pub fn embed(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.map.structure().embed(x, self.base_projection())
    }

    fn check_base(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.base_dim() {
            return Err(Error::input(format!(
                "base point has dimension {}, expected {}",
                x.len(),
                self.base_dim()
            )));
        }
        Ok(())
    }

    /// One step of the base map forward (`g`) or backward (`g^{-1}`).
    pub fn step(&self, x: &DVector<f64>, forward: bool) -> Result<DVector<f64>> {
        let full = self.embed(x)?;
        let y = if forward {
            self.map.eval(&full)?
        } else {
            self.map.inverse(&full)?
        };
        self.map.structure().split(&y, self.base_projection())
    }

    /// The orbit segment `g^k(x)`, `k = lo..=hi`, with `lo <= 0 <= hi`.
    pub fn orbit(&self, x: &DVector<f64>, lo: i64, hi: i64) -> Result<BaseOrbit> {
        self.check_base(x)?;
        if lo > 0 || hi < 0 {
            return Err(Error::input(format!("orbit range {lo}..={hi} must contain 0")));
        }
        let mut back = Vec::with_capacity((-lo) as usize);
        let mut p = x.clone();
        for _ in 0..(-lo) {
            p = self.step(&p, false)?;
            back.push(p.clone());
        }
        back.reverse();
        back.push(x.clone());
        let mut p = x.clone();
        for _ in 0..hi {
            p = self.step(&p, true)?;
            back.push(p.clone());
        }
        Ok(BaseOrbit { lo, points: back })
    }

    /// The generator `A(x)` at a base point.
    pub fn generator(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let full = self.embed(x)?;
        let j = self.map.jacobian(&full)?;
        match self.block {
            None => Ok(j),
            Some(p) => {
                let idx = self.map.structure().indices(p)?;
                Ok(DMatrix::from_fn(idx.len(), idx.len(), |r, c| j[(idx[r], idx[c])]))
            }
        }
    }

    /// `A(x)^{-1}`; fails on a singular generator.
    pub fn generator_inverse(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.generator(x)?
            .try_inverse()
            .ok_or_else(|| Error::numeric("singular cocycle generator (bad Jacobian?)"))
    }

    /// `𝒜(m, n; x)` using the points of a precomputed orbit.
    pub fn product_on(&self, orbit: &BaseOrbit, m: i64, n: i64) -> Result<DMatrix<f64>> {
        let d = self.fiber_dim();
        let mut out = DMatrix::identity(d, d);
        if m > n {
            for k in n..m {
                out = self.generator(orbit.at(k))? * out;
            }
        } else if m < n {
            for k in m..n {
                out = out * self.generator_inverse(orbit.at(k))?;
            }
        }
        Ok(out)
    }
}

/// The cocycle `𝒜(m, n; x)`: forward product for `m > n`, identity for
/// `m = n`, product of inverses for `m < n`.
pub fn cocycle_product(c: &CenterCocycle, m: i64, n: i64, base: &DVector<f64>) -> Result<DMatrix<f64>> {
    if m.abs() > c.horizon || n.abs() > c.horizon {
        return Err(Error::input(format!(
            "cocycle indices ({m}, {n}) exceed horizon {}",
            c.horizon
        )));
    }
    let orbit = c.orbit(base, m.min(n).min(0), m.max(n).max(0))?;
    c.product_on(&orbit, m, n)
}

/// Fitted growth rates of one block of the center cocycle.
#[derive(Debug, Clone, Serialize)]
pub struct BlockRates {
    pub label: String,
    pub class: BlockClass,
    /// Largest `|𝒜(H,0) pi_i|^{1/H}` over samples.
    pub forward_rate: f64,
    /// Smallest `|𝒜(-H,0) pi_i|^{-1/H}` over samples.
    pub backward_rate: f64,
}

/// One envelope inequality with the smallest constant that makes it hold.
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeFit {
    pub inequality: String,
    pub rate: f64,
    pub required_k: f64,
}

/// Output of [`estimate_dichotomy`].
#[derive(Debug, Clone, Serialize)]
pub struct DichotomyEstimate {
    pub horizon: usize,
    pub samples: usize,
    pub blocks: Vec<BlockRates>,
    pub envelopes: Vec<EnvelopeFit>,
    /// Smallest `K >= 1` satisfying every envelope inequality.
    pub fitted_k: f64,
    pub violations: Vec<String>,
}

/// Samples the center cocycle at the given base points and fits the six
/// envelope inequalities for stable, center and unstable parts over
/// `|m - n| <= horizon`.
pub fn estimate_dichotomy(
    c: &CenterCocycle,
    base_points: &[DVector<f64>],
    horizon: usize,
) -> Result<DichotomyEstimate> {
    if c.base() != CocycleBase::Center || c.block.is_some() {
        return Err(Error::input("estimate_dichotomy expects the center cocycle"));
    }
    let s = c.map().structure().clone();
    let env = s.envelopes;
    let h = horizon as i64;
    let parts = [
        (Projection::S, env.lambda_s_plus, env.lambda_s_minus, "s"),
        (Projection::C, 1.0 + env.margin, 1.0 - env.margin, "c"),
        (Projection::U, env.lambda_u_plus, env.lambda_u_minus, "u"),
    ];
    // Required K per inequality: (forward, backward) for each part.
    let mut need = [[0.0f64; 2]; 3];
    let blocks_all = s.blocks();
    let mut fwd_rate = vec![0.0f64; blocks_all.len()];
    let mut bwd_rate = vec![f64::INFINITY; blocks_all.len()];
    for x in base_points {
        let orbit = c.orbit(x, -h, h)?;
        let mut fwd = vec![DMatrix::identity(s.dim(), s.dim())];
        for k in 0..h {
            let next = c.generator(orbit.at(k))? * fwd.last().unwrap();
            fwd.push(next);
        }
        let mut bwd = vec![DMatrix::identity(s.dim(), s.dim())];
        for k in 1..=h {
            let next = bwd.last().unwrap() * c.generator_inverse(orbit.at(-k))?;
            bwd.push(next);
        }
        for (pi, (proj, up, down, _)) in parts.iter().enumerate() {
            let idx = s.indices(*proj)?;
            if idx.is_empty() {
                continue;
            }
            for n in 1..=h as usize {
                let f = columns(&fwd[n], &idx);
                let b = columns(&bwd[n], &idx);
                need[pi][0] = need[pi][0].max(op_norm(&f) / up.powi(n as i32));
                need[pi][1] = need[pi][1].max(op_norm(&b) / down.powi(-(n as i32)));
            }
        }
        let mut start = 0;
        for (bi, b) in blocks_all.iter().enumerate() {
            let idx: Vec<usize> = (start..start + b.size).collect();
            start += b.size;
            if h == 0 {
                continue;
            }
            let f = op_norm(&columns(&fwd[h as usize], &idx)).powf(1.0 / h as f64);
            let bk = op_norm(&columns(&bwd[h as usize], &idx)).powf(-1.0 / h as f64);
            fwd_rate[bi] = fwd_rate[bi].max(f);
            bwd_rate[bi] = bwd_rate[bi].min(bk);
        }
    }
    let mut envelopes = Vec::new();
    let mut violations = Vec::new();
    let mut fitted_k: f64 = 1.0;
    for (pi, (proj, up, down, name)) in parts.iter().enumerate() {
        if s.indices(*proj)?.is_empty() {
            continue;
        }
        for (dir, rate) in [(0usize, *up), (1usize, *down)] {
            let ineq = match dir {
                0 => format!("|A(m,n) pi_{name}| <= K {rate}^(m-n), m >= n"),
                _ => format!("|A(m,n) pi_{name}| <= K {rate}^(m-n), m <= n"),
            };
            let k = need[pi][dir];
            fitted_k = fitted_k.max(k);
            if k > env.dichotomy_k * (1.0 + 1e-12) {
                violations.push(format!("{ineq} needs K = {k:.6} > declared {}", env.dichotomy_k));
            }
            envelopes.push(EnvelopeFit {
                inequality: ineq,
                rate,
                required_k: k,
            });
        }
    }
    let mut blocks = Vec::new();
    let mut n_s = 0;
    let mut n_u = 0;
    for (bi, b) in blocks_all.iter().enumerate() {
        let label = match b.class {
            BlockClass::Stable => {
                n_s += 1;
                format!("lambda_{n_s}")
            }
            BlockClass::Center => "center".to_string(),
            BlockClass::Unstable => {
                n_u += 1;
                format!("lambda_{}", s.stable_blocks().len() + n_u)
            }
        };
        blocks.push(BlockRates {
            label,
            class: b.class,
            forward_rate: fwd_rate[bi],
            backward_rate: if bwd_rate[bi].is_finite() { bwd_rate[bi] } else { 0.0 },
        });
    }
    Ok(DichotomyEstimate {
        horizon,
        samples: base_points.len(),
        blocks,
        envelopes,
        fitted_k,
        violations,
    })
}

fn columns(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), idx.len(), |r, c| m[(r, idx[c])])
}

fn op_norm(m: &DMatrix<f64>) -> f64 {
    crate::numeric::spectral_norm(m)
}

/// The unstable generator `A_u(x_cs)` conjugated into the coordinates of
/// the blocks: `P_1(g x) A_u(x) P_1(x)^{-1}`.
pub(crate) fn conjugated_generator(
    a_u: &DMatrix<f64>,
    p1_here: &DMatrix<f64>,
    p1_next: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let inv = p1_here
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::numeric("singular P_1"))?;
    Ok(p1_next * a_u * inv)
}

/// Diagonal sub-block `i` (local ranges) of a matrix.
pub(crate) fn diag_block(m: &DMatrix<f64>, r: std::ops::Range<usize>) -> DMatrix<f64> {
    sub_matrix(m, r.clone(), r)
}
