//! Lyapunov-Perron solvers for the unstable foliation, the stable foliation
//! on `X_cs`, the classical stable foliation and its `z_s`-derivative, plus
//! a brute-force leaf-membership oracle.
//!
//! Every solver works on a truncated orbit-difference sequence. Writing
//! `L_k` for the block-diagonal part of the linearization along the base
//! orbit and `Δ_k(q) = F(y_k + q) - F(y_k) - L_k q`, one part of the sequence
//! is propagated forward from the left end and the other backward from the
//! right end, and the two recursions are swept until the sequence stops
//! changing in the weighted sup-norm.

mod oracle;
mod stable;
mod unstable;

pub use oracle::{leaf_membership_oracle, stable_leaf_membership_oracle, LeafCheck, BOUND_FACTOR};
pub use stable::{
    solve_classical_lp, solve_derivative_lp, solve_stable_lp_on_xcs, stable_tangent_frame,
    StableFoliation,
};
pub use unstable::{solve_unstable_lp, unstable_foliation_h_u, UnstableFoliation};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::blocks::Envelopes;
use crate::error::{Error, Result};

/// Default truncation of the index range.
pub const DEFAULT_TRUNCATION: usize = 30;
/// Default sweep tolerance in the weighted sup-norm.
pub const DEFAULT_TOL: f64 = 1e-13;
/// Default sweep cap.
pub const DEFAULT_MAX_ITER: usize = 200;

/// Which end of the index range the sequence is anchored at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Indices `n = -N..=0`.
    Backward,
    /// Indices `n = 0..=N`.
    Forward,
}

/// Solver settings for one Lyapunov-Perron equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LPConfig {
    /// Weight of the sup-norm `sup rho^{-n} |q_n|`.
    pub rho: f64,
    pub truncation: usize,
    pub tol: f64,
    pub max_iter: usize,
}

/// Upper bound on the exponent `β` for which the unstable weight interval
/// `(1 + ς, λ_u^- (λ_s^-)^β)` is non-empty.
pub fn unstable_beta_bound(margin: f64, lambda_u_minus: f64, lambda_s_minus: f64) -> f64 {
    ((1.0 + margin).ln() - lambda_u_minus.ln()) / lambda_s_minus.ln()
}

impl LPConfig {
    /// Admissible interval for the unstable weight, with `β` at half its
    /// upper bound.
    pub fn unstable_interval(env: &Envelopes) -> (f64, f64) {
        let beta = 0.5 * unstable_beta_bound(env.margin, env.lambda_u_minus, env.lambda_s_minus);
        (
            1.0 + env.margin,
            env.lambda_u_minus * env.lambda_s_minus.powf(beta),
        )
    }

    /// Admissible interval for the stable weight.
    pub fn stable_interval(env: &Envelopes) -> (f64, f64) {
        (env.lambda_s_plus, 1.0 - env.margin)
    }

    fn midpoint((lo, hi): (f64, f64)) -> f64 {
        (lo * hi).sqrt()
    }

    /// Geometric midpoint of the unstable interval.
    pub fn unstable_default(env: &Envelopes) -> Self {
        Self {
            rho: Self::midpoint(Self::unstable_interval(env)),
            truncation: DEFAULT_TRUNCATION,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }

    /// Geometric midpoint of the stable interval.
    pub fn stable_default(env: &Envelopes) -> Self {
        Self {
            rho: Self::midpoint(Self::stable_interval(env)),
            truncation: DEFAULT_TRUNCATION,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_truncation(mut self, n: usize) -> Self {
        self.truncation = n;
        self
    }

    fn check(&self, (lo, hi): (f64, f64), which: &str) -> Result<()> {
        if !(self.rho > lo && self.rho < hi) {
            return Err(Error::Inadmissible {
                name: format!("{which} weight rho"),
                value: self.rho,
                reason: format!("must lie in ({lo:.6}, {hi:.6})"),
            });
        }
        if self.truncation == 0 || !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::input("truncation, tolerance and iteration cap must be positive"));
        }
        Ok(())
    }

    pub fn check_unstable(&self, env: &Envelopes) -> Result<()> {
        self.check(Self::unstable_interval(env), "unstable")
    }

    pub fn check_stable(&self, env: &Envelopes) -> Result<()> {
        self.check(Self::stable_interval(env), "stable")
    }
}

/// A truncated orbit-difference sequence and its solver diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct WeightedSequence {
    pub direction: Direction,
    pub truncation: usize,
    /// Entries ordered by increasing index: `n = -N..=0` or `n = 0..=N`.
    pub entries: Vec<DVector<f64>>,
    pub weight: f64,
    /// `sup rho^{-n} |q_n|` over stored entries.
    pub norm: f64,
    pub iterations: usize,
    /// Largest ratio of successive sweep differences.
    pub lipschitz: f64,
    /// Geometric bound on the contribution of the dropped terms.
    pub tail_bound: f64,
}

impl WeightedSequence {
    /// Smallest stored index.
    pub fn lo(&self) -> i64 {
        match self.direction {
            Direction::Backward => -(self.truncation as i64),
            Direction::Forward => 0,
        }
    }

    /// Entry `q_n`.
    pub fn at(&self, n: i64) -> &DVector<f64> {
        &self.entries[(n - self.lo()) as usize]
    }

    /// The entry at index 0.
    pub fn zeroth(&self) -> &DVector<f64> {
        self.at(0)
    }
}

/// One two-sided sweep problem on indices `lo..=hi`.
pub(crate) struct Sweep<'a> {
    pub lo: i64,
    pub hi: i64,
    pub dim: usize,
    /// Coordinates propagated forward from `lo`.
    pub fwd_idx: Vec<usize>,
    /// Coordinates propagated backward from `hi`.
    pub bwd_idx: Vec<usize>,
    pub fwd_init: DVector<f64>,
    pub bwd_init: DVector<f64>,
    /// Forward-part block of `L_k`, `k = lo..hi`.
    pub fwd_lin: Vec<DMatrix<f64>>,
    /// Inverse of the backward-part block of `L_k`, `k = lo..hi`.
    pub bwd_lin_inv: Vec<DMatrix<f64>>,
    /// `Δ_k(q_k)` for `k = lo..hi`.
    pub delta: &'a (dyn Fn(i64, &DVector<f64>) -> Result<DVector<f64>> + 'a),
    pub weight: f64,
}

pub(crate) struct SweepResult {
    pub entries: Vec<DVector<f64>>,
    pub iterations: usize,
    pub lipschitz: f64,
    pub norm: f64,
    /// Largest `|Δ_k| / |q_k|` seen at the final sweep.
    pub delta_ratio: f64,
}

fn gather(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_fn(idx.len(), |i, _| v[idx[i]])
}

fn scatter(dst: &mut DVector<f64>, idx: &[usize], src: &DVector<f64>) {
    for (i, &j) in idx.iter().enumerate() {
        dst[j] = src[i];
    }
}

pub(crate) fn weighted_norm(entries: &[DVector<f64>], lo: i64, weight: f64) -> f64 {
    entries
        .iter()
        .enumerate()
        .map(|(i, q)| weight.powi(-((lo + i as i64) as i32)) * q.norm())
        .fold(0.0, f64::max)
}

impl Sweep<'_> {
    fn apply(&self, q: &[DVector<f64>]) -> Result<(Vec<DVector<f64>>, f64)> {
        let len = (self.hi - self.lo + 1) as usize;
        let mut deltas = Vec::with_capacity(len - 1);
        let mut ratio: f64 = 0.0;
        for i in 0..len - 1 {
            let d = (self.delta)(self.lo + i as i64, &q[i])?;
            let qn = q[i].norm();
            if qn > 0.0 {
                ratio = ratio.max(d.norm() / qn);
            }
            deltas.push(d);
        }
        let mut out = vec![DVector::zeros(self.dim); len];
        let mut v = self.fwd_init.clone();
        scatter(&mut out[0], &self.fwd_idx, &v);
        for i in 0..len - 1 {
            v = &self.fwd_lin[i] * v + gather(&deltas[i], &self.fwd_idx);
            scatter(&mut out[i + 1], &self.fwd_idx, &v);
        }
        let mut w = self.bwd_init.clone();
        scatter(&mut out[len - 1], &self.bwd_idx, &w);
        for i in (0..len - 1).rev() {
            w = &self.bwd_lin_inv[i] * (w - gather(&deltas[i], &self.bwd_idx));
            scatter(&mut out[i], &self.bwd_idx, &w);
        }
        Ok((out, ratio))
    }

    pub fn solve(&self, tol: f64, max_iter: usize, what: &str) -> Result<SweepResult> {
        let len = (self.hi - self.lo + 1) as usize;
        let mut q = vec![DVector::zeros(self.dim); len];
        let mut prev_diff = f64::NAN;
        let mut lipschitz: f64 = 0.0;
        let mut growing = 0;
        for it in 1..=max_iter {
            let (next, ratio) = self.apply(&q)?;
            let diff_entries: Vec<DVector<f64>> =
                next.iter().zip(&q).map(|(a, b)| a - b).collect();
            let diff = weighted_norm(&diff_entries, self.lo, self.weight);
            if !diff.is_finite() {
                return Err(Error::NonContraction {
                    what: what.into(),
                    lipschitz: f64::INFINITY,
                });
            }
            if prev_diff.is_finite() && prev_diff > 0.0 {
                let r = diff / prev_diff;
                lipschitz = lipschitz.max(r);
                growing = if r >= 1.0 && diff > tol { growing + 1 } else { 0 };
                if growing >= 3 {
                    return Err(Error::NonContraction {
                        what: what.into(),
                        lipschitz: r,
                    });
                }
            }
            q = next;
            if diff < tol {
                let norm = weighted_norm(&q, self.lo, self.weight);
                return Ok(SweepResult {
                    entries: q,
                    iterations: it,
                    lipschitz,
                    norm,
                    delta_ratio: ratio,
                });
            }
            prev_diff = diff;
        }
        let (next, _) = self.apply(&q)?;
        let diff_entries: Vec<DVector<f64>> = next.iter().zip(&q).map(|(a, b)| a - b).collect();
        Err(Error::NoConvergence {
            what: what.into(),
            iterations: max_iter,
            residual: weighted_norm(&diff_entries, self.lo, self.weight),
        })
    }
}

/// Splits a block-diagonal linearization into its two parts.
pub(crate) fn split_blocks(
    m: &DMatrix<f64>,
    fwd: &[usize],
    bwd: &[usize],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let f = DMatrix::from_fn(fwd.len(), fwd.len(), |r, c| m[(fwd[r], fwd[c])]);
    let b = DMatrix::from_fn(bwd.len(), bwd.len(), |r, c| m[(bwd[r], bwd[c])]);
    let bi = if bwd.is_empty() {
        b
    } else {
        b.try_inverse()
            .ok_or_else(|| Error::numeric("singular block of the linearization"))?
    };
    Ok((f, bi))
}

/// The block-diagonal part (forward and backward parts) of `m`.
pub(crate) fn block_diagonal_part(m: &DMatrix<f64>, fwd: &[usize], bwd: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for idx in [fwd, bwd] {
        for &r in idx {
            for &c in idx {
                out[(r, c)] = m[(r, c)];
            }
        }
    }
    out
}
