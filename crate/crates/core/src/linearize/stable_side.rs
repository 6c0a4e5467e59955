//! Stable-side conjugacy `ψ` of `g = π_cs F4` on `X_cs` to
//! `ℓ(y) = (A_s(y_c) y_s, g_c(y_c))`.
//!
//! `ψ(y) = lim g^{-n}(ℓ^n(y))` and `ψ^{-1}(x) = lim ℓ^{-n}(g^n(x))`; both
//! keep the center coordinate because `π_c g` depends on `x_c` only once the
//! stable foliation is straightened.

use nalgebra::{DMatrix, DVector};

use super::{max_until_nonzero, run_limit, LimitTrace, LinearizeConfig};
use crate::blocks::{sub_matrix, Projection, SpectralStructure};
use crate::error::{Error, Result};
use crate::map::MapRef;
use crate::pipeline::FLAG_TOL;

pub struct StableSideConjugacy {
    model: MapRef,
    structure: SpectralStructure,
    cfg: LinearizeConfig,
    nonlinearity: f64,
    identity: bool,
}

impl StableSideConjugacy {
    /// Records `max |g(x_cs) - ℓ(x_cs)|` on the check lattice; the stage is
    /// the identity when it vanishes.
    pub fn new(model: MapRef, cfg: &LinearizeConfig) -> Result<Self> {
        let structure = model.structure().clone();
        let mut c = Self {
            model,
            structure,
            cfg: *cfg,
            nonlinearity: 0.0,
            identity: true,
        };
        if c.structure.dim_s() == 0 {
            return Ok(c);
        }
        let grid = cfg.check_grid(c.structure.cs_range().len());
        c.nonlinearity = max_until_nonzero(&grid, |x| Ok((c.g(x)? - c.linear_step(x)?).norm()))?;
        c.identity = c.nonlinearity <= FLAG_TOL;
        Ok(c)
    }

    /// Variant that always evaluates the limits, used for one-dimensional
    /// demonstrations where the identity test is not wanted.
    pub fn forced(model: MapRef, cfg: &LinearizeConfig) -> Result<Self> {
        let mut c = Self::new(model, cfg)?;
        c.identity = c.structure.dim_s() == 0;
        Ok(c)
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// `max |g(x_cs) - ℓ(x_cs)|` on the check lattice (early exit).
    pub fn nonlinearity(&self) -> f64 {
        self.nonlinearity
    }

    fn embed_cs(&self, x_cs: &DVector<f64>) -> Result<DVector<f64>> {
        self.structure.embed(x_cs, Projection::CS)
    }

    /// `g(x_cs) = π_cs F4(x_cs, 0)`.
    pub fn g(&self, x_cs: &DVector<f64>) -> Result<DVector<f64>> {
        self.structure.split(&self.model.eval(&self.embed_cs(x_cs)?)?, Projection::CS)
    }

    pub fn g_inverse(&self, x_cs: &DVector<f64>) -> Result<DVector<f64>> {
        self.structure.split(&self.model.inverse(&self.embed_cs(x_cs)?)?, Projection::CS)
    }

    fn on_center(&self, x_c: &DVector<f64>) -> Result<DVector<f64>> {
        self.structure.embed(x_c, Projection::C)
    }

    /// `A_s(x_c)`: the stable block of `DF4(x_c)`.
    pub fn a_s(&self, x_c: &DVector<f64>) -> Result<DMatrix<f64>> {
        let j = self.model.jacobian(&self.on_center(x_c)?)?;
        let r = self.structure.s_range();
        Ok(sub_matrix(&j, r.clone(), r))
    }

    fn center_step(&self, x_c: &DVector<f64>, forward: bool) -> Result<DVector<f64>> {
        let p = self.on_center(x_c)?;
        let y = if forward { self.model.eval(&p)? } else { self.model.inverse(&p)? };
        self.structure.split(&y, Projection::C)
    }

    fn split(&self, y: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let ds = self.structure.dim_s();
        (y.rows(0, ds).into_owned(), y.rows(ds, y.len() - ds).into_owned())
    }

    fn join(&self, ys: &DVector<f64>, yc: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(ys.len() + yc.len());
        y.rows_mut(0, ys.len()).copy_from(ys);
        y.rows_mut(ys.len(), yc.len()).copy_from(yc);
        y
    }

    /// `ℓ(y) = (A_s(y_c) y_s, g_c(y_c))`.
    pub fn linear_step(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let (ys, yc) = self.split(y);
        Ok(self.join(&(self.a_s(&yc)? * ys), &self.center_step(&yc, true)?))
    }

    /// `ℓ^{-1}(y) = (A_s(g_c^{-1} y_c)^{-1} y_s, g_c^{-1}(y_c))`.
    pub fn linear_step_inverse(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let (ys, yc) = self.split(y);
        let pc = self.center_step(&yc, false)?;
        let a = self
            .a_s(&pc)?
            .try_inverse()
            .ok_or_else(|| Error::numeric("singular stable block"))?;
        Ok(self.join(&(a * ys), &pc))
    }

    fn check(&self, what: &str, trace: &LimitTrace) -> Result<()> {
        if trace.converged {
            Ok(())
        } else {
            Err(Error::NoConvergence {
                what: what.into(),
                iterations: trace.steps(),
                residual: trace.differences.last().cloned().unwrap_or(f64::NAN),
            })
        }
    }

    /// `ψ(y)` with its trace.
    pub fn psi_traced(&self, y: &DVector<f64>) -> Result<(DVector<f64>, LimitTrace)> {
        if self.identity {
            return Ok((y.clone(), LimitTrace::default()));
        }
        let mut l = y.clone();
        let out = run_limit(y.clone(), self.cfg.horizon, self.cfg.tol, |n| {
            l = self.linear_step(&l)?;
            let mut x = l.clone();
            for _ in 0..n {
                x = self.g_inverse(&x)?;
            }
            Ok(x)
        })?;
        self.check("stable-side forward limit", &out.1)?;
        Ok(out)
    }

    pub fn psi(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.psi_traced(y)?.0)
    }

    /// `ψ^{-1}(x)` with its trace.
    pub fn psi_inverse_traced(&self, x: &DVector<f64>) -> Result<(DVector<f64>, LimitTrace)> {
        if self.identity {
            return Ok((x.clone(), LimitTrace::default()));
        }
        let mut gx = x.clone();
        let out = run_limit(x.clone(), self.cfg.horizon, self.cfg.tol, |n| {
            gx = self.g(&gx)?;
            let mut y = gx.clone();
            for _ in 0..n {
                y = self.linear_step_inverse(&y)?;
            }
            Ok(y)
        })?;
        self.check("stable-side mirrored limit", &out.1)?;
        Ok(out)
    }

    pub fn psi_inverse(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.psi_inverse_traced(x)?.0)
    }

    /// `g^{-n}(ℓ^n(y))` for a fixed `n`, without a convergence test.
    pub fn psi_truncated(&self, y: &DVector<f64>, n: usize) -> Result<DVector<f64>> {
        let mut x = y.clone();
        for _ in 0..n {
            x = self.linear_step(&x)?;
        }
        for _ in 0..n {
            x = self.g_inverse(&x)?;
        }
        Ok(x)
    }

    /// `ℓ^{-n}(g^n(x))` for a fixed `n`, without a convergence test. Uses
    /// forward iterates of `g` only, so it stays accurate near the origin.
    pub fn psi_inverse_truncated(&self, x: &DVector<f64>, n: usize) -> Result<DVector<f64>> {
        let mut y = x.clone();
        for _ in 0..n {
            y = self.g(&y)?;
        }
        for _ in 0..n {
            y = self.linear_step_inverse(&y)?;
        }
        Ok(y)
    }
}
