//! Stable foliations: on `X_cs` along the center orbit, the classical
//! constant-coefficient equation on the full space, and the `z_s`-derivative
//! of the classical solution at center points.

use nalgebra::{DMatrix, DVector};

use super::{block_diagonal_part, split_blocks, Direction, LPConfig, Sweep, WeightedSequence};
use crate::blocks::Projection;
use crate::error::{Error, Result};
use crate::map::{DiscreteMap, MapRef};

fn forward_sequence(
    r: super::SweepResult,
    cfg: &LPConfig,
    k: f64,
    margin: f64,
) -> WeightedSequence {
    let ratio = cfg.rho / (1.0 - margin);
    let tail_bound = k * r.delta_ratio * r.norm * ratio.powi(cfg.truncation as i32)
        / ((1.0 - ratio) * (1.0 - margin));
    WeightedSequence {
        direction: Direction::Forward,
        truncation: cfg.truncation,
        entries: r.entries,
        weight: cfg.rho,
        norm: r.norm,
        iterations: r.iterations,
        lipschitz: r.lipschitz,
        tail_bound,
    }
}

/// Solves `p_n = g^n(x_cs + p_0) - g^n(x_cs)`, `n = 0..=N`, with
/// `pi_s p_0 = z_s - x_s`, for `g = pi_cs F` on `X_cs`. Returns the
/// sequence and `h_s(x_cs, z_s) = x_c + pi_c p_0`.
pub fn solve_stable_lp_on_xcs(
    map: &dyn DiscreteMap,
    x_cs: &DVector<f64>,
    z_s: &DVector<f64>,
    cfg: &LPConfig,
) -> Result<(WeightedSequence, DVector<f64>)> {
    let s = map.structure().clone();
    cfg.check_stable(&s.envelopes)?;
    let (ds, dc) = (s.dim_s(), s.dim_c());
    if x_cs.len() != ds + dc || z_s.len() != ds {
        return Err(Error::input("x_cs or z_s has the wrong dimension"));
    }
    let n = cfg.truncation;
    let cs = s.indices(Projection::CS)?;
    let sub = |m: &DMatrix<f64>| DMatrix::from_fn(cs.len(), cs.len(), |r, c| m[(cs[r], cs[c])]);
    let a_cs = sub(map.linear_part());
    let embed = |y: &DVector<f64>| s.embed(y, Projection::CS);
    let g = |y: &DVector<f64>| -> Result<DVector<f64>> { s.split(&map.eval(&embed(y)?)?, Projection::CS) };
    let g_nl = |y: &DVector<f64>| -> Result<DVector<f64>> {
        s.split(&map.nonlinear_part(&embed(y)?)?, Projection::CS)
    };

    let x_s = x_cs.rows(0, ds).into_owned();
    let mut xc_point = x_cs.clone();
    xc_point.rows_mut(0, ds).fill(0.0);
    let mut orbit = vec![x_cs.clone()];
    let mut center = vec![xc_point];
    for _ in 0..n {
        orbit.push(g(orbit.last().unwrap())?);
        center.push(g(center.last().unwrap())?);
    }
    let fwd: Vec<usize> = (0..ds).collect();
    let bwd: Vec<usize> = (ds..ds + dc).collect();
    let mut fwd_lin = Vec::with_capacity(n);
    let mut bwd_lin_inv = Vec::with_capacity(n);
    let mut shift = Vec::with_capacity(n);
    let mut base_nl = Vec::with_capacity(n);
    for i in 0..n {
        let j = sub(&map.jacobian(&embed(&center[i])?)?);
        let l = block_diagonal_part(&j, &fwd, &bwd);
        let (f, bi) = split_blocks(&l, &fwd, &bwd)?;
        fwd_lin.push(f);
        bwd_lin_inv.push(bi);
        shift.push(&a_cs - &l);
        base_nl.push(g_nl(&orbit[i])?);
    }
    let delta = |k: i64, p: &DVector<f64>| -> Result<DVector<f64>> {
        let i = k as usize;
        Ok(g_nl(&(&orbit[i] + p))? - &base_nl[i] + &shift[i] * p)
    };
    let sweep = Sweep {
        lo: 0,
        hi: n as i64,
        dim: ds + dc,
        fwd_idx: fwd,
        bwd_idx: bwd,
        fwd_init: z_s - &x_s,
        bwd_init: DVector::zeros(dc),
        fwd_lin,
        bwd_lin_inv,
        delta: &delta,
        weight: cfg.rho,
    };
    let r = sweep.solve(cfg.tol, cfg.max_iter, "stable Lyapunov-Perron sweep on X_cs")?;
    let seq = forward_sequence(r, cfg, s.envelopes.dichotomy_k, s.envelopes.margin);
    let h = x_cs.rows(ds, dc) + seq.zeroth().rows(ds, dc);
    Ok((seq, h))
}

/// Solves the classical stable equation on the full space with constant
/// coefficients `A_s`, `A_cu` along the forward orbit of `x`.
pub fn solve_classical_lp(
    map: &dyn DiscreteMap,
    x: &DVector<f64>,
    z_s: &DVector<f64>,
    cfg: &LPConfig,
) -> Result<WeightedSequence> {
    let s = map.structure().clone();
    cfg.check_stable(&s.envelopes)?;
    let x_s = s.split(x, Projection::S)?;
    if z_s.len() != x_s.len() {
        return Err(Error::input("z_s has the wrong dimension"));
    }
    let n = cfg.truncation;
    let fwd = s.indices(Projection::S)?;
    let bwd = s.indices(Projection::CU)?;
    let (f, bi) = split_blocks(map.linear_part(), &fwd, &bwd)?;
    let mut orbit = vec![x.clone()];
    for _ in 0..n {
        orbit.push(map.eval(orbit.last().unwrap())?);
    }
    let base_nl: Vec<DVector<f64>> = orbit[..n]
        .iter()
        .map(|y| map.nonlinear_part(y))
        .collect::<Result<_>>()?;
    let delta = |k: i64, p: &DVector<f64>| -> Result<DVector<f64>> {
        let i = k as usize;
        Ok(map.nonlinear_part(&(&orbit[i] + p))? - &base_nl[i])
    };
    let sweep = Sweep {
        lo: 0,
        hi: n as i64,
        dim: s.dim(),
        fwd_idx: fwd,
        bwd_idx: bwd.clone(),
        fwd_init: z_s - x_s,
        bwd_init: DVector::zeros(bwd.len()),
        fwd_lin: vec![f; n],
        bwd_lin_inv: vec![bi; n],
        delta: &delta,
        weight: cfg.rho,
    };
    let r = sweep.solve(cfg.tol, cfg.max_iter, "classical stable Lyapunov-Perron sweep")?;
    Ok(forward_sequence(r, cfg, s.envelopes.dichotomy_k, s.envelopes.margin))
}

/// `∂_{z_s} p_n(x_c, 0)` for `n = 0..=N` (each `d × d_s`), solving the
/// linearized classical equation along the orbit of `(0, x_c, 0)`.
pub fn solve_derivative_lp(
    map: &dyn DiscreteMap,
    x_c: &DVector<f64>,
    cfg: &LPConfig,
) -> Result<Vec<DMatrix<f64>>> {
    let s = map.structure().clone();
    cfg.check_stable(&s.envelopes)?;
    let n = cfg.truncation;
    let x = s.embed(x_c, Projection::C)?;
    let fwd = s.indices(Projection::S)?;
    let bwd = s.indices(Projection::CU)?;
    let a = map.linear_part().clone();
    let (f, bi) = split_blocks(&a, &fwd, &bwd)?;
    let mut orbit = vec![x];
    for _ in 0..n {
        orbit.push(map.eval(orbit.last().unwrap())?);
    }
    let dn: Vec<DMatrix<f64>> = orbit[..n]
        .iter()
        .map(|y| Ok(map.jacobian(y)? - &a))
        .collect::<Result<_>>()?;
    let delta = |k: i64, v: &DVector<f64>| -> Result<DVector<f64>> { Ok(&dn[k as usize] * v) };
    let ds = s.dim_s();
    let mut cols = Vec::with_capacity(ds);
    for j in 0..ds {
        let mut e = DVector::zeros(ds);
        e[j] = 1.0;
        let sweep = Sweep {
            lo: 0,
            hi: n as i64,
            dim: s.dim(),
            fwd_idx: fwd.clone(),
            bwd_idx: bwd.clone(),
            fwd_init: e,
            bwd_init: DVector::zeros(bwd.len()),
            fwd_lin: vec![f.clone(); n],
            bwd_lin_inv: vec![bi.clone(); n],
            delta: &delta,
            weight: cfg.rho,
        };
        cols.push(sweep.solve(cfg.tol, cfg.max_iter, "derivative Lyapunov-Perron sweep")?.entries);
    }
    Ok((0..=n)
        .map(|k| DMatrix::from_fn(s.dim(), ds, |r, c| cols[c][k][r]))
        .collect())
}

/// `∂_{z_s} p_0(x_c, 0)`: a `d × d_s` frame spanning the tangent space of
/// the stable leaf through `(0, x_c, 0)`.
pub fn stable_tangent_frame(
    map: &dyn DiscreteMap,
    x_c: &DVector<f64>,
    cfg: &LPConfig,
) -> Result<DMatrix<f64>> {
    Ok(solve_derivative_lp(map, x_c, cfg)?.swap_remove(0))
}

/// Evaluable stable foliation chart of `g = pi_cs F` on `X_cs`.
#[derive(Clone)]
pub struct StableFoliation {
    pub map: MapRef,
    pub cfg: LPConfig,
}

impl StableFoliation {
    pub fn new(map: MapRef, cfg: LPConfig) -> Result<Self> {
        cfg.check_stable(&map.structure().envelopes)?;
        Ok(Self { map, cfg })
    }

    /// `h_s(x_cs, z_s)`.
    pub fn h_s(&self, x_cs: &DVector<f64>, z_s: &DVector<f64>) -> Result<DVector<f64>> {
        let ds = self.map.structure().dim_s();
        if x_cs.rows(0, ds) == z_s.rows(0, ds) {
            return Ok(x_cs.rows(ds, x_cs.len() - ds).into_owned());
        }
        Ok(solve_stable_lp_on_xcs(self.map.as_ref(), x_cs, z_s, &self.cfg)?.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn pt(v: &[f64]) -> DVector<f64> {
        DVector::from_vec(v.to_vec())
    }

    #[test]
    fn linear_map_closed_forms() {
        let m = catalog::lin3();
        let cfg = LPConfig::stable_default(&m.structure().envelopes);
        let (seq, h) = solve_stable_lp_on_xcs(&m, &pt(&[0.2, 0.1]), &pt(&[-0.1]), &cfg).unwrap();
        assert_eq!(h, pt(&[0.1]));
        assert!((seq.at(3) - pt(&[-0.3 * 0.125, 0.0])).norm() < 1e-16);
        let p = solve_classical_lp(&m, &pt(&[0.2, 0.1, 0.3]), &pt(&[0.0]), &cfg).unwrap();
        assert!((p.at(2) - pt(&[-0.05, 0.0, 0.0])).norm() < 1e-16);
        let d = stable_tangent_frame(&m, &pt(&[0.3]), &cfg).unwrap();
        assert_eq!(d, DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]));
    }

    #[test]
    fn derivative_at_origin_is_identity() {
        let m = catalog::poly3();
        let cfg = LPConfig::stable_default(&m.structure().envelopes);
        let d = stable_tangent_frame(&m, &pt(&[0.0]), &cfg).unwrap();
        assert_eq!(d, DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]));
    }
}
