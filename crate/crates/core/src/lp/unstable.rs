//! Unstable foliation `h_u(x, z_u)` from the backward orbit of `x`.

use nalgebra::DVector;

use super::{block_diagonal_part, split_blocks, Direction, LPConfig, Sweep, WeightedSequence};
use crate::blocks::Projection;
use crate::error::{Error, Result};
use crate::map::{DiscreteMap, MapRef};

/// Solves for `q_n = F^n(x + q_0) - F^n(x)`, `n = -N..=0`, with
/// `pi_u q_0 = z_u - x_u`, along the backward orbit of `x`. The
/// linearization is taken along the orbit of `(0, x_c, 0)`.
pub fn solve_unstable_lp(
    map: &dyn DiscreteMap,
    x: &DVector<f64>,
    z_u: &DVector<f64>,
    cfg: &LPConfig,
) -> Result<WeightedSequence> {
    let s = map.structure().clone();
    cfg.check_unstable(&s.envelopes)?;
    let x_u = s.split(x, Projection::U)?;
    if z_u.len() != x_u.len() {
        return Err(Error::input("z_u has the wrong dimension"));
    }
    let n = cfg.truncation as i64;
    let cs = s.indices(Projection::CS)?;
    let u = s.indices(Projection::U)?;
    let a = map.linear_part().clone();

    let mut orbit = vec![x.clone()];
    let mut center = vec![s.project(x, Projection::C)?];
    for _ in 0..n {
        orbit.push(map.inverse(orbit.last().unwrap())?);
        center.push(map.inverse(center.last().unwrap())?);
    }
    orbit.reverse();
    center.reverse();
    // orbit[i] = F^{i - N}(x)

    let mut fwd_lin = Vec::with_capacity(n as usize);
    let mut bwd_lin_inv = Vec::with_capacity(n as usize);
    let mut shift = Vec::with_capacity(n as usize);
    let mut base_nl = Vec::with_capacity(n as usize);
    for i in 0..n as usize {
        let l = block_diagonal_part(&map.jacobian(&center[i])?, &cs, &u);
        let (f, bi) = split_blocks(&l, &cs, &u)?;
        fwd_lin.push(f);
        bwd_lin_inv.push(bi);
        shift.push(&a - &l);
        base_nl.push(map.nonlinear_part(&orbit[i])?);
    }
    let delta = |k: i64, q: &DVector<f64>| -> Result<DVector<f64>> {
        let i = (k + n) as usize;
        Ok(map.nonlinear_part(&(&orbit[i] + q))? - &base_nl[i] + &shift[i] * q)
    };
    let sweep = Sweep {
        lo: -n,
        hi: 0,
        dim: s.dim(),
        fwd_idx: cs,
        bwd_idx: u,
        fwd_init: DVector::zeros(s.dim_s() + s.dim_c()),
        bwd_init: z_u - x_u,
        fwd_lin,
        bwd_lin_inv,
        delta: &delta,
        weight: cfg.rho,
    };
    let r = sweep.solve(cfg.tol, cfg.max_iter, "unstable Lyapunov-Perron sweep")?;
    let env = s.envelopes;
    let ratio = (1.0 + env.margin) / cfg.rho;
    let tail_bound = env.dichotomy_k * r.delta_ratio * r.norm * ratio.powi(n as i32 + 1)
        / ((1.0 - ratio) * (1.0 + env.margin));
    Ok(WeightedSequence {
        direction: Direction::Backward,
        truncation: cfg.truncation,
        entries: r.entries,
        weight: cfg.rho,
        norm: r.norm,
        iterations: r.iterations,
        lipschitz: r.lipschitz,
        tail_bound,
    })
}

/// `h_u(x, z_u) = x_cs + pi_cs q_0`.
pub fn unstable_foliation_h_u(
    map: &dyn DiscreteMap,
    x: &DVector<f64>,
    z_u: &DVector<f64>,
    cfg: &LPConfig,
) -> Result<DVector<f64>> {
    let s = map.structure();
    let x_cs = s.split(x, Projection::CS)?;
    let x_u = s.split(x, Projection::U)?;
    if z_u == &x_u {
        return Ok(x_cs);
    }
    let q = solve_unstable_lp(map, x, z_u, cfg)?;
    Ok(x_cs + s.split(q.zeroth(), Projection::CS)?)
}

/// Evaluable unstable foliation chart of a map.
#[derive(Clone)]
pub struct UnstableFoliation {
    pub map: MapRef,
    pub cfg: LPConfig,
}

impl UnstableFoliation {
    pub fn new(map: MapRef, cfg: LPConfig) -> Result<Self> {
        cfg.check_unstable(&map.structure().envelopes)?;
        Ok(Self { map, cfg })
    }

    /// `h_u(x, z_u)`.
    pub fn h_u(&self, x: &DVector<f64>, z_u: &DVector<f64>) -> Result<DVector<f64>> {
        unstable_foliation_h_u(self.map.as_ref(), x, z_u, &self.cfg)
    }

    /// The point `z_u + h_u(x, z_u)` of the leaf through `x`.
    pub fn leaf_point(&self, x: &DVector<f64>, z_u: &DVector<f64>) -> Result<DVector<f64>> {
        let s = self.map.structure();
        let mut p = s.embed(&self.h_u(x, z_u)?, Projection::CS)?;
        let u = s.u_range();
        p.rows_mut(u.start, u.len()).copy_from(z_u);
        Ok(p)
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
    fn trivial_offset_gives_zero_sequence() {
        let m = catalog::poly3();
        let cfg = LPConfig::unstable_default(&m.structure().envelopes);
        let x = pt(&[0.2, 0.1, 0.1]);
        let q = solve_unstable_lp(&m, &x, &pt(&[0.1]), &cfg).unwrap();
        assert!(q.entries.iter().all(|e| e.norm() == 0.0));
    }

    #[test]
    fn linear_map_closed_form() {
        let m = catalog::lin3();
        let cfg = LPConfig::unstable_default(&m.structure().envelopes);
        let x = pt(&[0.2, 0.1, 0.1]);
        let q = solve_unstable_lp(&m, &x, &pt(&[0.4]), &cfg).unwrap();
        for n in -(cfg.truncation as i64)..=0 {
            let e = 0.3 * 2f64.powi(n as i32);
            assert!((q.at(n) - pt(&[0.0, 0.0, e])).norm() < 1e-15);
        }
        let h = unstable_foliation_h_u(&m, &x, &pt(&[0.4]), &cfg).unwrap();
        assert_eq!(h, pt(&[0.2, 0.1]));
    }
}
