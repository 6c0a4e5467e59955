//! Cocycle reduction `Θ(x) = (x_cs, P_u(x_cs) x_u)`.

use nalgebra::{DMatrix, DVector};

use super::{max_until_nonzero, LinearizeConfig};
use crate::blocks::SpectralStructure;
use crate::cocycle::{CenterCocycle, TransferEngine};
use crate::error::{Error, Result};
use crate::map::MapRef;
use crate::pipeline::{Chebyshev, Transform, FLAG_TOL};

/// Largest accepted condition number of `P_u`.
pub const MAX_CONDITION: f64 = 1e8;

/// `Θ` built from the transfer map `P_u` of the unstable cocycle. As a
/// [`Transform`] it maps the reduced coordinates of `F̃` to those of `F̂`,
/// so `forward` is `Θ^{-1}`.
pub struct CocycleReduction {
    structure: SpectralStructure,
    cocycle: CenterCocycle,
    engine: Option<TransferEngine>,
    table: Option<Chebyshev>,
    deviation: f64,
    identity: bool,
}

impl CocycleReduction {
    /// Builds `P_u` on `model`, tabulated on `[-w, w]^{d_cs}` unless it is
    /// the identity on the check lattice.
    pub fn new(model: MapRef, cfg: &LinearizeConfig) -> Result<Self> {
        let structure = model.structure().clone();
        let cocycle = CenterCocycle::unstable(model.clone());
        if structure.dim_u() == 0 {
            return Ok(Self {
                structure,
                cocycle,
                engine: None,
                table: None,
                deviation: 0.0,
                identity: true,
            });
        }
        let engine = TransferEngine::new(model, cfg.transfer)?;
        let du = structure.dim_u();
        let eye = DMatrix::<f64>::identity(du, du);
        let dcs = structure.cs_range().len();
        let grid = cfg.check_grid(dcs);
        let deviation = max_until_nonzero(&grid, |b| Ok((engine.pu(b)?.as_ref() - &eye).abs().max()))?;
        let identity = deviation <= FLAG_TOL;
        let mut r = Self {
            structure,
            cocycle,
            engine: Some(engine),
            table: None,
            deviation,
            identity,
        };
        if !identity && cfg.transfer_degree > 0 {
            let engine = r.engine.as_ref().expect("engine present");
            let table = Chebyshev::fit(
                |b| Ok(DVector::from_column_slice(engine.pu(b)?.as_slice())),
                dcs,
                du * du,
                cfg.transfer_degree,
                cfg.transfer_half_width,
            )?;
            r.table = Some(table);
        }
        Ok(r)
    }

    /// `max |P_u - I|` on the check lattice (early exit).
    pub fn deviation(&self) -> f64 {
        self.deviation
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// Degree of the `P_u` table, `0` without one.
    pub fn table_degree(&self) -> usize {
        self.table.as_ref().map(|t| t.degree()).unwrap_or(0)
    }

    pub fn engine(&self) -> Option<&TransferEngine> {
        self.engine.as_ref()
    }

    /// The unstable cocycle `A_u(x_cs)` of the model.
    pub fn cocycle(&self) -> &CenterCocycle {
        &self.cocycle
    }

    /// `P_u(x_cs)` without the table.
    pub fn pu_pointwise(&self, x_cs: &DVector<f64>) -> Result<DMatrix<f64>> {
        let du = self.structure.dim_u();
        match &self.engine {
            Some(e) if !self.identity => Ok(e.pu(x_cs)?.as_ref().clone()),
            _ => Ok(DMatrix::identity(du, du)),
        }
    }

    /// `P_u(x_cs)`, from the table inside its cube.
    pub fn pu(&self, x_cs: &DVector<f64>) -> Result<DMatrix<f64>> {
        let du = self.structure.dim_u();
        match &self.table {
            Some(t) if t.contains(x_cs) => Ok(DMatrix::from_column_slice(du, du, t.eval(x_cs).as_slice())),
            _ => self.pu_pointwise(x_cs),
        }
    }

    /// `P_u(x_cs)^{-1}`; fails when `P_u` is too badly conditioned.
    pub fn pu_inverse(&self, x_cs: &DVector<f64>) -> Result<DMatrix<f64>> {
        let p = self.pu(x_cs)?;
        if self.identity {
            return Ok(p);
        }
        let sv = p.clone().svd(false, false).singular_values;
        let cond = sv.max() / sv.min();
        if !(cond <= MAX_CONDITION) {
            return Err(Error::Inadmissible {
                name: "cond(P_u)".into(),
                value: cond,
                reason: format!("transfer map too badly conditioned (limit {MAX_CONDITION:e})"),
            });
        }
        p.try_inverse().ok_or_else(|| Error::numeric("singular transfer map"))
    }

    /// `Θ(x) = (x_cs, P_u(x_cs) x_u)`.
    pub fn theta(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.fiber_map(x, false)
    }

    /// `Θ^{-1}(x) = (x_cs, P_u(x_cs)^{-1} x_u)`.
    pub fn theta_inverse(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.fiber_map(x, true)
    }

    fn fiber_map(&self, x: &DVector<f64>, inverse: bool) -> Result<DVector<f64>> {
        if self.identity {
            return Ok(x.clone());
        }
        let (cs, u) = (self.structure.cs_range(), self.structure.u_range());
        let b = x.rows(cs.start, cs.len()).into_owned();
        let m = if inverse { self.pu_inverse(&b)? } else { self.pu(&b)? };
        let mut y = x.clone();
        y.rows_mut(u.start, u.len()).copy_from(&(m * x.rows(u.start, u.len())));
        Ok(y)
    }
}

impl Transform for CocycleReduction {
    fn name(&self) -> &str {
        "cocycle_reduction"
    }

    fn forward(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.theta_inverse(x)
    }

    fn inverse(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.theta(y)
    }

    fn is_identity(&self) -> bool {
        self.identity
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use std::sync::Arc;

    #[test]
    fn identity_when_generator_depends_on_center_only() {
        let r = CocycleReduction::new(Arc::new(catalog::poly3()), &LinearizeConfig::default()).unwrap();
        assert!(r.is_identity());
        let x = DVector::from_vec(vec![0.1, 0.2, 0.3]);
        assert_eq!(r.theta(&x).unwrap(), x);
    }

    #[test]
    fn twou4_reduction_inverts_and_fixes_the_center_manifold() {
        let cfg = LinearizeConfig::default();
        let r = CocycleReduction::new(Arc::new(catalog::twou4()), &cfg).unwrap();
        assert!(!r.is_identity());
        assert_eq!(r.table_degree(), 0);
        let x = DVector::from_vec(vec![0.1, -0.15, 0.05, 0.2]);
        assert!((r.theta_inverse(&r.theta(&x).unwrap()).unwrap() - &x).norm() < 1e-14);
        let on_center = DVector::from_vec(vec![0.0, 0.1, 0.05, 0.2]);
        assert!((r.theta(&on_center).unwrap() - &on_center).norm() < 1e-12);
    }

    #[test]
    fn table_reproduces_a_smooth_transfer_map() {
        let cfg = LinearizeConfig { transfer_degree: 10, ..LinearizeConfig::default() };
        let r = CocycleReduction::new(Arc::new(catalog::twou4()), &cfg).unwrap();
        assert_eq!(r.table_degree(), 10);
        // Along X_c the transfer map is smooth, so the table is accurate there.
        for c in [-0.2, 0.05, 0.17] {
            let b = DVector::from_vec(vec![0.0, c]);
            let err = (r.pu(&b).unwrap() - r.pu_pointwise(&b).unwrap()).abs().max();
            assert!(err < 1e-6, "{c} {err}");
        }
    }
}
