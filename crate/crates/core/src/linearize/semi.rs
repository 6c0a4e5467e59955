//! Semi-decoupling `H(x) = (h_u(x_cs, x_u), x_u)` by the unstable foliation.

use nalgebra::DVector;

use super::{max_until_nonzero, LinearizeConfig};
use crate::blocks::SpectralStructure;
use crate::error::Result;
use crate::lp::{LPConfig, UnstableFoliation};
use crate::map::MapRef;
use crate::pipeline::{Transform, FLAG_TOL};

/// `H` sends `(x_cs, x_u)` to the point with unstable coordinate `x_u` on
/// the unstable leaf through `x_cs`; `H^{-1}(x) = (h_u(x, 0), x_u)` follows
/// the leaf through `x` down to `X_cs`.
pub struct SemiDecoupling {
    foliation: UnstableFoliation,
    structure: SpectralStructure,
    flatness: f64,
    identity: bool,
}

impl SemiDecoupling {
    /// Builds the chart of `model` and records `max |h_u(x, 0) - x_cs|` on
    /// the check lattice; below the flag tolerance `H` is the identity.
    pub fn new(model: MapRef, lp: LPConfig, cfg: &LinearizeConfig) -> Result<Self> {
        let structure = model.structure().clone();
        if structure.dim_u() == 0 {
            return Ok(Self {
                foliation: UnstableFoliation { map: model, cfg: lp },
                structure,
                flatness: 0.0,
                identity: true,
            });
        }
        let foliation = UnstableFoliation::new(model, lp)?;
        let cs = structure.cs_range();
        let zero = DVector::zeros(structure.dim_u());
        let grid = cfg.check_grid(structure.dim());
        let flatness = max_until_nonzero(&grid, |x| {
            let foot = foliation.h_u(x, &zero)?;
            Ok((foot - x.rows(cs.start, cs.len())).norm())
        })?;
        Ok(Self {
            foliation,
            structure,
            flatness,
            identity: flatness <= FLAG_TOL,
        })
    }

    pub fn foliation(&self) -> &UnstableFoliation {
        &self.foliation
    }

    /// `max |h_u(x, 0) - x_cs|` on the check lattice (early exit once the
    /// stage is known to be needed).
    pub fn flatness(&self) -> f64 {
        self.flatness
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// `h_u(x, 0)`: where the unstable leaf through `x` meets `X_cs`.
    pub fn foot(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let cs = self.structure.cs_range();
        if self.identity {
            return Ok(x.rows(cs.start, cs.len()).into_owned());
        }
        self.foliation.h_u(x, &DVector::zeros(self.structure.dim_u()))
    }

    /// `H(x_cs, x_u)`.
    pub fn lift(&self, x_cs: &DVector<f64>, x_u: &DVector<f64>) -> Result<DVector<f64>> {
        let (cs, u) = (self.structure.cs_range(), self.structure.u_range());
        let mut base = DVector::zeros(self.structure.dim());
        base.rows_mut(cs.start, cs.len()).copy_from(x_cs);
        if self.identity {
            base.rows_mut(u.start, u.len()).copy_from(x_u);
            return Ok(base);
        }
        self.foliation.leaf_point(&base, x_u)
    }
}

impl Transform for SemiDecoupling {
    fn name(&self) -> &str {
        "semi_decoupling"
    }

    fn forward(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let (cs, u) = (self.structure.cs_range(), self.structure.u_range());
        self.lift(&x.rows(cs.start, cs.len()).into_owned(), &x.rows(u.start, u.len()).into_owned())
    }

    fn inverse(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let cs = self.structure.cs_range();
        let mut x = y.clone();
        x.rows_mut(cs.start, cs.len()).copy_from(&self.foot(y)?);
        Ok(x)
    }

    fn is_identity(&self) -> bool {
        self.identity
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::map::DiscreteMap;
    use crate::pipeline::ConjugatedMap;
    use std::sync::Arc;

    fn build(m: MapRef) -> SemiDecoupling {
        let cfg = LinearizeConfig::default();
        let lp = cfg.unstable_lp(m.as_ref());
        SemiDecoupling::new(m, lp, &cfg).unwrap()
    }

    #[test]
    fn linear_map_has_flat_foliation() {
        let h = build(Arc::new(catalog::lin3()));
        assert!(h.is_identity());
        assert_eq!(h.flatness(), 0.0);
    }

    #[test]
    fn poly3_semi_decoupled_map_preserves_fibers() {
        let m: MapRef = Arc::new(catalog::poly3());
        let h = Arc::new(build(m.clone()));
        assert!(!h.is_identity());
        let fhat = ConjugatedMap::new(m.clone(), h.clone());
        for x in crate::pipeline::lattice(3, 4, 0.2) {
            // H fixes X_cs and inverts.
            let base = DVector::from_vec(vec![x[0], x[1], 0.0]);
            assert_eq!(h.forward(&base).unwrap(), base);
            assert!((h.inverse(&h.forward(&x).unwrap()).unwrap() - &x).norm() < 1e-8);
            // pi_cs F̂(x) = g(x_cs).
            let y = fhat.eval(&x).unwrap();
            let g = m.eval(&base).unwrap();
            assert!((y.rows(0, 2) - g.rows(0, 2)).norm() < 1e-8, "{x}");
        }
    }
}
