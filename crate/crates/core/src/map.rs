//! Maps `F(x) = A x + f(x)` and the trait every map-like object implements.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt::Debug;
use std::sync::Arc;

use crate::blocks::SpectralStructure;
use crate::cutoff::{cutoff, cutoff_derivative};
use crate::error::{Error, Result};
use crate::numeric::{fd_jacobian, newton_solve};

/// Residual tolerance for inverse evaluation by Newton's method.
pub const INVERSE_TOL: f64 = 1e-12;

/// A diffeomorphism of `R^d` with a fixed point at the origin.
pub trait DiscreteMap: Send + Sync {
    fn structure(&self) -> &SpectralStructure;

    /// Linear part `A = DF(0)`.
    fn linear_part(&self) -> &DMatrix<f64>;

    /// Inverse of the linear part, used as Newton predictor.
    fn linear_inverse(&self) -> &DMatrix<f64>;

    fn eval(&self, x: &DVector<f64>) -> Result<DVector<f64>>;

    /// Nonlinear part `F(x) - A x`. Overriding it avoids cancellation far
    /// from the origin, where `F` is linear.
    fn nonlinear_part(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.eval(x)? - self.linear_part() * x)
    }

    /// Jacobian `DF(x)`; central differences unless overridden.
    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        fd_jacobian(|y| self.eval(y), x)
    }

    /// `F(x)` and `DF(x)` together; overridden where they share work.
    fn eval_and_jacobian(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        Ok((self.eval(x)?, self.jacobian(x)?))
    }

    /// `F^{-1}(y)` by damped Newton from the linear predictor `A^{-1} y`.
    fn inverse(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let guess = self.linear_inverse() * y;
        newton_solve(
            |x| self.eval(x),
            |x| self.jacobian(x),
            y,
            guess,
            INVERSE_TOL,
            "inverse map",
        )
    }

    /// `F^n(x)` for any integer `n`.
    fn iterate(&self, x: &DVector<f64>, n: i64) -> Result<DVector<f64>> {
        let mut y = x.clone();
        if n >= 0 {
            for _ in 0..n {
                y = self.eval(&y)?;
            }
        } else {
            for _ in 0..(-n) {
                y = self.inverse(&y)?;
            }
        }
        Ok(y)
    }

    fn dim(&self) -> usize {
        self.structure().dim()
    }
}

/// Shared handle to a map.
pub type MapRef = Arc<dyn DiscreteMap>;

/// Nonlinear part `f` before the radial cutoff is applied.
pub trait Nonlinearity: Send + Sync + Debug {
    fn eval(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Analytic Jacobian if available.
    fn jacobian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }
}

/// One monomial `coefficient * prod x_j^{e_j}` contributing to `f_target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub target: usize,
    pub exponents: Vec<u32>,
    pub coefficient: f64,
}

/// Polynomial nonlinearity given as a list of monomials.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    pub dim: usize,
    pub terms: Vec<PolyTerm>,
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<PolyTerm>) -> Result<Self> {
        for t in &terms {
            if t.target >= dim || t.exponents.len() != dim {
                return Err(Error::input(format!(
                    "polynomial term {t:?} does not match dimension {dim}"
                )));
            }
            if t.exponents.iter().sum::<u32>() < 2 && t.coefficient != 0.0 {
                return Err(Error::input(
                    "nonlinearity terms must have total degree at least 2",
                ));
            }
        }
        Ok(Self { dim, terms })
    }

    /// Adds `coefficient * x^exponents` to component `target`.
    pub fn term(mut self, target: usize, exponents: &[u32], coefficient: f64) -> Self {
        self.terms.push(PolyTerm {
            target,
            exponents: exponents.to_vec(),
            coefficient,
        });
        self
    }
}

fn monomial(x: &DVector<f64>, e: &[u32]) -> f64 {
    e.iter()
        .enumerate()
        .fold(1.0, |acc, (j, &k)| acc * x[j].powi(k as i32))
}

impl Nonlinearity for Polynomial {
    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for t in &self.terms {
            out[t.target] += t.coefficient * monomial(x, &t.exponents);
        }
        out
    }

    fn jacobian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let mut j = DMatrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            for (v, &k) in t.exponents.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                let mut e = t.exponents.clone();
                e[v] -= 1;
                j[(t.target, v)] += t.coefficient * k as f64 * monomial(x, &e);
            }
        }
        Some(j)
    }
}

/// The zero nonlinearity.
#[derive(Debug, Clone, Copy)]
pub struct Zero(pub usize);

impl Nonlinearity for Zero {
    fn eval(&self, _x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.0)
    }
    fn jacobian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(DMatrix::zeros(self.0, self.0))
    }
}

/// Hölder data of `Df`: exponent, sup bound and Hölder constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderData {
    pub alpha: f64,
    pub delta_f: f64,
    pub m: f64,
}

/// Normalizations a model is declared to satisfy already.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizationFlags {
    /// The center manifold is the center subspace.
    pub center_is_xc: bool,
    /// `DF(x_c)` is block-diagonal for points on the center subspace.
    pub block_diagonal_on_xc: bool,
    /// The center-stable subspace is invariant.
    pub cs_invariant: bool,
    /// The center-unstable subspace is invariant.
    pub cu_invariant: bool,
    /// Stable leaves inside the center-stable subspace are `{x_c = const}`.
    pub stable_foliation_flat: bool,
}

/// `F(x) = A x + rho(|x|) f(x)` with block data and Hölder constants.
#[derive(Debug, Clone)]
pub struct MapModel {
    pub name: String,
    structure: SpectralStructure,
    a: DMatrix<f64>,
    a_inv: DMatrix<f64>,
    nonlinearity: Arc<dyn Nonlinearity>,
    pub holder: HolderData,
    /// Outer cutoff radius `R`; `f` vanishes for `|x| >= R`.
    pub radius: f64,
    pub flags: NormalizationFlags,
}

impl MapModel {
    pub fn new(
        name: impl Into<String>,
        structure: SpectralStructure,
        a: DMatrix<f64>,
        nonlinearity: Arc<dyn Nonlinearity>,
        holder: HolderData,
        radius: f64,
        flags: NormalizationFlags,
    ) -> Result<Self> {
        let d = structure.dim();
        if a.nrows() != d || a.ncols() != d {
            return Err(Error::input(format!(
                "linear part is {}x{}, structure has dimension {d}",
                a.nrows(),
                a.ncols()
            )));
        }
        if !(radius > 0.0) {
            return Err(Error::input("radius must be positive"));
        }
        let a_inv = a
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::input("linear part is singular"))?;
        if nonlinearity.eval(&DVector::zeros(d)).len() != d {
            return Err(Error::input("nonlinearity has the wrong output dimension"));
        }
        Ok(Self {
            name: name.into(),
            structure,
            a,
            a_inv,
            nonlinearity,
            holder,
            radius,
            flags,
        })
    }

    /// Nonlinear part `f` after the cutoff.
    pub fn nonlinear(&self, x: &DVector<f64>) -> DVector<f64> {
        let r = x.norm();
        let rho = cutoff(r, self.radius);
        if rho == 0.0 {
            return DVector::zeros(x.len());
        }
        self.nonlinearity.eval(x) * rho
    }

    /// Jacobian of the cut-off nonlinear part.
    pub fn nonlinear_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let d = x.len();
        let r = x.norm();
        let rho = cutoff(r, self.radius);
        if rho == 0.0 {
            return Ok(DMatrix::zeros(d, d));
        }
        let dp = match self.nonlinearity.jacobian(x) {
            Some(j) => j,
            None => fd_jacobian(|y| Ok(self.nonlinearity.eval(y)), x)?,
        };
        let mut j = dp * rho;
        let drho = cutoff_derivative(r, self.radius);
        if drho != 0.0 && r > 0.0 {
            let p = self.nonlinearity.eval(x);
            j += p * (x.transpose() * (drho / r));
        }
        Ok(j)
    }

    /// Finite-difference Jacobian of the full map, ignoring any analytic form.
    pub fn fd_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        fd_jacobian(|y| self.eval(y), x)
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.nonlinearity
            .jacobian(&DVector::zeros(self.structure.dim()))
            .is_some()
    }
}

impl DiscreteMap for MapModel {
    fn structure(&self) -> &SpectralStructure {
        &self.structure
    }

    fn linear_part(&self) -> &DMatrix<f64> {
        &self.a
    }

    fn linear_inverse(&self) -> &DMatrix<f64> {
        &self.a_inv
    }

    fn eval(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let y = &self.a * x + self.nonlinear(x);
        if y.iter().all(|v| v.is_finite()) {
            Ok(y)
        } else {
            Err(Error::numeric(format!(
                "map `{}` produced a non-finite value",
                self.name
            )))
        }
    }

    fn nonlinear_part(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.nonlinear(x))
    }

    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(&self.a + self.nonlinear_jacobian(x)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::{Block, BlockClass, Envelopes};

    fn structure() -> SpectralStructure {
        SpectralStructure::from_blocks(
            &[
                Block { size: 1, modulus: 0.5, class: BlockClass::Stable },
                Block { size: 1, modulus: 1.0, class: BlockClass::Center },
                Block { size: 1, modulus: 2.0, class: BlockClass::Unstable },
            ],
            Envelopes {
                lambda_s_minus: 0.4,
                lambda_s_plus: 0.6,
                lambda_u_minus: 1.5,
                lambda_u_plus: 3.0,
                margin: 0.1,
                dichotomy_k: 1.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn polynomial_jacobian_matches_differences() {
        let p = Polynomial::new(3, vec![])
            .unwrap()
            .term(0, &[1, 1, 0], 0.05)
            .term(0, &[0, 0, 2], 0.05)
            .term(1, &[1, 0, 1], 0.05);
        let x = DVector::from_vec(vec![0.1, 0.2, 0.1]);
        let a = p.jacobian(&x).unwrap();
        let b = fd_jacobian(|y| Ok(p.eval(y)), &x).unwrap();
        assert!((a - b).abs().max() < 1e-10);
    }

    #[test]
    fn inverse_round_trip_through_cutoff_annulus() {
        let s = structure();
        let p = Polynomial::new(3, vec![])
            .unwrap()
            .term(0, &[1, 1, 0], 0.05)
            .term(0, &[0, 0, 2], 0.05);
        let m = MapModel::new(
            "t",
            s.clone(),
            s.diagonal_matrix(),
            Arc::new(p),
            HolderData { alpha: 1.0, delta_f: 0.2, m: 1.0 },
            1.0,
            NormalizationFlags::default(),
        )
        .unwrap();
        let x = DVector::from_vec(vec![0.4, 0.3, 0.5]);
        let y = m.eval(&x).unwrap();
        let back = m.inverse(&y).unwrap();
        assert!((back - x).norm() < 1e-13);
    }
}
