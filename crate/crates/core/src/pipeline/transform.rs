//! Invertible coordinate changes, their compositions, and maps written in
//! transformed coordinates.
//!
//! A [`Transform`] `T` maps new coordinates to the coordinates of the
//! previous model, so the model in new coordinates is `T^{-1} ∘ F ∘ T`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::blocks::SpectralStructure;
use crate::error::{Error, Result};
use crate::map::{DiscreteMap, MapRef};
use crate::numeric::fd_jacobian;

/// An invertible change of coordinates (new → old).
pub trait Transform: Send + Sync {
    fn name(&self) -> &str;

    /// New coordinates to old coordinates.
    fn forward(&self, x: &DVector<f64>) -> Result<DVector<f64>>;

    /// Old coordinates to new coordinates.
    fn inverse(&self, y: &DVector<f64>) -> Result<DVector<f64>>;

    /// `forward(x) - x`, computed without cancellation where possible.
    fn forward_correction(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.forward(x)? - x)
    }

    /// `inverse(y) - y`, computed without cancellation where possible.
    fn inverse_correction(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.inverse(y)? - y)
    }

    /// Jacobian of [`Transform::forward`].
    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        fd_jacobian(|y| self.forward(y), x)
    }

    /// Jacobian of [`Transform::forward`] at `x`, given `forward(x)`.
    fn jacobian_with_forward(&self, x: &DVector<f64>, _fx: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.jacobian(x)
    }

    /// Jacobian of [`Transform::inverse`] at `y`.
    fn inverse_jacobian(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.jacobian(&self.inverse(y)?)?
            .try_inverse()
            .ok_or_else(|| Error::numeric("singular transform Jacobian"))
    }

    fn is_identity(&self) -> bool {
        false
    }
}

/// Shared handle to a transform.
pub type TransformRef = Arc<dyn Transform>;

/// The identity change of coordinates.
#[derive(Debug, Clone)]
pub struct IdentityTransform {
    pub dim: usize,
}

impl Transform for IdentityTransform {
    fn name(&self) -> &str {
        "identity"
    }

    fn forward(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(x.clone())
    }

    fn inverse(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(y.clone())
    }

    fn forward_correction(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(DVector::zeros(x.len()))
    }

    fn inverse_correction(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(DVector::zeros(y.len()))
    }

    fn jacobian(&self, _x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::identity(self.dim, self.dim))
    }

    fn inverse_jacobian(&self, _y: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::identity(self.dim, self.dim))
    }

    fn is_identity(&self) -> bool {
        true
    }
}

/// Composition `T_k ∘ ... ∘ T_1`: `forward` applies `T_1` first.
#[derive(Clone)]
pub struct TransformChain {
    name: String,
    dim: usize,
    stages: Vec<TransformRef>,
}

impl TransformChain {
    /// Builds the chain from stages in application order of `forward`;
    /// identity stages are dropped.
    pub fn new(name: impl Into<String>, dim: usize, stages: Vec<TransformRef>) -> Self {
        Self {
            name: name.into(),
            dim,
            stages: stages.into_iter().filter(|s| !s.is_identity()).collect(),
        }
    }

    pub fn stages(&self) -> &[TransformRef] {
        &self.stages
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl Transform for TransformChain {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let mut y = x.clone();
        for s in &self.stages {
            y = s.forward(&y)?;
        }
        Ok(y)
    }

    fn inverse(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let mut x = y.clone();
        for s in self.stages.iter().rev() {
            x = s.inverse(&x)?;
        }
        Ok(x)
    }

    fn forward_correction(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let mut total = DVector::zeros(x.len());
        let mut y = x.clone();
        for s in &self.stages {
            let c = s.forward_correction(&y)?;
            y += &c;
            total += c;
        }
        Ok(total)
    }

    fn inverse_correction(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let mut total = DVector::zeros(y.len());
        let mut x = y.clone();
        for s in self.stages.iter().rev() {
            let c = s.inverse_correction(&x)?;
            x += &c;
            total += c;
        }
        Ok(total)
    }

    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let mut j = DMatrix::identity(self.dim, self.dim);
        let mut y = x.clone();
        for s in &self.stages {
            let next = s.forward(&y)?;
            j = s.jacobian_with_forward(&y, &next)? * j;
            y = next;
        }
        Ok(j)
    }

    fn inverse_jacobian(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        let mut j = DMatrix::identity(self.dim, self.dim);
        let mut x = y.clone();
        for s in self.stages.iter().rev() {
            j = s.inverse_jacobian(&x)? * j;
            x = s.inverse(&x)?;
        }
        Ok(j)
    }

    fn is_identity(&self) -> bool {
        self.stages.is_empty()
    }
}

/// The map `T^{-1} ∘ F ∘ T` in the new coordinates of `T`.
#[derive(Clone)]
pub struct ConjugatedMap {
    base: MapRef,
    transform: TransformRef,
}

impl ConjugatedMap {
    pub fn new(base: MapRef, transform: TransformRef) -> Self {
        Self { base, transform }
    }

    pub fn base(&self) -> &MapRef {
        &self.base
    }

    pub fn transform(&self) -> &TransformRef {
        &self.transform
    }
}

impl DiscreteMap for ConjugatedMap {
    fn structure(&self) -> &SpectralStructure {
        self.base.structure()
    }

    fn linear_part(&self) -> &DMatrix<f64> {
        self.base.linear_part()
    }

    fn linear_inverse(&self) -> &DMatrix<f64> {
        self.base.linear_inverse()
    }

    fn eval(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if self.transform.is_identity() {
            return self.base.eval(x);
        }
        self.transform.inverse(&self.base.eval(&self.transform.forward(x)?)?)
    }

    /// `A τ + N(x + τ) + σ(F(x + τ))` with `τ`, `σ` the forward and inverse
    /// corrections and `N` the nonlinear part of the base map. Each piece is
    /// small near the origin and exact far from it.
    fn nonlinear_part(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if self.transform.is_identity() {
            return self.base.nonlinear_part(x);
        }
        let tau = self.transform.forward_correction(x)?;
        let y = x + &tau;
        let z = self.base.eval(&y)?;
        let sigma = self.transform.inverse_correction(&z)?;
        Ok(self.base.linear_part() * tau + self.base.nonlinear_part(&y)? + sigma)
    }

    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.eval_and_jacobian(x)?.1)
    }

    fn eval_and_jacobian(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        if self.transform.is_identity() {
            return self.base.eval_and_jacobian(x);
        }
        let tx = self.transform.forward(x)?;
        let (fx, jb) = self.base.eval_and_jacobian(&tx)?;
        let w = self.transform.inverse(&fx)?;
        let j = self.transform.inverse_jacobian(&fx)? * jb * self.transform.jacobian_with_forward(x, &tx)?;
        Ok((w, j))
    }

    fn inverse(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        if self.transform.is_identity() {
            return self.base.inverse(y);
        }
        self.transform.inverse(&self.base.inverse(&self.transform.forward(y)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    /// `(x_s, x_c, x_u) -> (x_s + a x_c^2, x_c, x_u)`.
    struct Shear(f64);

    impl Transform for Shear {
        fn name(&self) -> &str {
            "shear"
        }
        fn forward(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
            let mut y = x.clone();
            y[0] += self.0 * x[1] * x[1];
            Ok(y)
        }
        fn inverse(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
            let mut x = y.clone();
            x[0] -= self.0 * y[1] * y[1];
            Ok(x)
        }
        fn forward_correction(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
            let mut c = DVector::zeros(x.len());
            c[0] = self.0 * x[1] * x[1];
            Ok(c)
        }
        fn inverse_correction(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
            let mut c = DVector::zeros(y.len());
            c[0] = -self.0 * y[1] * y[1];
            Ok(c)
        }
    }

    #[test]
    fn conjugated_map_pieces_agree() {
        let base: MapRef = Arc::new(catalog::poly3());
        let chain = TransformChain::new(
            "test",
            3,
            vec![Arc::new(Shear(0.3)), Arc::new(IdentityTransform { dim: 3 }), Arc::new(Shear(-0.1))],
        );
        assert_eq!(chain.stages().len(), 2);
        let m = ConjugatedMap::new(base.clone(), Arc::new(chain));
        let x = DVector::from_vec(vec![0.1, -0.2, 0.15]);
        let direct = m.eval(&x).unwrap();
        let split = m.linear_part() * &x + m.nonlinear_part(&x).unwrap();
        assert!((&direct - split).norm() < 1e-15);
        assert!((m.inverse(&direct).unwrap() - &x).norm() < 1e-12);
        let fd = fd_jacobian(|y| m.eval(y), &x).unwrap();
        assert!((m.jacobian(&x).unwrap() - fd).abs().max() < 1e-8);
                let far = DVector::from_vec(vec![1e8, 0.1, 1e-9]);
        let nl = m.nonlinear_part(&far).unwrap();
        let y = DVector::from_vec(vec![1e8 + 0.2 * 0.01, 0.1, 1e-9]);
        let zc = base.eval(&y).unwrap()[1];
        let expected =
            base.linear_part()[(0, 0)] * 0.2 * 0.01 + base.nonlinear_part(&y).unwrap()[0] - 0.2 * zc * zc;
        assert!((nl[0] - expected).abs() < 1e-17, "{nl} vs {expected}");
    }
}
