//! The Takens normal form `(A_s(x_c) x_s, A_c x_c + f_c(x_c), A_u(x_c) x_u)`.

use nalgebra::{DMatrix, DVector};

use crate::blocks::{sub_matrix, Projection, SpectralStructure};
use crate::error::Result;
use crate::map::{DiscreteMap, MapRef};

/// Normal form read off the normalized model on `X_c`: `A_s(x_c)`,
/// `A_u(x_c)` are the diagonal blocks of `DF4(x_c)` and
/// `A_c x_c + f_c(x_c) = π_c F4(x_c)`.
#[derive(Clone)]
pub struct NormalForm {
    model: MapRef,
    structure: SpectralStructure,
}

impl NormalForm {
    pub fn new(model: MapRef) -> Self {
        let structure = model.structure().clone();
        Self { model, structure }
    }

    pub fn structure(&self) -> &SpectralStructure {
        &self.structure
    }

    fn jacobian_on_center(&self, x_c: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.model.jacobian(&self.structure.embed(x_c, Projection::C)?)
    }

    pub fn a_s(&self, x_c: &DVector<f64>) -> Result<DMatrix<f64>> {
        let r = self.structure.s_range();
        Ok(sub_matrix(&self.jacobian_on_center(x_c)?, r.clone(), r))
    }

    pub fn a_u(&self, x_c: &DVector<f64>) -> Result<DMatrix<f64>> {
        let r = self.structure.u_range();
        Ok(sub_matrix(&self.jacobian_on_center(x_c)?, r.clone(), r))
    }

    /// `A_c`, the center block of the linear part.
    pub fn a_c(&self) -> DMatrix<f64> {
        let r = self.structure.c_range();
        sub_matrix(self.model.linear_part(), r.clone(), r)
    }

    /// `A_c x_c + f_c(x_c)`.
    pub fn center_map(&self, x_c: &DVector<f64>) -> Result<DVector<f64>> {
        let y = self.model.eval(&self.structure.embed(x_c, Projection::C)?)?;
        self.structure.split(&y, Projection::C)
    }

    /// `f_c(x_c) = π_c F4(x_c) - A_c x_c`.
    pub fn f_c(&self, x_c: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.center_map(x_c)? - self.a_c() * x_c)
    }

    /// The normal form at `x`.
    pub fn evaluate(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let s = &self.structure;
        let (sr, cr, ur) = (s.s_range(), s.c_range(), s.u_range());
        let x_c = x.rows(cr.start, cr.len()).into_owned();
        let j = self.jacobian_on_center(&x_c)?;
        let mut y = DVector::zeros(s.dim());
        y.rows_mut(sr.start, sr.len())
            .copy_from(&(sub_matrix(&j, sr.clone(), sr.clone()) * x.rows(sr.start, sr.len())));
        y.rows_mut(cr.start, cr.len()).copy_from(&self.center_map(&x_c)?);
        y.rows_mut(ur.start, ur.len())
            .copy_from(&(sub_matrix(&j, ur.clone(), ur.clone()) * x.rows(ur.start, ur.len())));
        Ok(y)
    }
}

impl DiscreteMap for NormalForm {
    fn structure(&self) -> &SpectralStructure {
        &self.structure
    }

    fn linear_part(&self) -> &DMatrix<f64> {
        self.model.linear_part()
    }

    fn linear_inverse(&self) -> &DMatrix<f64> {
        self.model.linear_inverse()
    }

    fn eval(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.evaluate(x)
    }
}
