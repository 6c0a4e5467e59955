//! Tensor-product Chebyshev interpolants on a cube `[-w, w]^m`.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

/// Vector-valued tensor Chebyshev interpolant.
#[derive(Debug, Clone)]
pub struct Chebyshev {
    dim_in: usize,
    dim_out: usize,
    degree: usize,
    half_width: f64,
    /// Coefficients indexed by `(multi-index, output)`, multi-index in
    /// row-major order over the input axes.
    coeffs: Vec<f64>,
}

fn basis(t: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; n + 1];
    let mut d = vec![0.0; n + 1];
    v[0] = 1.0;
    if n >= 1 {
        v[1] = t;
        d[1] = 1.0;
    }
    for k in 2..=n {
        v[k] = 2.0 * t * v[k - 1] - v[k - 2];
        d[k] = 2.0 * v[k - 1] + 2.0 * t * d[k - 1] - d[k - 2];
    }
    (v, d)
}

impl Chebyshev {
    /// Interpolates `f` at the tensor grid of first-kind Chebyshev nodes.
    pub fn fit<F>(f: F, dim_in: usize, dim_out: usize, degree: usize, half_width: f64) -> Result<Self>
    where
        F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
    {
        let n1 = degree + 1;
        let total = n1.pow(dim_in as u32);
        let nodes: Vec<f64> = (0..n1)
            .map(|j| (std::f64::consts::PI * (j as f64 + 0.5) / n1 as f64).cos())
            .collect();
        let mut values = vec![0.0; total * dim_out];
        for lin in 0..total {
            let mut rem = lin;
            let mut x = DVector::zeros(dim_in);
            for a in (0..dim_in).rev() {
                x[a] = half_width * nodes[rem % n1];
                rem /= n1;
            }
            let y = f(&x)?;
            values[lin * dim_out..(lin + 1) * dim_out].copy_from_slice(y.as_slice());
        }
        // Discrete cosine transform along each axis in turn.
        let cos_table: Vec<f64> = (0..n1 * n1)
            .map(|i| {
                let (k, j) = (i / n1, i % n1);
                (std::f64::consts::PI * k as f64 * (j as f64 + 0.5) / n1 as f64).cos()
            })
            .collect();
        let mut data = values;
        for a in 0..dim_in {
            let stride = n1.pow((dim_in - 1 - a) as u32) * dim_out;
            let mut out = vec![0.0; data.len()];
            let block = stride * n1;
            for base in (0..data.len()).step_by(block) {
                for inner in 0..stride {
                    for k in 0..n1 {
                        let mut acc = 0.0;
                        for j in 0..n1 {
                            acc += cos_table[k * n1 + j] * data[base + j * stride + inner];
                        }
                        let scale = if k == 0 { 1.0 } else { 2.0 } / n1 as f64;
                        out[base + k * stride + inner] = acc * scale;
                    }
                }
            }
            data = out;
        }
        Ok(Self {
            dim_in,
            dim_out,
            degree,
            half_width,
            coeffs: data,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Whether `x` lies in the interpolation cube.
    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.iter().all(|v| v.abs() <= self.half_width)
    }

    /// `Σ_k c_k Π_a w_a[k_a]`, contracting the last axis first.
    fn contract(&self, weights: &[&[f64]]) -> DVector<f64> {
        let n1 = self.degree + 1;
        let dout = self.dim_out;
        if self.dim_in == 0 {
            return DVector::from_column_slice(&self.coeffs[..dout]);
        }
        let mut src: &[f64] = &self.coeffs;
        let mut buf = Vec::new();
        for a in (0..self.dim_in).rev() {
            let w = weights[a];
            let prefixes = src.len() / (n1 * dout);
            let mut out = vec![0.0; prefixes * dout];
            for p in 0..prefixes {
                let block = &src[p * n1 * dout..(p + 1) * n1 * dout];
                let acc = &mut out[p * dout..(p + 1) * dout];
                for (k, wk) in w.iter().enumerate() {
                    for (o, v) in acc.iter_mut().enumerate() {
                        *v += wk * block[k * dout + o];
                    }
                }
            }
            buf = out;
            src = &buf;
        }
        DVector::from_vec(buf)
    }

    /// Value and Jacobian at `x` (inside the cube). Contracts every axis
    /// once, carrying the partial derivatives along with the values.
    pub fn eval_with_jacobian(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let n1 = self.degree + 1;
        let dout = self.dim_out;
        let tables: Vec<(Vec<f64>, Vec<f64>)> = x
            .iter()
            .map(|v| basis(v / self.half_width, self.degree))
            .collect();
        // parts[0] holds values, parts[1 + j] the derivative along the j-th
        // contracted axis (counting from the last).
        let mut parts: Vec<Vec<f64>> = vec![self.coeffs.clone()];
        for a in (0..self.dim_in).rev() {
            let (w, dw) = (&tables[a].0, &tables[a].1);
            let prefixes = parts[0].len() / (n1 * dout);
            let contract = |src: &[f64], w: &[f64]| {
                let mut out = vec![0.0; prefixes * dout];
                for p in 0..prefixes {
                    let block = &src[p * n1 * dout..(p + 1) * n1 * dout];
                    let acc = &mut out[p * dout..(p + 1) * dout];
                    for (k, wk) in w.iter().enumerate() {
                        for (o, v) in acc.iter_mut().enumerate() {
                            *v += wk * block[k * dout + o];
                        }
                    }
                }
                out
            };
            let mut next: Vec<Vec<f64>> = Vec::with_capacity(parts.len() + 1);
            next.push(contract(&parts[0], w));
            for d in &parts[1..] {
                next.push(contract(d, w));
            }
            next.push(contract(&parts[0], dw));
            parts = next;
        }
        let val = DVector::from_column_slice(&parts[0][..dout]);
        let mut jac = DMatrix::zeros(dout, self.dim_in);
        for (j, d) in parts[1..].iter().enumerate() {
            let axis = self.dim_in - 1 - j;
            for o in 0..dout {
                jac[(o, axis)] = d[o] / self.half_width;
            }
        }
        (val, jac)
    }

    /// Value at `x` (inside the cube).
    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        let tables: Vec<Vec<f64>> = x
            .iter()
            .map(|v| basis(v / self.half_width, self.degree).0)
            .collect();
        let values: Vec<&[f64]> = tables.iter().map(|t| t.as_slice()).collect();
        self.contract(&values)
    }
}
