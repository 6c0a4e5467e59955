//! Remainder-exponent fits at center points.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::Result;
use crate::numeric::{linear_fit, max_abs};
use crate::pipeline::lattice;

/// Fit along one direction.
#[derive(Debug, Clone, Serialize)]
pub struct DirectionFit {
    pub direction_id: usize,
    /// Scales whose remainder cleared the noise floor.
    pub used: usize,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
}

/// Least-squares fit of `log |T(x̃ + s v) - T(x̃) - s Δ v|` against `log s`.
#[derive(Debug, Clone, Serialize)]
pub struct ExponentFit {
    pub center: Vec<f64>,
    /// `(direction_id, scale, remainder)` for every evaluation, including
    /// those below the noise floor.
    pub samples: Vec<(usize, f64, f64)>,
    pub directions: Vec<DirectionFit>,
    pub pooled_slope: Option<f64>,
    pub pooled_intercept: Option<f64>,
    /// Standard error of the pooled slope.
    pub slope_stderr: Option<f64>,
    /// Smallest per-direction slope.
    pub min_direction_slope: Option<f64>,
}

impl ExponentFit {
    /// `false` when every remainder fell below the noise floor.
    pub fn available(&self) -> bool {
        self.pooled_slope.is_some()
    }
}

fn fit_with_error(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let (slope, intercept) = linear_fit(xs, ys)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = if n > 2.0 && sxx > 0.0 { (sse / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    Some((slope, intercept, stderr))
}

/// Evaluates `T` at `center + s v` for every scale and direction and fits
/// the remainder exponent per direction (at least three usable scales) and
/// pooled. Remainders below `noise_floor` are discarded.
pub fn differentiability_fit(
    t: &dyn Fn(&DVector<f64>) -> Result<DVector<f64>>,
    center: &DVector<f64>,
    jet: &DMatrix<f64>,
    scales: &[f64],
    directions: &[DVector<f64>],
    noise_floor: f64,
) -> Result<ExponentFit> {
    let t0 = t(center)?;
    let mut samples = Vec::new();
    let mut fits = Vec::new();
    let (mut px, mut py) = (Vec::new(), Vec::new());
    for (id, v) in directions.iter().enumerate() {
        let step = jet * v;
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for &s in scales {
            let r = (t(&(center + v * s))? - &t0 - &step * s).norm();
            samples.push((id, s, r));
            if r >= noise_floor {
                xs.push(s.ln());
                ys.push(r.ln());
            }
        }
        let fit = if xs.len() >= 3 { linear_fit(&xs, &ys) } else { None };
        fits.push(DirectionFit {
            direction_id: id,
            used: xs.len(),
            slope: fit.map(|f| f.0),
            intercept: fit.map(|f| f.1),
        });
        px.extend(xs);
        py.extend(ys);
    }
    let pooled = if px.len() >= 3 { fit_with_error(&px, &py) } else { None };
    let min_direction_slope = fits.iter().filter_map(|f| f.slope).reduce(f64::min);
    Ok(ExponentFit {
        center: center.iter().cloned().collect(),
        samples,
        directions: fits,
        pooled_slope: pooled.map(|p| p.0),
        pooled_intercept: pooled.map(|p| p.1),
        slope_stderr: pooled.map(|p| p.2),
        min_direction_slope,
    })
}

/// Largest jump of a matrix field between lattice neighbours at two
/// spacings.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct JetContinuity {
    pub coarse_spacing: f64,
    pub coarse_jump: f64,
    pub fine_jump: f64,
}

impl JetContinuity {
    /// Halving the spacing shrinks the largest jump by at least a quarter
    /// (or the field is constant to `1e-12`).
    pub fn continuous(&self) -> bool {
        self.fine_jump <= 1e-12 || self.fine_jump <= 0.75 * self.coarse_jump
    }
}

fn max_jump(
    jet: &dyn Fn(&DVector<f64>) -> Result<DMatrix<f64>>,
    dim: usize,
    k: usize,
    half_width: f64,
) -> Result<f64> {
    let pts = lattice(dim, k, half_width);
    let values = pts.iter().map(jet).collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0f64;
    for (i, vi) in values.iter().enumerate() {
        for axis in 0..dim {
            let stride = k.pow(axis as u32);
            if (i / stride) % k + 1 < k {
                worst = worst.max(max_abs(&(&values[i + stride] - vi)));
            }
        }
    }
    Ok(worst)
}

/// Evaluates `jet` on lattices of `k` and `2k - 1` points per axis over
/// `[-w, w]^dim`.
pub fn jet_continuity(
    jet: &dyn Fn(&DVector<f64>) -> Result<DMatrix<f64>>,
    dim: usize,
    k: usize,
    half_width: f64,
) -> Result<JetContinuity> {
    Ok(JetContinuity {
        coarse_spacing: 2.0 * half_width / (k - 1) as f64,
        coarse_jump: max_jump(jet, dim, k, half_width)?,
        fine_jump: max_jump(jet, dim, 2 * k - 1, half_width)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::seeded_directions;

    fn dyadic() -> Vec<f64> {
        (3..=10).map(|j| 0.5f64.powi(j)).collect()
    }

    #[test]
    fn identity_has_no_fit() {
        let id = |x: &DVector<f64>| Ok(x.clone());
        let f = differentiability_fit(&id, &DVector::zeros(3), &DMatrix::identity(3, 3), &dyadic(), &seeded_directions(3, 20, 1), 1e-11)
            .unwrap();
        assert!(!f.available());
        assert!(f.samples.iter().all(|s| s.2 == 0.0));
    }

    #[test]
    fn quadratic_remainder_has_slope_two() {
        let v = DVector::from_vec(vec![0.3, -0.4, 0.5]);
        let t = move |x: &DVector<f64>| Ok(x + &v * x.norm_squared());
        let f = differentiability_fit(&t, &DVector::zeros(3), &DMatrix::identity(3, 3), &dyadic(), &seeded_directions(3, 20, 1), 1e-11)
            .unwrap();
        assert!((f.pooled_slope.unwrap() - 2.0).abs() < 0.01);
        assert!((f.min_direction_slope.unwrap() - 2.0).abs() < 0.01);
    }

    #[test]
    fn smooth_jets_are_continuous() {
        let jet = |x: &DVector<f64>| Ok(DMatrix::from_element(2, 2, x[0].sin()));
        assert!(jet_continuity(&jet, 1, 5, 0.2).unwrap().continuous());
        let constant = |_: &DVector<f64>| Ok(DMatrix::identity(2, 2));
        assert!(jet_continuity(&constant, 2, 3, 0.2).unwrap().continuous());
        let step = |x: &DVector<f64>| Ok(DMatrix::from_element(1, 1, if x[0] > 0.01 { 1.0 } else { 0.0 }));
        assert!(!jet_continuity(&step, 1, 5, 0.2).unwrap().continuous());
    }
}
