//! Small numerical kernels: finite differences, damped Newton, log-log fits,
//! subspace distances and fixed-precision formatting.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Central finite-difference Jacobian of `f` at `x`, with the step
/// `eps^{1/3} * max(1, |x_j|)` scaled per coordinate.
pub fn fd_jacobian<F>(f: F, x: &DVector<f64>) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let steps: Vec<f64> = x.iter().map(|v| f64::EPSILON.cbrt() * v.abs().max(1.0)).collect();
    fd_jacobian_steps(f, x, &steps)
}

/// Central finite-difference Jacobian with an explicit step.
pub fn fd_jacobian_with_step<F>(f: F, x: &DVector<f64>, h: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    fd_jacobian_steps(f, x, &vec![h; x.len()])
}

fn fd_jacobian_steps<F>(f: F, x: &DVector<f64>, steps: &[f64]) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut cols = Vec::with_capacity(x.len());
    let mut xp = x.clone();
    for (j, &h) in steps.iter().enumerate() {
        xp[j] = x[j] + h;
        let fp = f(&xp)?;
        xp[j] = x[j] - h;
        let fm = f(&xp)?;
        xp[j] = x[j];
        cols.push((fp - fm) / (2.0 * h));
    }
    let rows = cols.first().map(|c| c.len()).unwrap_or(0);
    Ok(DMatrix::from_fn(rows, x.len(), |i, j| cols[j][i]))
}

/// Damped Newton solve of `f(x) = target` from `guess`.
///
/// Stops when the correction falls below `1e-15 * max(1, |x|)` and reports
/// failure if the final residual exceeds `tol * max(1, |target|)`.
pub fn newton_solve<F, J>(
    f: F,
    jac: J,
    target: &DVector<f64>,
    guess: DVector<f64>,
    tol: f64,
    what: &str,
) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
    J: Fn(&DVector<f64>) -> Result<DMatrix<f64>>,
{
    const MAX_ITER: usize = 60;
    let scale = target.norm().max(1.0);
    let mut x = guess;
    let mut r = f(&x)? - target;
    let mut rn = r.norm();
    for _ in 0..MAX_ITER {
        if !rn.is_finite() {
            break;
        }
        let j = jac(&x)?;
        let step = match j.lu().solve(&r) {
            Some(s) => s,
            None => return Err(Error::numeric(format!("{what}: singular Jacobian"))),
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = &x - &step * t;
            let rt = f(&trial)? - target;
            let rtn = rt.norm();
            if rtn.is_finite() && (rtn < rn || rtn <= tol * scale * 1e-3) {
                x = trial;
                r = rt;
                rn = rtn;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        let small_step = step.norm() * t <= 1e-15 * x.norm().max(1.0);
        if !accepted || small_step {
            break;
        }
    }
    if rn.is_finite() && rn <= tol * scale {
        Ok(x)
    } else {
        Err(Error::NoConvergence {
            what: what.to_string(),
            iterations: MAX_ITER,
            residual: rn,
        })
    }
}

/// Exact bit pattern of a vector, used as a cache key.
pub fn bit_key(x: &DVector<f64>) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

/// Least-squares line through `(xs, ys)`; returns `(slope, intercept)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Orthonormal basis of the column span of `m` (thin QR), with each column's
/// largest-magnitude coordinate made positive.
pub fn orthonormal_frame(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut q = m.clone().qr().q();
    fix_column_signs(&mut q);
    q
}

/// Flips columns so that the largest-magnitude entry of each is positive.
pub fn fix_column_signs(q: &mut DMatrix<f64>) {
    for j in 0..q.ncols() {
        let mut best = 0usize;
        for i in 0..q.nrows() {
            if q[(i, j)].abs() > q[(best, j)].abs() + 1e-14 {
                best = i;
            }
        }
        if q[(best, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
}

/// Orthogonal projector onto the span of an orthonormal frame.
pub fn projector(frame: &DMatrix<f64>) -> DMatrix<f64> {
    frame * frame.transpose()
}

/// Distance between subspaces spanned by orthonormal frames:
/// the larger of the two one-sided gaps `|(I - P_2) P_1|`, `|(I - P_1) P_2|`.
pub fn subspace_distance(e1: &DMatrix<f64>, e2: &DMatrix<f64>) -> f64 {
    let n = e1.nrows();
    let p1 = projector(e1);
    let p2 = projector(e2);
    let id = DMatrix::<f64>::identity(n, n);
    let a = spectral_norm(&((&id - &p2) * e1));
    let b = spectral_norm(&((&id - &p1) * e2));
    a.max(b)
}

/// Formats a float with 17 significant digits (round-trip exact).
pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    format!("{:.16e}", x)
}

/// Maximum absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}
