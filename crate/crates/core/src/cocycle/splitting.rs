//! Invariant splitting `X_u = E_{k+1}(x) + ... + E_p(x)` of the unstable
//! cocycle and the block-diagonalizing matrix `P_1`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{BaseOrbit, CenterCocycle, CocycleBase};
use crate::error::{Error, Result};
use crate::numeric::{orthonormal_frame, projector, spectral_norm};

/// Largest accepted invariance residual of a computed splitting.
pub const SPLITTING_TOL: f64 = 1e-8;
/// Largest accepted condition number of the frame matrix.
const MAX_CONDITION: f64 = 1e10;

/// Invariant subspaces of the unstable cocycle at one base point.
#[derive(Debug, Clone, Serialize)]
pub struct SplittingField {
    pub base: Vec<f64>,
    /// Orthonormal frame of `E_i` (in `X_u` coordinates), one per block.
    pub frames: Vec<DMatrix<f64>>,
    /// Local coordinate ranges of the unstable blocks inside `X_u`.
    pub ranges: Vec<std::ops::Range<usize>>,
    /// Largest `|(I - Pi_{E_i(g x)}) A_u(x) E_i(x)|` over blocks.
    pub invariance_residual: f64,
}

/// Generators and inverse generators along an orbit, computed once.
pub(crate) struct OrbitGenerators {
    pub orbit: BaseOrbit,
    pub a: Vec<DMatrix<f64>>,
    pub a_inv: Vec<DMatrix<f64>>,
}

impl OrbitGenerators {
    pub fn new(c: &CenterCocycle, orbit: BaseOrbit) -> Result<Self> {
        let mut a = Vec::new();
        let mut a_inv = Vec::new();
        for k in orbit.lo()..=orbit.hi() {
            let g = c.generator(orbit.at(k))?;
            let gi = g
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::numeric("singular unstable generator"))?;
            a.push(g);
            a_inv.push(gi);
        }
        Ok(Self { orbit, a, a_inv })
    }

    pub fn gen(&self, k: i64) -> &DMatrix<f64> {
        &self.a[(k - self.orbit.lo()) as usize]
    }

    pub fn gen_inv(&self, k: i64) -> &DMatrix<f64> {
        &self.a_inv[(k - self.orbit.lo()) as usize]
    }
}

fn coordinate_frame(dim: usize, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(dim, cols.len(), |r, c| if r == cols[c] { 1.0 } else { 0.0 })
}

/// Frames of every `E_i` at orbit index `j`, from the orbit points
/// `j - horizon ..= j + horizon`.
pub(crate) fn frames_at(
    gens: &OrbitGenerators,
    ranges: &[std::ops::Range<usize>],
    j: i64,
    horizon: i64,
) -> Result<Vec<DMatrix<f64>>> {
    let du: usize = ranges.iter().map(|r| r.len()).sum();
    if ranges.len() == 1 {
        return Ok(vec![DMatrix::identity(du, du)]);
    }
    if j - horizon < gens.orbit.lo() || j + horizon > gens.orbit.hi() {
        return Err(Error::input("orbit too short for the splitting horizon"));
    }
    let mut out = Vec::with_capacity(ranges.len());
    for (i, r) in ranges.iter().enumerate() {
        // Fast part: blocks i.. pushed forward from the past.
        let fast_cols: Vec<usize> = ranges[i..].iter().flat_map(|q| q.clone()).collect();
        let mut fast = coordinate_frame(du, &fast_cols);
        if i > 0 {
            for t in (j - horizon)..j {
                fast = orthonormal_frame(&(gens.gen(t) * &fast));
            }
        }
        // Slow part: blocks ..=i pulled back from the future.
        let slow_cols: Vec<usize> = ranges[..=i].iter().flat_map(|q| q.clone()).collect();
        let mut slow = coordinate_frame(du, &slow_cols);
        if i + 1 < ranges.len() {
            for t in (j..(j + horizon)).rev() {
                slow = orthonormal_frame(&(gens.gen_inv(t) * &slow));
            }
        }
        let frame = if i == 0 {
            slow
        } else if i + 1 == ranges.len() {
            fast
        } else {
            intersect(&fast, &slow, r.len())?
        };
        out.push(orthonormal_frame(&frame));
    }
    Ok(out)
}

/// Orthonormal frame of `span(a) ∩ span(b)`, expected of dimension `m`.
fn intersect(a: &DMatrix<f64>, b: &DMatrix<f64>, m: usize) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let resid = (DMatrix::identity(n, n) - projector(b)) * a;
    let svd = resid.svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::numeric("svd in subspace intersection"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
    if order.len() < m {
        return Err(Error::numeric("subspace intersection has wrong dimension"));
    }
    let coeffs = DMatrix::from_fn(a.ncols(), m, |r, c| vt[(order[c], r)]);
    Ok(a * coeffs)
}

fn invariance_residual(
    a_u: &DMatrix<f64>,
    here: &[DMatrix<f64>],
    next: &[DMatrix<f64>],
) -> f64 {
    let n = a_u.nrows();
    here.iter()
        .zip(next)
        .map(|(e, en)| spectral_norm(&((DMatrix::identity(n, n) - projector(en)) * a_u * e)))
        .fold(0.0, f64::max)
}

/// Computes the invariant splitting at `x_cs` by power iteration of forward
/// products (fast directions) and of inverse products (slow directions),
/// intersecting the two for intermediate blocks.
pub fn compute_invariant_splitting(
    c: &CenterCocycle,
    x_cs: &DVector<f64>,
    horizon: usize,
) -> Result<SplittingField> {
    if c.base() != CocycleBase::CenterStable {
        return Err(Error::input("splitting needs the unstable cocycle over X_cs"));
    }
    let ranges = c.map().structure().unstable_local_ranges();
    let h = horizon as i64;
    if ranges.len() == 1 {
        let du = ranges[0].len();
        return Ok(SplittingField {
            base: x_cs.iter().cloned().collect(),
            frames: vec![DMatrix::identity(du, du)],
            ranges,
            invariance_residual: 0.0,
        });
    }
    let orbit = c.orbit(x_cs, -h, h + 1)?;
    let gens = OrbitGenerators::new(c, orbit)?;
    let here = frames_at(&gens, &ranges, 0, h)?;
    let next = frames_at(&gens, &ranges, 1, h)?;
    let residual = invariance_residual(gens.gen(0), &here, &next);
    if residual > SPLITTING_TOL {
        return Err(Error::NoConvergence {
            what: "invariant splitting".into(),
            iterations: horizon,
            residual,
        });
    }
    Ok(SplittingField {
        base: x_cs.iter().cloned().collect(),
        frames: here,
        ranges,
        invariance_residual: residual,
    })
}

/// `P_1` from frames: each `E_i` is given the basis whose block-`i`
/// coordinates are the identity, and `P_1` inverts the resulting frame
/// matrix, so that `P_1 E_i = X_i`.
pub(crate) fn p1_from_frames(
    frames: &[DMatrix<f64>],
    ranges: &[std::ops::Range<usize>],
) -> Result<DMatrix<f64>> {
    let du: usize = ranges.iter().map(|r| r.len()).sum();
    if frames.len() == 1 {
        return Ok(DMatrix::identity(du, du));
    }
    let mut q = DMatrix::zeros(du, du);
    for (f, r) in frames.iter().zip(ranges) {
        let top = f.rows(r.start, r.len()).into_owned();
        let top_inv = top
            .try_inverse()
            .ok_or_else(|| Error::numeric("splitting frame is not a graph over its block"))?;
        let g = f * top_inv;
        q.view_mut((0, r.start), (du, r.len())).copy_from(&g);
    }
    let sv = q.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(smin > 0.0) || smax / smin > MAX_CONDITION {
        return Err(Error::numeric(format!(
            "ill-conditioned splitting frame (condition {:.3e})",
            smax / smin
        )));
    }
    q.try_inverse()
        .ok_or_else(|| Error::numeric("singular splitting frame"))
}

/// The matrix `P_1(x_cs)` mapping each `E_i(x_cs)` onto the coordinate
/// block `X_i`.
pub fn assemble_p1(field: &SplittingField) -> Result<DMatrix<f64>> {
    p1_from_frames(&field.frames, &field.ranges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::cocycle::{conjugated_generator, diag_block};
    use crate::numeric::subspace_distance;
    use std::sync::Arc;

    fn pt(v: &[f64]) -> DVector<f64> {
        DVector::from_vec(v.to_vec())
    }

    #[test]
    fn one_block_gives_whole_space() {
        let c = CenterCocycle::unstable(Arc::new(catalog::poly3()));
        let f = compute_invariant_splitting(&c, &pt(&[0.2, 0.1]), 30).unwrap();
        assert_eq!(f.frames, vec![DMatrix::identity(1, 1)]);
        assert_eq!(assemble_p1(&f).unwrap(), DMatrix::identity(1, 1));
    }

    #[test]
    fn uncoupled_twou4_gives_axes() {
        let m = catalog::twou4_with(0.0);
        let c = CenterCocycle::unstable(Arc::new(m));
        let f = compute_invariant_splitting(&c, &pt(&[0.2, 0.3]), 30).unwrap();
        assert!(subspace_distance(&f.frames[0], &DMatrix::from_column_slice(2, 1, &[1.0, 0.0])) < 1e-15);
        assert!(subspace_distance(&f.frames[1], &DMatrix::from_column_slice(2, 1, &[0.0, 1.0])) < 1e-15);
    }

    #[test]
    fn origin_gives_identity_p1() {
        let c = CenterCocycle::unstable(Arc::new(catalog::twou4()));
        let f = compute_invariant_splitting(&c, &pt(&[0.0, 0.0]), 30).unwrap();
        assert!((assemble_p1(&f).unwrap() - DMatrix::identity(2, 2)).abs().max() < 1e-14);
    }

    #[test]
    fn p1_block_diagonalizes_twou4() {
        let c = CenterCocycle::unstable(Arc::new(catalog::twou4()));
        let x = pt(&[0.25, -0.2]);
        let gx = c.step(&x, true).unwrap();
        let p_here = assemble_p1(&compute_invariant_splitting(&c, &x, 40).unwrap()).unwrap();
        let p_next = assemble_p1(&compute_invariant_splitting(&c, &gx, 40).unwrap()).unwrap();
        let t = conjugated_generator(&c.generator(&x).unwrap(), &p_here, &p_next).unwrap();
        assert!(t[(0, 1)].abs() <= 1e-8 && t[(1, 0)].abs() <= 1e-8, "{t}");
        assert_eq!(diag_block(&t, 0..1).nrows(), 1);
    }
}
