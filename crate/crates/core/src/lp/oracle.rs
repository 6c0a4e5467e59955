//! Brute-force leaf membership by direct iteration.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::Result;
use crate::map::DiscreteMap;

/// Deviation bound relative to the initial separation.
pub const BOUND_FACTOR: f64 = 10.0;

/// Outcome of a membership test.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LeafCheck {
    pub member: bool,
    /// `max rho^{-n} |F^n(z) - F^n(x)|` over the iterated range.
    pub deviation: f64,
    pub bound: f64,
}

fn check(deviation: f64, x: &DVector<f64>, z: &DVector<f64>, bound: Option<f64>) -> LeafCheck {
    let bound = bound.unwrap_or(BOUND_FACTOR * (z - x).norm());
    LeafCheck {
        member: deviation <= bound,
        deviation,
        bound,
    }
}

/// Unstable-leaf test: iterates `F^{-1}` `horizon` times from `x` and `z`
/// and compares `max_{n <= 0} rho^{-n} |F^n(z) - F^n(x)|` with `bound`
/// (default `10 |z - x|`).
pub fn leaf_membership_oracle(
    map: &dyn DiscreteMap,
    x: &DVector<f64>,
    z: &DVector<f64>,
    rho: f64,
    horizon: usize,
    bound: Option<f64>,
) -> Result<LeafCheck> {
    let (mut a, mut b) = (x.clone(), z.clone());
    let mut dev = (&b - &a).norm();
    for n in 1..=horizon {
        a = map.inverse(&a)?;
        b = map.inverse(&b)?;
        dev = dev.max(rho.powi(n as i32) * (&b - &a).norm());
    }
    Ok(check(dev, x, z, bound))
}

/// Stable-leaf test: forward iteration with weight `rho` in `(λ_s^+, 1 - ς)`.
pub fn stable_leaf_membership_oracle(
    map: &dyn DiscreteMap,
    x: &DVector<f64>,
    z: &DVector<f64>,
    rho: f64,
    horizon: usize,
    bound: Option<f64>,
) -> Result<LeafCheck> {
    let (mut a, mut b) = (x.clone(), z.clone());
    let mut dev = (&b - &a).norm();
    for n in 1..=horizon {
        a = map.eval(&a)?;
        b = map.eval(&b)?;
        dev = dev.max(rho.powi(-(n as i32)) * (&b - &a).norm());
    }
    Ok(check(dev, x, z, bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn pt(v: &[f64]) -> DVector<f64> {
        DVector::from_vec(v.to_vec())
    }

    #[test]
    fn linear_map_offsets() {
        let m = catalog::lin3();
        let x = pt(&[0.1, 0.2, 0.3]);
        let same = leaf_membership_oracle(&m, &x, &x, 1.2, 15, None).unwrap();
        assert!(same.member && same.deviation == 0.0);
        let up = leaf_membership_oracle(&m, &x, &pt(&[0.1, 0.2, 0.5]), 1.2, 15, None).unwrap();
        assert!(up.member);
        let side = leaf_membership_oracle(&m, &x, &pt(&[0.2, 0.2, 0.3]), 1.2, 15, None).unwrap();
        assert!(!side.member);
        assert!((side.deviation - 0.1 * 2.4f64.powi(15)).abs() < 1e-6 * side.deviation);
    }
}
