//! Validation of the spectral chain and sampled checks of the Hölder data.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::blocks::{BlockClass, SpectralStructure};
use crate::map::{DiscreteMap, MapModel};
use crate::numeric::spectral_norm;

/// Number of sampled points for the derivative checks.
const SAMPLES: usize = 200;
/// Relative tolerance when comparing eigenvalue moduli to declared moduli.
const MODULUS_TOL: f64 = 1e-10;

/// Which hyperbolicity profile the structure describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Stable, center and unstable parts all present.
    PartiallyHyperbolic,
    /// Only stable blocks.
    PurelyStable,
    /// Any other combination (rejected).
    Degenerate,
}

/// Sampled derivative statistics.
#[derive(Debug, Clone, Serialize)]
pub struct SampledBounds {
    pub max_df_norm: f64,
    pub max_holder_quotient: f64,
    pub max_stable_norm: f64,
    pub min_unstable_conorm: f64,
    pub center_norm_range: (f64, f64),
}

/// Outcome of [`validate_spectral_gaps`].
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub profile: Profile,
    /// Structural violations; the model is rejected when non-empty.
    pub violations: Vec<String>,
    /// Sampled inequalities that failed; reported, never certified.
    pub warnings: Vec<String>,
    pub sampled: SampledBounds,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn block_eigen_moduli(m: &DMatrix<f64>) -> Vec<f64> {
    m.complex_eigenvalues().iter().map(|z| z.norm()).collect()
}

/// Checks the strict chain of moduli, the center spectrum, the block moduli
/// of `A`, and samples `A + Df` against the declared envelopes.
pub fn validate_spectral_gaps(structure: &SpectralStructure, model: &MapModel) -> ValidationReport {
    let mut violations = Vec::new();
    let mut warnings = Vec::new();
    let env = structure.envelopes;
    let stable = structure.stable_blocks();
    let unstable = structure.unstable_blocks();
    let dc = structure.dim_c();

    let profile = if !stable.is_empty() && dc > 0 && !unstable.is_empty() {
        Profile::PartiallyHyperbolic
    } else if !stable.is_empty() && dc == 0 && unstable.is_empty() {
        Profile::PurelyStable
    } else {
        Profile::Degenerate
    };
    if profile == Profile::Degenerate {
        violations.push(format!(
            "need 1 <= k < p < d: {} stable blocks, center dimension {}, {} unstable blocks",
            stable.len(),
            dc,
            unstable.len()
        ));
    }

    let mut chain: Vec<(String, f64)> = vec![("0".into(), 0.0)];
    chain.push(("lambda_s^-".into(), env.lambda_s_minus));
    for (i, b) in stable.iter().enumerate() {
        chain.push((format!("lambda_{}", i + 1), b.modulus));
    }
    chain.push(("lambda_s^+".into(), env.lambda_s_plus));
    chain.push(("1".into(), 1.0));
    if !unstable.is_empty() {
        chain.push(("lambda_u^-".into(), env.lambda_u_minus));
        for (i, b) in unstable.iter().enumerate() {
            chain.push((format!("lambda_{}", stable.len() + i + 1), b.modulus));
        }
        chain.push(("lambda_u^+".into(), env.lambda_u_plus));
    }
    for w in chain.windows(2) {
        if !(w[0].1 < w[1].1) {
            violations.push(format!(
                "chain violated: {} = {} is not < {} = {}",
                w[0].0, w[0].1, w[1].0, w[1].1
            ));
        }
    }
    if env.margin < 0.0 {
        violations.push(format!("margin {} is negative", env.margin));
    }
    if env.dichotomy_k < 1.0 {
        violations.push(format!("dichotomy constant K = {} < 1", env.dichotomy_k));
    }

    let a = model.linear_part();
    let blocks = structure.blocks();
    let mut start = 0;
    let mut ranges = Vec::new();
    for b in &blocks {
        ranges.push((start..start + b.size, b.clone()));
        start += b.size;
    }
    for (i, (ri, _)) in ranges.iter().enumerate() {
        for (j, (rj, _)) in ranges.iter().enumerate() {
            if i == j {
                continue;
            }
            let off = a.view((ri.start, rj.start), (ri.len(), rj.len())).abs().max();
            if off != 0.0 {
                violations.push(format!(
                    "linear part is not block-diagonal: block ({i},{j}) has entry {off}"
                ));
            }
        }
    }
    for (r, b) in &ranges {
        let sub = a.view((r.start, r.start), (r.len(), r.len())).into_owned();
        for m in block_eigen_moduli(&sub) {
            let target = if b.class == BlockClass::Center { 1.0 } else { b.modulus };
            if (m - target).abs() > MODULUS_TOL * target {
                let what = match b.class {
                    BlockClass::Center => "center eigenvalue modulus".to_string(),
                    _ => format!("{:?} block eigenvalue modulus", b.class).to_lowercase(),
                };
                violations.push(format!("{what} {m} differs from declared {target}"));
            }
        }
    }

    let sampled = sample_bounds(structure, model, &mut warnings);
    ValidationReport {
        profile,
        violations,
        warnings,
        sampled,
    }
}

fn sample_bounds(
    structure: &SpectralStructure,
    model: &MapModel,
    warnings: &mut Vec<String>,
) -> SampledBounds {
    let env = structure.envelopes;
    let d = structure.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let radius = model.radius;
    let mut pts = Vec::with_capacity(SAMPLES);
    for _ in 0..SAMPLES {
        let v = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
        let scale = radius * rng.gen_range(0.0..1.0f64);
        pts.push(v.normalize() * scale);
    }
    let mut max_df: f64 = 0.0;
    let mut max_q: f64 = 0.0;
    let mut max_s: f64 = 0.0;
    let mut min_u = f64::INFINITY;
    let mut c_lo = f64::INFINITY;
    let mut c_hi: f64 = 0.0;
    let mut dfs = Vec::with_capacity(SAMPLES);
    for x in &pts {
        let df = match model.nonlinear_jacobian(x) {
            Ok(j) => j,
            Err(e) => {
                warnings.push(format!("Jacobian failed at a sample: {e}"));
                continue;
            }
        };
        max_df = max_df.max(spectral_norm(&df));
        let full = model.linear_part() + &df;
        if structure.dim_s() > 0 {
            let r = structure.s_range();
            let b = full.view((r.start, r.start), (r.len(), r.len())).into_owned();
            max_s = max_s.max(spectral_norm(&b));
        }
        if structure.dim_u() > 0 {
            let r = structure.u_range();
            let b = full.view((r.start, r.start), (r.len(), r.len())).into_owned();
            let sv = b.singular_values();
            min_u = min_u.min(sv.iter().cloned().fold(f64::INFINITY, f64::min));
        }
        if structure.dim_c() > 0 {
            let r = structure.c_range();
            let b = full.view((r.start, r.start), (r.len(), r.len())).into_owned();
            let sv = b.singular_values();
            c_lo = c_lo.min(sv.iter().cloned().fold(f64::INFINITY, f64::min));
            c_hi = c_hi.max(sv.iter().cloned().fold(0.0, f64::max));
        }
        dfs.push((x.clone(), df));
    }
    let alpha = model.holder.alpha;
    for i in 0..dfs.len() {
        for j in (i + 1)..dfs.len().min(i + 20) {
            let dist = (&dfs[i].0 - &dfs[j].0).norm();
            if dist > 1e-12 {
                let q = spectral_norm(&(&dfs[i].1 - &dfs[j].1)) / dist.powf(alpha);
                max_q = max_q.max(q);
            }
        }
    }
    if max_df > model.holder.delta_f {
        warnings.push(format!(
            "sampled |Df| = {max_df:.6} exceeds declared delta_f = {}",
            model.holder.delta_f
        ));
    }
    if max_q > model.holder.m {
        warnings.push(format!(
            "sampled Hölder quotient {max_q:.6} exceeds declared M = {}",
            model.holder.m
        ));
    }
    if structure.dim_s() > 0 && max_s >= env.lambda_s_plus {
        warnings.push(format!(
            "sampled stable norm {max_s:.6} >= lambda_s^+ = {}",
            env.lambda_s_plus
        ));
    }
    if structure.dim_u() > 0 && min_u <= env.lambda_u_minus {
        warnings.push(format!(
            "sampled unstable conorm {min_u:.6} <= lambda_u^- = {}",
            env.lambda_u_minus
        ));
    }
    if structure.dim_c() > 0 && (c_lo < 1.0 - env.margin || c_hi > 1.0 + env.margin) {
        warnings.push(format!(
            "sampled center range [{c_lo:.6}, {c_hi:.6}] leaves [1 - margin, 1 + margin] with margin {}",
            env.margin
        ));
    }
    SampledBounds {
        max_df_norm: max_df,
        max_holder_quotient: max_q,
        max_stable_norm: max_s,
        min_unstable_conorm: if min_u.is_finite() { min_u } else { 0.0 },
        center_norm_range: if c_lo.is_finite() { (c_lo, c_hi) } else { (1.0, 1.0) },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::{Block, Envelopes};
    use crate::catalog;
    use crate::map::{HolderData, NormalizationFlags, Zero};
    use std::sync::Arc;

    #[test]
    fn catalog_structures_pass() {
        for m in catalog::builtin_test_maps() {
            let r = validate_spectral_gaps(m.structure(), &m);
            assert!(r.passed(), "{}: {:?}", m.name, r.violations);
        }
        let c = catalog::cex1();
        assert_eq!(validate_spectral_gaps(c.structure(), &c).profile, Profile::PurelyStable);
    }

    #[test]
    fn unstable_block_below_one_is_rejected() {
        let s = SpectralStructure::from_blocks(
            &[
                Block { size: 1, modulus: 0.5, class: BlockClass::Stable },
                Block { size: 1, modulus: 1.0, class: BlockClass::Center },
                Block { size: 1, modulus: 0.9, class: BlockClass::Unstable },
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
        .unwrap();
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 1.0, 0.9]));
        let m = MapModel::new(
            "bad",
            s.clone(),
            a,
            Arc::new(Zero(3)),
            HolderData { alpha: 1.0, delta_f: 0.0, m: 0.0 },
            1.0,
            NormalizationFlags::default(),
        )
        .unwrap();
        let r = validate_spectral_gaps(&s, &m);
        assert!(!r.passed());
        assert!(r.violations.iter().any(|v| v.contains("lambda_2 = 0.9")), "{:?}", r.violations);
    }
}
