//! The one-dimensional contraction without a differentiable linearization,
//! next to a smooth contraction for contrast.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::blocks::{Block, BlockClass, Envelopes, SpectralStructure};
use crate::catalog;
use crate::error::Result;
use crate::linearize::{LinearizeConfig, StableSideConjugacy};
use crate::map::{DiscreteMap, HolderData, MapModel, MapRef, NormalizationFlags, Polynomial};
use crate::numeric::linear_fit;

/// Settings of the demonstration.
#[derive(Debug, Clone, Serialize)]
pub struct DemoConfig {
    pub mu: f64,
    /// Iterations of the truncated limit `ℓ^{-n} g^n`.
    pub depth: usize,
    /// Dyadic levels `j` of the scales `2^{-j}` used for the remainder.
    pub scale_levels: Vec<i32>,
    /// Consecutive scales per local fit.
    pub window: usize,
    pub threshold: f64,
    /// Exponent of the sampled Hölder quotient of the derivative.
    pub holder_alpha: f64,
    pub holder_levels: Vec<i32>,
    /// Levels of the finite-difference steps for the derivative at 0.
    pub fd_levels: Vec<i32>,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            mu: catalog::CEX1_MU,
            depth: 40,
            scale_levels: (3..=60).collect(),
            window: 4,
            threshold: 1.05,
            holder_alpha: 0.1,
            holder_levels: (1..=400).step_by(3).collect(),
            fd_levels: vec![10, 20, 40, 80, 160, 320],
        }
    }
}

/// Remainder exponents of one map across scales.
#[derive(Debug, Clone, Serialize)]
pub struct ScaleProfile {
    pub map: String,
    /// `(scale, |ψ_n^{-1}(s) - s|)`.
    pub remainders: Vec<(f64, f64)>,
    /// `(largest scale of the window, local slope)`.
    pub local_slopes: Vec<(f64, f64)>,
    /// Slope over the default differentiability scales `2^{-3} .. 2^{-10}`.
    pub coarse_slope: Option<f64>,
    pub min_local_slope: f64,
    /// Every local slope is at least the threshold.
    pub stays_above: bool,
}

/// Outcome of the demonstration; report-only.
#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleReport {
    pub config: DemoConfig,
    pub derivative_at_zero: f64,
    /// `(h, (F(h) - F(-h)) / 2h)`.
    pub fd_derivatives: Vec<(f64, f64)>,
    /// Analytic `DF(0) = μ` and the finite differences approach it.
    pub derivative_confirmed: bool,
    /// `(j, |DF(2^{-j}) - DF(2^{-j-1})| / (2^{-j-1})^α)`.
    pub holder_quotients: Vec<(i32, f64)>,
    /// The quotient keeps growing over the finest levels.
    pub holder_diverges: bool,
    pub counterexample: ScaleProfile,
    pub contrast: ScaleProfile,
}

/// `F(x) = 0.5 x + 0.05 x^2` (cut off at radius 1.2).
pub fn contrast_map() -> Result<MapModel> {
    let s = SpectralStructure::from_blocks(
        &[Block {
            size: 1,
            modulus: 0.5,
            class: BlockClass::Stable,
        }],
        Envelopes {
            lambda_s_minus: 0.25,
            lambda_s_plus: 0.75,
            lambda_u_minus: 1.5,
            lambda_u_plus: 3.0,
            margin: 0.0,
            dichotomy_k: 1.0,
        },
    )?;
    MapModel::new(
        "SMOOTH1",
        s,
        DMatrix::from_element(1, 1, 0.5),
        Arc::new(Polynomial::new(1, vec![])?.term(0, &[2], 0.05)),
        HolderData {
            alpha: 1.0,
            delta_f: 0.1,
            m: 0.1,
        },
        catalog::CATALOG_RADIUS,
        NormalizationFlags::default(),
    )
}

fn profile(map: MapModel, cfg: &DemoConfig) -> Result<ScaleProfile> {
    let name = map.name.clone();
    let model: MapRef = Arc::new(map);
    let side = StableSideConjugacy::forced(model, &LinearizeConfig::default())?;
    let mut remainders = Vec::with_capacity(cfg.scale_levels.len());
    for &j in &cfg.scale_levels {
        let s = 0.5f64.powi(j);
        let y = side.psi_inverse_truncated(&DVector::from_element(1, s), cfg.depth)?;
        remainders.push((s, (y[0] - s).abs()));
    }
    let logs: Vec<(f64, f64)> = remainders.iter().map(|(s, r)| (s.ln(), r.ln())).collect();
    let mut local_slopes = Vec::new();
    for w in logs.windows(cfg.window) {
        let (xs, ys): (Vec<f64>, Vec<f64>) = w.iter().cloned().unzip();
        if let Some((slope, _)) = linear_fit(&xs, &ys) {
            local_slopes.push((xs[0].exp(), slope));
        }
    }
    let (cx, cy): (Vec<f64>, Vec<f64>) = remainders
        .iter()
        .filter(|(s, r)| *s >= 0.5f64.powi(10) && *s <= 0.5f64.powi(3) && *r > 0.0)
        .map(|(s, r)| (s.ln(), r.ln()))
        .unzip();
    let min_local_slope = local_slopes.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    Ok(ScaleProfile {
        map: name,
        remainders,
        coarse_slope: linear_fit(&cx, &cy).map(|f| f.0),
        stays_above: min_local_slope >= cfg.threshold,
        min_local_slope,
        local_slopes,
    })
}

/// Derivative checks, Hölder quotients of the derivative near 0 and the
/// scale profile of the truncated limit, for the counterexample and for
/// [`contrast_map`].
pub fn counterexample_demo(cfg: &DemoConfig) -> Result<CounterexampleReport> {
    let m = catalog::cex1_with(cfg.mu)?;
    let df = |x: f64| -> Result<f64> { Ok(m.jacobian(&DVector::from_element(1, x))?[(0, 0)]) };
    let f = |x: f64| -> Result<f64> { Ok(m.eval(&DVector::from_element(1, x))?[0]) };

    let derivative_at_zero = df(0.0)?;
    let mut fd_derivatives = Vec::new();
    for &j in &cfg.fd_levels {
        let h = 0.5f64.powi(j);
        fd_derivatives.push((h, (f(h)? - f(-h)?) / (2.0 * h)));
    }
    let errors: Vec<f64> = fd_derivatives.iter().map(|(_, d)| (d - cfg.mu).abs()).collect();
    let derivative_confirmed = derivative_at_zero == cfg.mu
        && errors.windows(2).all(|w| w[1] < w[0])
        && errors.last().map_or(false, |e| *e < 0.01);

    let mut holder_quotients = Vec::new();
    for &j in &cfg.holder_levels {
        let (a, b) = (0.5f64.powi(j), 0.5f64.powi(j + 1));
        holder_quotients.push((j, (df(a)? - df(b)?).abs() / (a - b).powf(cfg.holder_alpha)));
    }
    let tail = &holder_quotients[holder_quotients.len().saturating_sub(10)..];
    let smallest = holder_quotients.iter().map(|q| q.1).fold(f64::INFINITY, f64::min);
    let holder_diverges = tail.windows(2).all(|w| w[1].1 > w[0].1)
        && tail.last().map_or(false, |q| q.1 > 100.0 * smallest);

    Ok(CounterexampleReport {
        derivative_at_zero,
        fd_derivatives,
        derivative_confirmed,
        holder_quotients,
        holder_diverges,
        counterexample: profile(m.clone(), cfg)?,
        contrast: profile(contrast_map()?, cfg)?,
        config: cfg.clone(),
    })
}
