//! The transfer map `P_u(x_cs)` solving the cohomology equation
//! `P_u(g x) A_u(x) = A_u(x_c) P_u(x)`.
//!
//! With the block-diagonal generator `Ã(x) = P_1(g x) A_u(x) P_1(x)^{-1}`,
//! each block limit `B_i(x) = lim 𝒜_i(0,n;x_c) 𝒜_i(n,0;x)` is summed as a
//! telescoping series and `P_u(x) = P_1(x_c)^{-1} B(x) P_1(x)`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::splitting::{frames_at, p1_from_frames, OrbitGenerators};
use super::{diag_block, CenterCocycle, CocycleBase};
use crate::error::{Error, Result};
use crate::map::MapRef;
use crate::numeric::{bit_key, linear_fit, spectral_norm, subspace_distance};

/// Parameters of the transfer-map computation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TransferOptions {
    /// Target accuracy of each `B_i`.
    pub tol: f64,
    /// Orbit length used on each side by the splitting power iterations.
    pub splitting_horizon: usize,
    /// Largest number of series terms.
    pub max_terms: usize,
    /// Hölder exponent of the splitting; fitted when `None`.
    pub beta_e: Option<f64>,
}

impl Default for TransferOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            splitting_horizon: 40,
            max_terms: 400,
            beta_e: None,
        }
    }
}

/// Transfer data at one base point.
#[derive(Debug, Clone, Serialize)]
pub struct TransferMap {
    pub base: Vec<f64>,
    pub p1: DMatrix<f64>,
    /// `P_1` at the center projection `(x_c, 0)`.
    pub p1_center: DMatrix<f64>,
    /// Block-diagonal `B(x_cs)`.
    pub b: DMatrix<f64>,
    pub pu: DMatrix<f64>,
    /// Number of series terms summed.
    pub truncation: usize,
    /// `C theta^N / (1 - theta)` at truncation, worst block.
    pub tail_bound: f64,
    /// Norms of the series terms per block.
    pub term_norms: Vec<Vec<f64>>,
    /// `|P_u(g x) A_u(x) - A_u(x_c) P_u(x)|`, when computed.
    pub cohomology_residual: Option<f64>,
}

/// Fitted Hölder exponent and constant.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HolderFit {
    pub exponent: f64,
    pub constant: f64,
}

/// Transfer-map solver for one map; caches `P_u` per base point.
pub struct TransferEngine {
    cocycle: CenterCocycle,
    opts: TransferOptions,
    beta_e: f64,
    thetas: Vec<f64>,
    cache: Mutex<HashMap<Vec<u64>, Arc<DMatrix<f64>>>>,
    centers: Mutex<HashMap<Vec<u64>, Arc<CenterSide>>>,
}

/// Hölder exponent `β̄` of the transfer map for contraction `tau1`, expansion
/// `tau2`, weight `rho`, base exponent `alpha` and slack `eps`.
pub fn holder_exponent_bound(tau1: f64, tau2: f64, rho: f64, alpha: f64, eps: f64) -> Result<f64> {
    if !(tau1 > 0.0 && tau2 > 0.0 && rho > 0.0) {
        return Err(Error::input("tau1, tau2 and rho must be positive"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Inadmissible {
            name: "alpha".into(),
            value: alpha,
            reason: "must lie in (0, 1]".into(),
        });
    }
    if rho * tau1 >= 1.0 {
        return Err(Error::Inadmissible {
            name: "rho*tau1".into(),
            value: rho * tau1,
            reason: "must be < 1".into(),
        });
    }
    let r2 = rho * tau2;
    let beta = if (r2 - 1.0).abs() <= 1e-12 {
        alpha - eps
    } else if r2 < 1.0 {
        alpha
    } else {
        (tau1.ln() + rho.ln()) / (tau1.ln() - tau2.ln()) * alpha
    };
    if !(beta > 0.0) {
        return Err(Error::Inadmissible {
            name: "beta".into(),
            value: beta,
            reason: "exponent bound must be positive (reduce eps)".into(),
        });
    }
    Ok(beta)
}

/// Fits the Hölder exponent of the splitting at a base point by log-log
/// regression over dyadic offsets. With a single unstable block the fit is
/// done on the generator `A_u` instead, whose regularity bounds that of the
/// block cocycle.
pub fn fit_beta_e(c: &CenterCocycle, x_cs: &DVector<f64>, horizon: usize) -> Result<HolderFit> {
    let ranges = c.map().structure().unstable_local_ranges();
    let dir = DVector::from_element(x_cs.len(), 1.0).normalize();
    let base_frames = if ranges.len() > 1 {
        Some(super::compute_invariant_splitting(c, x_cs, horizon)?.frames)
    } else {
        None
    };
    let base_gen = c.generator(x_cs)?;
    let mut hs = Vec::new();
    let mut ds = Vec::new();
    for j in 0..7 {
        let h = 0.1 * 0.5f64.powi(j);
        let y = x_cs + &dir * h;
        let d = match &base_frames {
            Some(fr) => {
                let other = super::compute_invariant_splitting(c, &y, horizon)?.frames;
                fr.iter()
                    .zip(&other)
                    .map(|(a, b)| subspace_distance(a, b))
                    .fold(0.0, f64::max)
            }
            None => spectral_norm(&(c.generator(&y)? - &base_gen)),
        };
        hs.push(h);
        ds.push(d);
    }
    if ds.iter().all(|d| *d < 1e-13) {
        return Ok(HolderFit {
            exponent: 1.0,
            constant: 0.0,
        });
    }
    let pairs: Vec<(f64, f64)> = hs
        .iter()
        .zip(&ds)
        .filter(|(_, d)| **d > 1e-15)
        .map(|(h, d)| (h.ln(), d.ln()))
        .collect();
    let (lx, ly): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let exponent = match linear_fit(&lx, &ly) {
        Some((slope, _)) => slope.clamp(0.05, 1.0),
        None => 1.0,
    };
    let constant = hs
        .iter()
        .zip(&ds)
        .map(|(h, d)| d / h.powf(exponent))
        .fold(0.0, f64::max);
    Ok(HolderFit { exponent, constant })
}

/// Series data along the center orbit of one `x_c`, shared by every base
/// point over it.
struct CenterSide {
    p1: DMatrix<f64>,
    /// Conjugated generators `P_1(g^{n+1}) A_u(g^n) P_1(g^n)^{-1}`.
    generators: Vec<DMatrix<f64>>,
}

impl TransferEngine {
    pub fn new(map: MapRef, opts: TransferOptions) -> Result<Self> {
        let s = map.structure().clone();
        if s.dim_u() == 0 {
            return Err(Error::input("transfer map needs an unstable part"));
        }
        let cocycle = CenterCocycle::unstable(map);
        let beta_e = match opts.beta_e {
            Some(b) => b,
            None => fit_beta_e(&cocycle, &DVector::zeros(cocycle.base_dim()), opts.splitting_horizon)?
                .exponent,
        };
        let env = s.envelopes;
        let mut thetas = Vec::new();
        for b in s.unstable_blocks() {
            let theta = (b.modulus + env.margin) / (b.modulus - env.margin)
                * env.lambda_s_plus.powf(beta_e);
            if !(theta < 1.0) {
                return Err(Error::Inadmissible {
                    name: "theta".into(),
                    value: theta,
                    reason: format!(
                        "transfer series rate (lambda+s)/(lambda-s)(lambda_s^+)^beta_E must be < 1 \
                         (lambda = {}, beta_E = {beta_e:.4})",
                        b.modulus
                    ),
                });
            }
            thetas.push(theta);
        }
        Ok(Self {
            cocycle,
            opts,
            beta_e,
            thetas,
            cache: Mutex::new(HashMap::new()),
            centers: Mutex::new(HashMap::new()),
        })
    }

    pub fn cocycle(&self) -> &CenterCocycle {
        &self.cocycle
    }

    pub fn beta_e(&self) -> f64 {
        self.beta_e
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn options(&self) -> TransferOptions {
        self.opts
    }

    fn center_of(&self, x_cs: &DVector<f64>) -> DVector<f64> {
        let s = self.cocycle.map().structure();
        let mut xc = x_cs.clone();
        for i in 0..s.dim_s() {
            xc[i] = 0.0;
        }
        xc
    }

    /// `P_u(x_cs)`, cached by the exact bit pattern of `x_cs`.
    pub fn pu(&self, x_cs: &DVector<f64>) -> Result<Arc<DMatrix<f64>>> {
        let key = bit_key(x_cs);
        if let Some(p) = self.cache.lock().unwrap().get(&key) {
            return Ok(p.clone());
        }
        let t = self.compute(x_cs)?;
        let p = Arc::new(t.pu);
        self.cache.lock().unwrap().insert(key, p.clone());
        Ok(p)
    }

    /// Center-side data with at least `len` generators, cached by `x_c`.
    fn center_side(&self, xc: &DVector<f64>, len: usize) -> Result<Arc<CenterSide>> {
        let key = bit_key(xc);
        if let Some(c) = self.centers.lock().unwrap().get(&key) {
            if c.generators.len() >= len {
                return Ok(c.clone());
            }
        }
        let s = self.cocycle.map().structure();
        let ranges = s.unstable_local_ranges();
        let du = s.dim_u();
        let multi = ranges.len() > 1;
        let h = if multi { self.opts.splitting_horizon as i64 } else { 0 };
        let hi = len as i64;
        let g = OrbitGenerators::new(&self.cocycle, self.cocycle.orbit(xc, -h, hi + h + 1)?)?;
        let p1_at = |j: i64| -> Result<DMatrix<f64>> {
            if multi {
                p1_from_frames(&frames_at(&g, &ranges, j, h)?, &ranges)
            } else {
                Ok(DMatrix::identity(du, du))
            }
        };
        let mut frames = vec![p1_at(0)?];
        let mut generators = Vec::with_capacity(len);
        for n in 0..len {
            frames.push(p1_at(n as i64 + 1)?);
            generators.push(super::conjugated_generator(g.gen(n as i64), &frames[n], &frames[n + 1])?);
        }
        let c = Arc::new(CenterSide {
            p1: frames.swap_remove(0),
            generators,
        });
        self.centers.lock().unwrap().insert(key, c.clone());
        Ok(c)
    }

    /// Full transfer data at `x_cs` (without the cohomology residual).
    pub fn compute(&self, x_cs: &DVector<f64>) -> Result<TransferMap> {
        let s = self.cocycle.map().structure().clone();
        let ranges = s.unstable_local_ranges();
        let du = s.dim_u();
        let xc = self.center_of(x_cs);
        let multi = ranges.len() > 1;
        let h = if multi { self.opts.splitting_horizon as i64 } else { 0 };
        let on_center = x_cs.rows(0, s.dim_s()).iter().all(|v| *v == 0.0);

        let chunk = 64i64;
        let mut hi = chunk;
        let mut gb = OrbitGenerators::new(&self.cocycle, self.cocycle.orbit(x_cs, -h, hi + h + 1)?)?;
        let mut fb: Vec<DMatrix<f64>> = Vec::new();
        let p1_at = |g: &OrbitGenerators, j: i64| -> Result<DMatrix<f64>> {
            if multi {
                p1_from_frames(&frames_at(g, &ranges, j, h)?, &ranges)
            } else {
                Ok(DMatrix::identity(du, du))
            }
        };
        fb.push(p1_at(&gb, 0)?);
        let mut center = self.center_side(&xc, chunk as usize)?;
        let p1 = fb[0].clone();
        let p1_center = center.p1.clone();
        if on_center {
            return Ok(TransferMap {
                base: x_cs.iter().cloned().collect(),
                p1,
                p1_center,
                b: DMatrix::identity(du, du),
                pu: DMatrix::identity(du, du),
                truncation: 0,
                tail_bound: 0.0,
                term_norms: vec![Vec::new(); ranges.len()],
                cohomology_residual: None,
            });
        }

        let tol = self.opts.tol;
        let nb = ranges.len();
        let mut b_blocks: Vec<DMatrix<f64>> =
            ranges.iter().map(|r| DMatrix::identity(r.len(), r.len())).collect();
        let mut d_prod: Vec<DMatrix<f64>> = b_blocks.clone();
        let mut c_inv: Vec<DMatrix<f64>> = b_blocks.clone();
        let mut c_est = vec![0.0f64; nb];
        let mut done = vec![false; nb];
        let mut term_norms = vec![Vec::new(); nb];
        let mut tail = vec![0.0f64; nb];
        let mut n = 0usize;
        while !done.iter().all(|d| *d) {
            if n >= self.opts.max_terms {
                let residual = term_norms
                    .iter()
                    .filter_map(|t: &Vec<f64>| t.last().cloned())
                    .fold(0.0, f64::max);
                return Err(Error::NoConvergence {
                    what: "transfer series".into(),
                    iterations: n,
                    residual,
                });
            }
            let ni = n as i64;
            if ni + 1 > hi {
                hi += chunk;
                gb = OrbitGenerators::new(&self.cocycle, self.cocycle.orbit(x_cs, -h, hi + h + 1)?)?;
            }
            if n >= center.generators.len() {
                center = self.center_side(&xc, center.generators.len() + chunk as usize)?;
            }
            fb.push(p1_at(&gb, ni + 1)?);
            let tb = super::conjugated_generator(gb.gen(ni), &fb[n], &fb[n + 1])?;
            let tc = &center.generators[n];
            for (i, r) in ranges.iter().enumerate() {
                let ab = diag_block(&tb, r.clone());
                let ac = diag_block(&tc, r.clone());
                let ac_inv = ac
                    .clone()
                    .try_inverse()
                    .ok_or_else(|| Error::numeric("singular block generator"))?;
                let next_c_inv = &c_inv[i] * ac_inv;
                if !done[i] {
                    let term = &next_c_inv * (&ab - &ac) * &d_prod[i];
                    let norm = spectral_norm(&term);
                    b_blocks[i] += &term;
                    term_norms[i].push(norm);
                    let theta = self.thetas[i];
                    c_est[i] = c_est[i].max(norm / theta.powi(n as i32));
                    tail[i] = c_est[i] * theta.powi(n as i32 + 1) / (1.0 - theta);
                    if n >= 2 && tail[i] <= tol / 2.0 && norm <= tol / 2.0 {
                        done[i] = true;
                    }
                }
                d_prod[i] = &ab * &d_prod[i];
                c_inv[i] = next_c_inv;
            }
            n += 1;
        }
        let mut b = DMatrix::zeros(du, du);
        for (i, r) in ranges.iter().enumerate() {
            b.view_mut((r.start, r.start), (r.len(), r.len()))
                .copy_from(&b_blocks[i]);
        }
        let p1c_inv = p1_center
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::numeric("singular P_1 at center point"))?;
        let pu = p1c_inv * &b * &p1;
        Ok(TransferMap {
            base: x_cs.iter().cloned().collect(),
            p1,
            p1_center,
            b,
            pu,
            truncation: n,
            tail_bound: tail.iter().cloned().fold(0.0, f64::max),
            term_norms,
            cohomology_residual: None,
        })
    }

    /// `|P_u(g x) A_u(x) - A_u(x_c) P_u(x)|` at `x_cs`.
    pub fn cohomology_residual(&self, x_cs: &DVector<f64>) -> Result<f64> {
        let here = self.pu(x_cs)?;
        let gx = self.cocycle.step(x_cs, true)?;
        let next = self.pu(&gx)?;
        let a = self.cocycle.generator(x_cs)?;
        let ac = self.cocycle.generator(&self.center_of(x_cs))?;
        Ok(spectral_norm(&(next.as_ref() * a - ac * here.as_ref())))
    }
}

/// `B_i(x_cs)` for the `i`-th unstable block (0-based) together with the
/// number of series terms used.
pub fn transfer_map_b(
    engine: &TransferEngine,
    x_cs: &DVector<f64>,
    block: usize,
) -> Result<(DMatrix<f64>, usize)> {
    let ranges = engine.cocycle.map().structure().unstable_local_ranges();
    let r = ranges
        .get(block)
        .ok_or_else(|| Error::input(format!("no unstable block {block}")))?
        .clone();
    let t = engine.compute(x_cs)?;
    Ok((diag_block(&t.b, r), t.truncation))
}

/// Transfer data at `x_cs` including the cohomology residual.
pub fn assemble_pu(engine: &TransferEngine, x_cs: &DVector<f64>) -> Result<TransferMap> {
    if engine.cocycle.base() != CocycleBase::CenterStable {
        return Err(Error::input("transfer map needs the unstable cocycle"));
    }
    let mut t = engine.compute(x_cs)?;
    engine
        .cache
        .lock()
        .unwrap()
        .insert(bit_key(x_cs), Arc::new(t.pu.clone()));
    t.cohomology_residual = Some(engine.cohomology_residual(x_cs)?);
    Ok(t)
}
