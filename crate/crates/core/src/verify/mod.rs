//! Quantitative checks of every construction: conjugacy residual grids,
//! differentiability exponent fits, foliation and Lyapunov-Perron oracles,
//! cocycle checks, the non-smooth counterexample and the report types.
//!
//! Each check returns a typed result; [`suite::run_suite`] turns them into
//! [`CheckRecord`]s and CSV [`Table`]s. Grids and random directions are
//! seeded, so two runs with the same configuration give identical tables.

mod checks;
mod demo;
mod fit;
pub mod suite;

pub use checks::{
    center_fixing, chart_identity_check, cohomology_check, conjugacy_residual_grid, fiber_conjugacy_check,
    foliation_invariance_check, holder_calculator_check, jacobian_fd_check, lp_orbit_consistency_check,
    reduced_cocycle_check, reduced_map, stable_invariance_check, ChartIdentity, CohomologyCheck,
    FiberConjugacy, FoliationCheck, HolderCase, LeafSample, ReducedCocycleCheck, ResidualStats,
};
pub use demo::{counterexample_demo, contrast_map, CounterexampleReport, DemoConfig};
pub use fit::{differentiability_fit, jet_continuity, DirectionFit, ExponentFit, JetContinuity};
pub use suite::{run_scope, run_suite, Scope, SuiteOutput, VerifyConfig};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::numeric::fmt17;
use crate::pipeline::lattice;

/// One measured criterion.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    /// Acceptance criterion label (`C1` .. `C12`, or `aux` for supporting
    /// checks).
    pub criterion: String,
    pub name: String,
    pub map: String,
    pub grid: String,
    /// Largest residual or deviation, when the check measures one.
    pub measured: Option<f64>,
    pub threshold: Option<f64>,
    /// Fitted exponent and its spread over directions.
    pub exponent: Option<f64>,
    pub exponent_spread: Option<f64>,
    /// `[agreeing, total]` oracle verdicts.
    pub oracle_agreement: Option<[usize; 2]>,
    pub passed: bool,
    /// Report-only records never fail a run.
    pub gating: bool,
    pub runtime_s: f64,
    pub detail: String,
}

impl CheckRecord {
    pub fn new(criterion: &str, name: &str, map: &str) -> Self {
        Self {
            criterion: criterion.into(),
            name: name.into(),
            map: map.into(),
            grid: String::new(),
            measured: None,
            threshold: None,
            exponent: None,
            exponent_spread: None,
            oracle_agreement: None,
            passed: false,
            gating: true,
            runtime_s: 0.0,
            detail: String::new(),
        }
    }

    /// Sets `measured`, `threshold` and `passed = measured <= threshold`.
    pub fn bounded(mut self, measured: f64, threshold: f64) -> Self {
        self.measured = Some(measured);
        self.threshold = Some(threshold);
        self.passed = measured <= threshold;
        self
    }

    pub fn grid(mut self, grid: impl Into<String>) -> Self {
        self.grid = grid.into();
        self
    }

    pub fn detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

/// Tolerances, truncations and seeds of a run.
#[derive(Debug, Clone, Serialize)]
pub struct Fingerprint {
    pub seed: u64,
    pub limit_tol: f64,
    pub limit_horizon: usize,
    pub lp_truncation: usize,
    pub lp_rho: Option<f64>,
    pub transfer_tol: f64,
    pub grid_points: usize,
    pub grid_half_width: f64,
    pub fit_threshold: f64,
    pub noise_floor: f64,
    pub version: String,
}

/// Per-criterion records plus the run fingerprint.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub map: String,
    pub fingerprint: Fingerprint,
    pub records: Vec<CheckRecord>,
}

impl VerificationReport {
    /// Whether every gating record passed.
    pub fn passed(&self) -> bool {
        self.records.iter().filter(|r| r.gating).all(|r| r.passed)
    }

    pub fn failures(&self) -> Vec<&CheckRecord> {
        self.records.iter().filter(|r| r.gating && !r.passed).collect()
    }
}

/// A CSV table, one observation per row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Table whose leading columns are the coordinates `prefix_0 ..`.
    pub fn with_point(name: &str, prefix: &str, dim: usize, rest: &[&str]) -> Self {
        let mut columns: Vec<String> = (0..dim).map(|i| format!("{prefix}_{i}")).collect();
        columns.extend(rest.iter().map(|c| c.to_string()));
        Self {
            name: name.into(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width of {}", self.name);
        self.rows.push(row);
    }

    /// Header line plus one line per row.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

/// Cell for a float, 17 significant digits.
pub fn num(x: f64) -> String {
    fmt17(x)
}

/// Cells for the entries of a vector.
pub fn nums(v: &DVector<f64>) -> Vec<String> {
    v.iter().map(|x| fmt17(*x)).collect()
}

pub fn flag(b: bool) -> String {
    if b { "true" } else { "false" }.into()
}

/// Points per axis giving about `points^3` grid points in dimension `dim`.
pub fn points_per_axis(points: usize, dim: usize) -> usize {
    if dim == 0 {
        return 1;
    }
    let total = (points as f64).powi(3);
    (total.powf(1.0 / dim as f64).round() as usize).max(2)
}

/// Uniform lattice of about `points^3` points on `[-w, w]^dim`.
pub fn inner_grid(dim: usize, points: usize, half_width: f64) -> Vec<DVector<f64>> {
    lattice(dim, points_per_axis(points, dim), half_width)
}

/// `count` unit vectors in `R^dim`, drawn uniformly from the cube and
/// normalized, from a fixed seed.
pub fn seeded_directions(dim: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            out.push(v / n);
        }
    }
    out
}

/// `count` points drawn uniformly from `[-w, w]^dim` with a fixed seed.
pub fn seeded_points(dim: usize, count: usize, half_width: f64, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| DVector::from_fn(dim, |_, _| rng.gen_range(-half_width..half_width)))
        .collect()
}

/// Compares two sets of tables by name; returns the names whose CSV text
/// differs (or that exist in only one set).
pub fn table_differences(a: &[Table], b: &[Table]) -> Vec<String> {
    let mut out = Vec::new();
    for t in a {
        match b.iter().find(|u| u.name == t.name) {
            Some(u) if u.to_csv() == t.to_csv() => {}
            _ => out.push(t.name.clone()),
        }
    }
    for u in b {
        if !a.iter().any(|t| t.name == u.name) {
            out.push(u.name.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes_follow_the_cube_budget() {
        assert_eq!(points_per_axis(10, 3), 10);
        assert_eq!(points_per_axis(10, 4), 6);
        assert_eq!(inner_grid(3, 10, 0.2).len(), 1000);
    }

    #[test]
    fn seeded_draws_repeat() {
        assert_eq!(seeded_directions(3, 20, 5), seeded_directions(3, 20, 5));
        assert_ne!(seeded_directions(3, 20, 5), seeded_directions(3, 20, 6));
        for v in seeded_directions(4, 20, 1) {
            assert!((v.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec![num(0.5), flag(true)]);
        assert_eq!(t.to_csv(), "a,b\n5.0000000000000000e-1,true\n");
        let mut u = t.clone();
        assert!(table_differences(&[t.clone()], &[u.clone()]).is_empty());
        u.rows[0][1] = flag(false);
        assert_eq!(table_differences(&[t], &[u]), vec!["t".to_string()]);
    }
}
