//! Fixtures shared by the kernel benchmarks: catalog maps taken through
//! normalization and linearization once, plus deterministic sample points.

use std::sync::Arc;

use nalgebra::DVector;
use partlin::catalog;
use partlin::linearize::{linearize, Linearization, LinearizeConfig};
use partlin::pipeline::{normalize, PipelineConfig};
use partlin::{MapModel, MapRef};

/// Normalizes and linearizes `model` with default settings.
pub fn linearized(model: MapModel) -> Linearization {
    let flags = model.flags;
    let map: MapRef = Arc::new(model);
    let n = normalize(map, flags, &PipelineConfig::default()).expect("normalization");
    linearize(n, &LinearizeConfig::default()).expect("linearization")
}

/// Linearization of the three-dimensional polynomial example.
pub fn poly3() -> Linearization {
    linearized(catalog::poly3())
}

/// Linearization of the four-dimensional example with two unstable blocks.
pub fn twou4() -> Linearization {
    linearized(catalog::twou4())
}

/// A fixed point of `dim` coordinates with entries in `[-w, w]`.
pub fn sample_point(dim: usize, w: f64) -> DVector<f64> {
    DVector::from_fn(dim, |i, _| w * (0.37 + 0.53 * i as f64).sin())
}
