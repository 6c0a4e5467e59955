//! JSON map specification files.
//!
//! ```json
//! {
//!   "name": "POLY3",
//!   "dims": 3,
//!   "blocks": [
//!     {"size": 1, "modulus": 0.5, "class": "stable"},
//!     {"size": 1, "modulus": 1.0, "class": "center"},
//!     {"size": 1, "modulus": 2.0, "class": "unstable"}
//!   ],
//!   "terms": [{"target": 0, "exponents": [1, 1, 0], "coefficient": "0.05"}],
//!   "alpha": 1.0, "delta_f": 0.25, "M": 1.0, "radius": 1.2,
//!   "flags": {"center_is_xc": true}
//! }
//! ```
//!
//! Coefficients are decimal strings. `envelopes` is optional; when absent
//! it is derived from the block moduli by [`default_envelopes`].

use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

use crate::blocks::{Block, BlockClass, Envelopes, SpectralStructure};
use crate::error::{Error, Result};
use crate::map::{HolderData, MapModel, NormalizationFlags, PolyTerm, Polynomial};

/// One monomial as written in a spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSpec {
    pub target: usize,
    pub exponents: Vec<u32>,
    pub coefficient: String,
}

/// Parsed contents of a map specification file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    #[serde(default = "default_name")]
    pub name: String,
    pub dims: usize,
    pub blocks: Vec<Block>,
    #[serde(default)]
    pub terms: Vec<TermSpec>,
    pub alpha: f64,
    pub delta_f: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub radius: f64,
    #[serde(default)]
    pub flags: NormalizationFlags,
    #[serde(default)]
    pub envelopes: Option<Envelopes>,
}

fn default_name() -> String {
    "custom".to_string()
}

/// Envelope constants placed strictly between the block moduli and 1.
pub fn default_envelopes(blocks: &[Block]) -> Envelopes {
    let stable: Vec<f64> = blocks
        .iter()
        .filter(|b| b.class == BlockClass::Stable)
        .map(|b| b.modulus)
        .collect();
    let unstable: Vec<f64> = blocks
        .iter()
        .filter(|b| b.class == BlockClass::Unstable)
        .map(|b| b.modulus)
        .collect();
    let s_min = stable.iter().cloned().fold(f64::INFINITY, f64::min);
    let s_max = stable.iter().cloned().fold(0.0, f64::max);
    let u_min = unstable.iter().cloned().fold(f64::INFINITY, f64::min);
    let u_max = unstable.iter().cloned().fold(0.0, f64::max);
    let s_min = if s_min.is_finite() { s_min } else { 0.5 };
    let u_min = if u_min.is_finite() { u_min } else { 2.0 };
    let u_max = if u_max > 0.0 { u_max } else { 2.0 };
    let lambda_s_plus = s_max + 0.2 * (1.0 - s_max);
    let lambda_u_minus = u_min - 0.25 * (u_min - 1.0);
    Envelopes {
        lambda_s_minus: 0.8 * s_min,
        lambda_s_plus,
        lambda_u_minus,
        lambda_u_plus: 1.5 * u_max,
        margin: 0.5 * (1.0 - lambda_s_plus).min(lambda_u_minus - 1.0),
        dichotomy_k: 1.0,
    }
}

impl MapSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::input(format!("map spec: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Builds the model with `A` block-diagonal (modulus times identity).
    pub fn build(&self) -> Result<MapModel> {
        let envelopes = self
            .envelopes
            .unwrap_or_else(|| default_envelopes(&self.blocks));
        let structure = SpectralStructure::from_blocks(&self.blocks, envelopes)?;
        if structure.dim() != self.dims {
            return Err(Error::input(format!(
                "blocks sum to {}, dims = {}",
                structure.dim(),
                self.dims
            )));
        }
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let coefficient: f64 = t.coefficient.trim().parse().map_err(|_| {
                Error::input(format!("coefficient `{}` is not a decimal", t.coefficient))
            })?;
            terms.push(PolyTerm {
                target: t.target,
                exponents: t.exponents.clone(),
                coefficient,
            });
        }
        let poly = Polynomial::new(self.dims, terms)?;
        MapModel::new(
            self.name.clone(),
            structure.clone(),
            structure.diagonal_matrix(),
            Arc::new(poly),
            HolderData {
                alpha: self.alpha,
                delta_f: self.delta_f,
                m: self.m,
            },
            self.radius,
            self.flags,
        )
    }
}
