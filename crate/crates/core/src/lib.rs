//! Invariant foliations, linear cocycle reduction and differentiable
//! linearization of maps `F(x) = A x + f(x)` near a partially hyperbolic
//! fixed point.
//!
//! The crate is organized bottom-up:
//!
//! * [`blocks`], [`map`], [`catalog`], [`spec_file`], [`spectral`]: map
//!   models, block splittings and the built-in test maps.
//! * [`cocycle`]: cocycle products along center orbits, dichotomy fits,
//!   invariant splittings and the transfer map `P_u`.
//! * [`lp`]: Lyapunov-Perron solvers for the unstable and stable foliations
//!   and the backward-orbit leaf oracle.
//! * [`pipeline`]: center manifold, tangent-frame extension, manifold and
//!   foliation straightening, and the composed normalization.
//! * [`linearize`]: semi-decoupling, cocycle reduction, fiber
//!   linearization, the stable-side conjugacy and the full conjugacy.
//! * [`verify`]: residual grids, exponent fits and the report types.

pub mod blocks;
pub mod catalog;
pub mod cocycle;
pub mod cutoff;
pub mod error;
pub mod linearize;
pub mod lp;
pub mod map;
pub mod numeric;
pub mod pipeline;
pub mod spec_file;
pub mod spectral;
pub mod verify;

pub use blocks::{Block, BlockClass, Envelopes, Projection, SpectralStructure};
pub use error::{Error, Result};
pub use map::{DiscreteMap, HolderData, MapModel, MapRef, NormalizationFlags};
