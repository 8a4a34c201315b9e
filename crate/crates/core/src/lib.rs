//! Neural differential manifolds at desk scale.
//!
//! A stack of invertible affine-coupling layers carries points through a
//! sequence of coordinate charts. Each layer owns a metric net that assigns a
//! Riemannian metric `g = L Lᵀ + εI` to its incoming chart. Training minimizes
//! a task loss plus a weighted penalty on squared Ricci scalar and on the
//! variance of the volume element `√det g`.
//!
//! All arithmetic that needs gradients runs on the reverse-mode [`ad::Tape`].
//! Curvature uses central-difference stencils of metric evaluations, so the
//! same stencil built on the tape gives exact reverse-mode gradients of the
//! discretized curvature.

pub mod ad;
pub mod coupling;
pub mod geometry;
pub mod harness;
pub mod losses;
pub mod mlp;
pub mod optim;

mod error;

pub use error::{Error, Result};
