//! Differentiable 4D Gaussian splatting driven by pixel-level anchor alignment.
//!
//! The crate is organised bottom-up:
//!
//! * [`scene`] holds the value types (clouds, cameras, meshes, images, noise schedule).
//! * [`render`] splats a cloud with an analytic backward pass and rasterizes meshes.
//! * [`deform`] is the time-conditioned MLP that turns a static cloud into a 4D one.
//! * [`losses`] are the pixel-space alignment objectives.
//! * [`guidance`] is the score-distillation layer with mock and remote denoisers.
//! * [`focal`] recovers an anchor video's focal length by grid search.
//! * [`pipeline`] ties everything into the static and dynamic optimization stages.

// Validation uses `!(x > 0.0)` on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod deform;
pub mod error;
pub mod focal;
pub mod guidance;
pub mod losses;
pub mod pipeline;
pub mod render;
pub mod scene;

mod par;

pub use error::{Error, Result};
