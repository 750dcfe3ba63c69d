//! Differentiable Gaussian splatting and a reference triangle rasterizer.

mod grads;
mod mesh;
mod project;
mod raster;

pub use grads::RenderGrads;
pub use mesh::render_mesh;
pub use project::{project_gaussian, Footprint, Splat2D, DILATION};
pub use raster::{render, render_backward, render_with_stats, RenderStats, MAX_ETA, CUTOFF, TILE};
