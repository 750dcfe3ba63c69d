//! Domain value types shared by every other module.

mod camera;
mod cloud;
mod image;
mod mesh;
mod schedule;

pub use camera::Camera;
pub use cloud::{
    covariance_of, quat_matrix_vjp, quat_multiply, quat_normalize_vjp, rotation_matrix, sigmoid,
    validate_cloud, GaussianCloud, Violation,
};
pub use image::{ImageBuffer, ImageGrad, RgbPlane, VideoClip};
pub use mesh::TriMesh;
pub use schedule::DiffusionSchedule;
pub(crate) use image::normalized_time;
