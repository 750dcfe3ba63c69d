use nalgebra::{Matrix3, Vector3};

use crate::{Error, Result};

/// Pinhole camera with a world-to-camera pose.
///
/// Camera space looks down `+z` with `+y` pointing down the image. Pixel
/// `(x, y)` is sampled at its integer coordinates, so the principal point
/// `(W/2, H/2)` lands exactly on a pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub z_near: f64,
}

impl Camera {
    /// Camera at `(0, 0, -distance)` looking at the origin with the identity rotation.
    pub fn front(distance: f64, focal: f64, width: usize, height: usize) -> Self {
        Self {
            focal,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
            rotation: Matrix3::identity(),
            translation: Vector3::new(0.0, 0.0, distance),
            z_near: 0.01,
        }
    }

    /// Camera at `eye` looking at `target`; `up` is the world direction that
    /// should appear towards the top of the image.
    pub fn look_at(
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
        focal: f64,
        width: usize,
        height: usize,
    ) -> Self {
        let forward = (target - eye).normalize();
        // image y runs down, so the camera's y axis is the negated up vector
        let right = (-up).cross(&forward).normalize();
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * eye);
        Self {
            focal,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
            rotation,
            translation,
            z_near: 0.01,
        }
    }

    /// Orbit camera around the origin. Azimuth 0 and elevation 0 reproduce
    /// [`Camera::front`]; positive elevation looks down from above (world
    /// up is `-y`).
    pub fn orbit(
        azimuth_deg: f64,
        elevation_deg: f64,
        distance: f64,
        focal: f64,
        width: usize,
        height: usize,
    ) -> Self {
        let (az, el) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
        let eye = Vector3::new(
            distance * az.sin() * el.cos(),
            -distance * el.sin(),
            -distance * az.cos() * el.cos(),
        );
        Self::look_at(eye, Vector3::zeros(), Vector3::new(0.0, -1.0, 0.0), focal, width, height)
    }

    pub fn with_focal(&self, focal: f64) -> Self {
        Self {
            focal,
            ..self.clone()
        }
    }

    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal > 0.0 && self.focal.is_finite()) {
            return Err(Error::invalid(format!("camera focal {} must be positive", self.focal)));
        }
        if !(self.z_near > 0.0) {
            return Err(Error::invalid("camera z_near must be positive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("camera image size must be nonzero"));
        }
        let ortho = (self.rotation * self.rotation.transpose() - Matrix3::identity()).abs().max();
        if !(ortho <= 1e-6) {
            return Err(Error::invalid("camera rotation is not orthonormal"));
        }
        if self.translation.iter().chain([self.cx, self.cy].iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("camera has non-finite pose or principal point"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orbit_zero_is_front() {
        let a = Camera::orbit(0.0, 0.0, 3.0, 50.0, 32, 32);
        let b = Camera::front(3.0, 50.0, 32, 32);
        assert!((a.rotation - b.rotation).abs().max() < 1e-12);
        assert!((a.translation - b.translation).abs().max() < 1e-12);
    }

    #[test]
    fn orbit_looks_at_origin() {
        let c = Camera::orbit(137.0, 20.0, 2.5, 50.0, 32, 32);
        c.validate().unwrap();
        let o = c.world_to_camera(&Vector3::zeros());
        assert!(o.x.abs() < 1e-12 && o.y.abs() < 1e-12);
        assert!((o.z - 2.5).abs() < 1e-12);
    }

    #[test]
    fn positive_elevation_sees_top_higher() {
        // a point above the origin (world -y) projects above the centre
        let c = Camera::orbit(0.0, 25.0, 3.0, 50.0, 32, 32);
        let p = c.world_to_camera(&Vector3::new(0.0, -0.5, 0.0));
        assert!(p.y < 0.0);
    }

    #[test]
    fn rejects_bad_focal() {
        assert!(Camera::front(3.0, 0.0, 8, 8).validate().is_err());
        assert!(Camera::front(3.0, -2.0, 8, 8).validate().is_err());
    }
}
