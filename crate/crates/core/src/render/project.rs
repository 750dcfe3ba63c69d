use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector3};

use crate::scene::Camera;

/// Isotropic variance added to every projected covariance, in px².
pub const DILATION: f64 = 0.3;

/// Screen-space footprint of one Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    /// Projected mean in pixels.
    pub mean: [f64; 2],
    /// Projected covariance `J W Σ Wᵀ Jᵀ` before dilation.
    pub covariance: Matrix2<f64>,
    /// Inverse of the dilated covariance as `(a, b, c)` for `[[a, b], [b, c]]`.
    pub conic: [f64; 3],
    /// Camera-space depth.
    pub depth: f64,
    /// Radius of a circle enclosing the 3σ ellipse.
    pub radius: f64,
}

/// A projected Gaussian ready for blending.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Splat2D {
    pub index: usize,
    pub footprint: Footprint,
    pub color: [f64; 3],
    pub opacity: f64,
}

pub(crate) fn perspective_jacobian(cam: &Camera, m: &Vector3<f64>) -> Matrix2x3<f64> {
    let (f, iz) = (cam.focal, 1.0 / m.z);
    Matrix2x3::new(
        f * iz,
        0.0,
        -f * m.x * iz * iz,
        0.0,
        f * iz,
        -f * m.y * iz * iz,
    )
}

/// EWA projection of a 3D Gaussian. Returns `None` when the mean is not in
/// front of the near plane.
pub fn project_gaussian(mean: &Vector3<f64>, covariance: &Matrix3<f64>, camera: &Camera) -> Option<Footprint> {
    let m = camera.world_to_camera(mean);
    if !(m.z > camera.z_near) {
        return None;
    }
    let j = perspective_jacobian(camera, &m);
    let cov_cam = camera.rotation * covariance * camera.rotation.transpose();
    let cov2 = j * cov_cam * j.transpose();
    let dil = cov2 + Matrix2::identity() * DILATION;
    let det = dil[(0, 0)] * dil[(1, 1)] - dil[(0, 1)] * dil[(1, 0)];
    if !(det > 0.0) || !det.is_finite() {
        return None;
    }
    let conic = [dil[(1, 1)] / det, -dil[(0, 1)] / det, dil[(0, 0)] / det];
    let mid = 0.5 * (dil[(0, 0)] + dil[(1, 1)]);
    let lambda_max = mid + (mid * mid - det).max(0.0).sqrt();
    Some(Footprint {
        mean: [
            camera.focal * m.x / m.z + camera.cx,
            camera.focal * m.y / m.z + camera.cy,
        ],
        covariance: cov2,
        conic,
        depth: m.z,
        radius: 3.0 * lambda_max.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn on_axis_projects_to_principal_point() {
        let cam = Camera::front(0.0, 40.0, 32, 24);
        let cov = Matrix3::from_diagonal(&Vector3::new(0.3, 0.1, 0.7));
        let fp = project_gaussian(&Vector3::new(0.0, 0.0, 5.0), &cov, &cam).unwrap();
        assert_eq!(fp.mean, [16.0, 12.0]);
        assert_eq!(fp.depth, 5.0);
    }

    #[test]
    fn behind_near_plane_is_culled() {
        let cam = Camera::front(0.0, 40.0, 32, 24);
        let cov = Matrix3::identity();
        assert!(project_gaussian(&Vector3::new(0.0, 0.0, 0.005), &cov, &cam).is_none());
        assert!(project_gaussian(&Vector3::new(0.0, 0.0, -1.0), &cov, &cam).is_none());
    }

    #[test]
    fn conic_inverts_dilated_covariance() {
        let cam = Camera::orbit(30.0, 10.0, 4.0, 60.0, 32, 32);
        let q = [0.9, 0.1, -0.3, 0.2];
        let cov = crate::scene::covariance_of(q, [-1.0, -1.5, -2.0]).unwrap();
        let fp = project_gaussian(&Vector3::new(0.2, -0.1, 0.3), &cov, &cam).unwrap();
        let dil = fp.covariance + Matrix2::identity() * DILATION;
        let conic = Matrix2::new(fp.conic[0], fp.conic[1], fp.conic[1], fp.conic[2]);
        assert!((dil * conic - Matrix2::identity()).abs().max() < 1e-12);
    }
}
