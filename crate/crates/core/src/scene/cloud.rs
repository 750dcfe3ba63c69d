use nalgebra::{Matrix3, Vector3};

use crate::{Error, Result};

/// A set of anisotropic 3D Gaussians.
///
/// Scales are stored as logarithms and opacities as logits so that
/// unconstrained optimizer steps keep `exp(scale) > 0` and `alpha in (0, 1)`.
/// Quaternions are `[w, x, y, z]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GaussianCloud {
    pub positions: Vec<[f64; 3]>,
    pub rotations: Vec<[f64; 4]>,
    pub log_scales: Vec<[f64; 3]>,
    pub colors: Vec<[f64; 3]>,
    pub opacity_logits: Vec<f64>,
}

impl GaussianCloud {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            positions: Vec::with_capacity(n),
            rotations: Vec::with_capacity(n),
            log_scales: Vec::with_capacity(n),
            colors: Vec::with_capacity(n),
            opacity_logits: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn push(
        &mut self,
        position: [f64; 3],
        rotation: [f64; 4],
        log_scale: [f64; 3],
        color: [f64; 3],
        opacity_logit: f64,
    ) {
        self.positions.push(position);
        self.rotations.push(rotation);
        self.log_scales.push(log_scale);
        self.colors.push(color);
        self.opacity_logits.push(opacity_logit);
    }

    pub fn opacity(&self, i: usize) -> f64 {
        sigmoid(self.opacity_logits[i])
    }

    /// Renormalizes every quaternion to unit length.
    pub fn normalize_rotations(&mut self) {
        for q in &mut self.rotations {
            let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
            if n > 0.0 && n.is_finite() {
                q.iter_mut().for_each(|c| *c /= n);
            }
        }
    }

    /// Checks that all per-point arrays agree in length and hold finite values.
    ///
    /// This is the structural subset of [`validate_cloud`] that renderers
    /// require; it tolerates slightly non-unit quaternions since the
    /// renderer normalizes them itself.
    pub fn check_renderable(&self) -> Result<()> {
        let n = self.len();
        if self.rotations.len() != n
            || self.log_scales.len() != n
            || self.colors.len() != n
            || self.opacity_logits.len() != n
        {
            return Err(Error::invalid("cloud arrays have mismatched lengths"));
        }
        for i in 0..n {
            let finite = self.positions[i].iter().all(|v| v.is_finite())
                && self.rotations[i].iter().all(|v| v.is_finite())
                && self.log_scales[i].iter().all(|v| v.is_finite() && v.exp().is_finite())
                && self.colors[i].iter().all(|v| v.is_finite())
                && self.opacity_logits[i].is_finite();
            if !finite {
                return Err(Error::invalid(format!("non-finite attribute at point {i}")));
            }
            let qn: f64 = self.rotations[i].iter().map(|c| c * c).sum();
            if qn < 1e-24 {
                return Err(Error::invalid(format!("zero quaternion at point {i}")));
            }
        }
        Ok(())
    }

    /// Bitwise fingerprint of every parameter; used to prove a stage left a cloud untouched.
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.len().hash(&mut h);
        let all = self
            .positions
            .iter()
            .flatten()
            .chain(self.rotations.iter().flatten())
            .chain(self.log_scales.iter().flatten())
            .chain(self.colors.iter().flatten())
            .chain(self.opacity_logits.iter());
        for v in all {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

/// One invariant violation found by [`validate_cloud`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub index: usize,
    pub field: &'static str,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "point {} {}: {}", self.index, self.field, self.message)
    }
}

/// Reports every invariant violation in `cloud`. Empty iff the cloud is valid.
pub fn validate_cloud(cloud: &GaussianCloud) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = cloud.len();
    let lens = [
        ("rotations", cloud.rotations.len()),
        ("log_scales", cloud.log_scales.len()),
        ("colors", cloud.colors.len()),
        ("opacity_logits", cloud.opacity_logits.len()),
    ];
    for (field, len) in lens {
        if len != n {
            out.push(Violation {
                index: len.min(n),
                field,
                message: format!("length {len} differs from {n} positions"),
            });
        }
    }
    let mut push = |index, field, message: String| out.push(Violation { index, field, message });
    for i in 0..n {
        if cloud.positions[i].iter().any(|v| !v.is_finite()) {
            push(i, "positions", "non-finite component".into());
        }
        if let Some(q) = cloud.rotations.get(i) {
            let norm = q.iter().map(|c| c * c).sum::<f64>().sqrt();
            if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 {
                push(i, "rotations", format!("quaternion norm {norm} is not 1"));
            }
        }
        if let Some(s) = cloud.log_scales.get(i) {
            if s.iter().any(|v| !v.is_finite() || !v.exp().is_finite() || v.exp() <= 0.0) {
                push(i, "log_scales", "scale is not strictly positive and finite".into());
            }
        }
        if let Some(c) = cloud.colors.get(i) {
            if c.iter().any(|v| !v.is_finite()) {
                push(i, "colors", "non-finite component".into());
            }
        }
        if let Some(&o) = cloud.opacity_logits.get(i) {
            let a = sigmoid(o);
            if !o.is_finite() || a <= 0.0 || a >= 1.0 {
                push(i, "opacity_logits", format!("opacity {a} is not strictly inside (0, 1)"));
            }
        }
    }
    out
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Rotation matrix of `q / |q|`.
pub fn rotation_matrix(q: [f64; 4]) -> Matrix3<f64> {
    let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
    let [w, x, y, z] = q.map(|c| c / n);
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Hamilton product `a * b`.
pub fn quat_multiply(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    let [aw, ax, ay, az] = a;
    let [bw, bx, by, bz] = b;
    [
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ]
}

/// Pulls a gradient on the rotation matrix back onto the components of a
/// unit quaternion, treating the matrix formula as a polynomial in `q`.
pub fn quat_matrix_vjp(q: [f64; 4], d_rot: &Matrix3<f64>) -> [f64; 4] {
    let [w, x, y, z] = q;
    let g = |m: [f64; 9]| -> f64 {
        let mut s = 0.0;
        for r in 0..3 {
            for c in 0..3 {
                s += m[r * 3 + c] * d_rot[(r, c)];
            }
        }
        2.0 * s
    };
    [
        g([0.0, -z, y, z, 0.0, -x, -y, x, 0.0]),
        g([0.0, y, z, y, -2.0 * x, -w, z, w, -2.0 * x]),
        g([-2.0 * y, x, w, x, 0.0, z, -w, z, -2.0 * y]),
        g([-2.0 * z, -w, x, w, -2.0 * z, y, x, y, 0.0]),
    ]
}

/// Vector-Jacobian product of `q -> q / |q|`.
pub fn quat_normalize_vjp(q: [f64; 4], d_unit: [f64; 4]) -> [f64; 4] {
    let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
    let u = q.map(|c| c / n);
    let dot: f64 = u.iter().zip(&d_unit).map(|(a, b)| a * b).sum();
    let mut out = [0.0; 4];
    for k in 0..4 {
        out[k] = (d_unit[k] - u[k] * dot) / n;
    }
    out
}

/// Builds the 3D covariance `R diag(exp(2 s)) R^T`.
pub fn covariance_of(rotation: [f64; 4], log_scale: [f64; 3]) -> Result<Matrix3<f64>> {
    if rotation.iter().chain(&log_scale).any(|v| !v.is_finite()) {
        return Err(Error::invalid("covariance_of: non-finite input"));
    }
    let qn: f64 = rotation.iter().map(|c| c * c).sum();
    if qn < 1e-24 {
        return Err(Error::invalid("covariance_of: zero quaternion"));
    }
    let var = Vector3::from(log_scale.map(|s| (2.0 * s).exp()));
    if var.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::invalid("covariance_of: scale overflow"));
    }
    let r = rotation_matrix(rotation);
    Ok(r * Matrix3::from_diagonal(&var) * r.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn valid_cloud(n: usize) -> GaussianCloud {
        let mut c = GaussianCloud::default();
        for i in 0..n {
            c.push([i as f64, 0.0, 1.0], [1.0, 0.0, 0.0, 0.0], [-1.0; 3], [0.5; 3], 0.0);
        }
        c
    }

    #[test]
    fn identity_covariance() {
        let c = covariance_of([1.0, 0.0, 0.0, 0.0], [0.0; 3]).unwrap();
        assert!((c - Matrix3::identity()).abs().max() < 1e-15);
    }

    #[test]
    fn diagonal_covariance() {
        let c = covariance_of([1.0, 0.0, 0.0, 0.0], [2f64.ln(), 0.0, 0.0]).unwrap();
        let want = Matrix3::from_diagonal(&Vector3::new(4.0, 1.0, 1.0));
        assert!((c - want).abs().max() < 1e-12);
    }

    #[test]
    fn covariance_rejects_nan() {
        assert!(matches!(
            covariance_of([f64::NAN, 0.0, 0.0, 0.0], [0.0; 3]),
            Err(Error::InvalidParameter(_))
        ));
        assert!(covariance_of([1.0, 0.0, 0.0, 0.0], [0.0, f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn valid_cloud_has_no_violations() {
        assert!(validate_cloud(&valid_cloud(5)).is_empty());
    }

    #[test]
    fn short_quaternion_is_reported_with_index() {
        let mut c = valid_cloud(5);
        c.rotations[3] = [0.9, 0.0, 0.0, 0.0];
        let v = validate_cloud(&c);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].index, 3);
        assert_eq!(v[0].field, "rotations");
    }

    #[test]
    fn nan_position_is_reported() {
        let mut c = valid_cloud(2);
        c.positions[1][2] = f64::NAN;
        let v = validate_cloud(&c);
        assert!(v.iter().any(|v| v.field == "positions" && v.index == 1));
        assert!(c.check_renderable().is_err());
    }

    #[test]
    fn saturated_opacity_is_reported() {
        let mut c = valid_cloud(2);
        c.opacity_logits[0] = 800.0;
        assert_eq!(validate_cloud(&c)[0].field, "opacity_logits");
    }

    #[test]
    fn normalize_vjp_is_tangent() {
        let q = [0.3, -0.2, 0.8, 0.1];
        let g = quat_normalize_vjp(q, [1.0, 2.0, -0.5, 0.25]);
        let dot: f64 = q.iter().zip(&g).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-12);
    }
}
