use nalgebra::Vector3;

use crate::scene::{Camera, ImageBuffer, TriMesh};
use crate::Result;

/// Z-buffered rasterization with perspective-correct vertex-color interpolation.
///
/// Covered pixels get alpha 1. Triangles with any vertex at or behind the
/// near plane are skipped; ties in depth keep the earlier triangle.
pub fn render_mesh(mesh: &TriMesh, camera: &Camera, background: [f64; 3]) -> Result<ImageBuffer> {
    camera.validate()?;
    let (w, h) = (camera.width, camera.height);
    let mut image = ImageBuffer::filled(w, h, background, 0.0);
    if mesh.is_empty() {
        return Ok(image);
    }
    mesh.validate()?;
    let mut depth = vec![f64::INFINITY; w * h];

    let cam_pts: Vec<Vector3<f64>> = mesh
        .vertices
        .iter()
        .map(|v| camera.world_to_camera(&Vector3::from(*v)))
        .collect();

    for tri in &mesh.triangles {
        let p = tri.map(|i| cam_pts[i]);
        if p.iter().any(|v| !(v.z > camera.z_near)) {
            continue;
        }
        let s = p.map(|v| {
            [
                camera.focal * v.x / v.z + camera.cx,
                camera.focal * v.y / v.z + camera.cy,
            ]
        });
        let area = edge(s[0], s[1], s[2]);
        if area.abs() < 1e-12 {
            continue;
        }
        let x0 = s.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min).ceil().max(0.0) as usize;
        let y0 = s.iter().map(|v| v[1]).fold(f64::INFINITY, f64::min).ceil().max(0.0) as usize;
        let x1 = s.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max).floor();
        let y1 = s.iter().map(|v| v[1]).fold(f64::NEG_INFINITY, f64::max).floor();
        if x1 < 0.0 || y1 < 0.0 {
            continue;
        }
        let x1 = (x1 as usize).min(w - 1);
        let y1 = (y1 as usize).min(h - 1);
        let inv_z = p.map(|v| 1.0 / v.z);
        let cols = tri.map(|i| mesh.colors[i]);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let q = [x as f64, y as f64];
                let b = [edge(s[1], s[2], q) / area, edge(s[2], s[0], q) / area, edge(s[0], s[1], q) / area];
                if b.iter().any(|&v| v < 0.0) {
                    continue;
                }
                let wsum = b[0] * inv_z[0] + b[1] * inv_z[1] + b[2] * inv_z[2];
                let z = 1.0 / wsum;
                let pix = y * w + x;
                if z >= depth[pix] {
                    continue;
                }
                depth[pix] = z;
                let mut rgb = [0.0; 3];
                for k in 0..3 {
                    let pc = b[k] * inv_z[k] * z;
                    for ch in 0..3 {
                        rgb[ch] += pc * cols[k][ch];
                    }
                }
                image.set(x, y, rgb.map(|c| c.clamp(0.0, 1.0)), 1.0);
            }
        }
    }
    Ok(image)
}

#[inline]
fn edge(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_triangle(z: f64, half: f64, color: [f64; 3]) -> TriMesh {
        TriMesh {
            vertices: vec![[-half, -half, z], [half, -half, z], [0.0, half, z]],
            triangles: vec![[0, 1, 2]],
            colors: vec![color; 3],
        }
    }

    #[test]
    fn triangle_covers_principal_point() {
        let cam = Camera::front(0.0, 20.0, 16, 16);
        let img = render_mesh(&flat_triangle(2.0, 0.5, [1.0, 0.0, 0.0]), &cam, [0.0; 3]).unwrap();
        assert_eq!(img.rgb_at(8, 8), [1.0, 0.0, 0.0]);
        assert_eq!(img.alpha_at(8, 8), 1.0);
        assert_eq!(img.alpha_at(0, 0), 0.0);
    }

    #[test]
    fn empty_mesh_is_background() {
        let cam = Camera::front(0.0, 20.0, 4, 4);
        let img = render_mesh(&TriMesh::default(), &cam, [0.1, 0.2, 0.3]).unwrap();
        assert!(img.alpha.iter().all(|&a| a == 0.0));
        assert_eq!(img.rgb_at(3, 2), [0.1, 0.2, 0.3]);
    }

    #[test]
    fn barycentric_interpolation_is_affine_on_fronto_parallel_triangles() {
        let mesh = TriMesh {
            vertices: vec![[-1.0, -1.0, 2.0], [1.0, -1.0, 2.0], [-1.0, 1.0, 2.0]],
            triangles: vec![[0, 1, 2]],
            colors: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        };
        let cam = Camera::front(0.0, 8.0, 16, 16);
        let img = render_mesh(&mesh, &cam, [0.0; 3]).unwrap();
        // pixel (6, 6) is world (-0.5, -0.5) at z = 2
        let c = img.rgb_at(6, 6);
        assert!((c[0] - 0.25).abs() < 1e-12 && (c[1] - 0.25).abs() < 1e-12);
    }
}
