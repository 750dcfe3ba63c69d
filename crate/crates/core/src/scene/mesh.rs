use nalgebra::Vector3;

use crate::{Error, Result};

/// Indexed triangle mesh with per-vertex RGB colors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
    pub colors: Vec<[f64; 3]>,
}

impl TriMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| Vector3::from(self.vertices[i]));
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.vertices.len();
        if self.colors.len() != v {
            return Err(Error::invalid(format!(
                "mesh has {} colors for {v} vertices",
                self.colors.len()
            )));
        }
        if self.vertices.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::invalid("mesh has non-finite vertices"));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= v) {
                return Err(Error::invalid(format!("triangle {t} indexes past {v} vertices")));
            }
            if self.triangle_area(t) <= 1e-12 {
                return Err(Error::invalid(format!("triangle {t} is degenerate")));
            }
        }
        Ok(())
    }

    /// Appends `other`, offsetting its indices.
    pub fn merge(&mut self, other: &TriMesh) {
        let base = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.colors.extend_from_slice(&other.colors);
        self.triangles
            .extend(other.triangles.iter().map(|t| t.map(|i| i + base)));
    }

    pub fn map_vertices(&self, mut f: impl FnMut(usize, [f64; 3]) -> [f64; 3]) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().enumerate().map(|(i, &v)| f(i, v)).collect(),
            triangles: self.triangles.clone(),
            colors: self.colors.clone(),
        }
    }

    /// Closed unit-sphere approximation from a subdivided icosahedron.
    pub fn icosphere(radius: f64, subdivisions: usize, color: [f64; 3]) -> TriMesh {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts: Vec<Vector3<f64>> = [
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ]
        .iter()
        .map(|v| Vector3::from(*v).normalize())
        .collect();
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut cache = std::collections::HashMap::new();
            let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vector3<f64>>| {
                *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                    verts.len() - 1
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for [a, b, c] in faces {
                let ab = midpoint(a, b, &mut verts);
                let bc = midpoint(b, c, &mut verts);
                let ca = midpoint(c, a, &mut verts);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        TriMesh {
            vertices: verts.iter().map(|v| (v * radius).into()).collect(),
            colors: vec![color; verts.len()],
            triangles: faces,
        }
    }

    /// Axis-aligned box spanning `min..max`, triangulated per face.
    pub fn cuboid(min: [f64; 3], max: [f64; 3], color: [f64; 3]) -> TriMesh {
        let mut vertices = Vec::with_capacity(8);
        for i in 0..8 {
            vertices.push([
                if i & 1 == 0 { min[0] } else { max[0] },
                if i & 2 == 0 { min[1] } else { max[1] },
                if i & 4 == 0 { min[2] } else { max[2] },
            ]);
        }
        let quads = [
            [0, 2, 3, 1],
            [4, 5, 7, 6],
            [0, 1, 5, 4],
            [2, 6, 7, 3],
            [0, 4, 6, 2],
            [1, 3, 7, 5],
        ];
        let triangles = quads
            .iter()
            .flat_map(|&[a, b, c, d]| [[a, b, c], [a, c, d]])
            .collect();
        TriMesh {
            vertices,
            triangles,
            colors: vec![color; 8],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_is_valid_and_round() {
        let m = TriMesh::icosphere(0.5, 2, [1.0, 0.0, 0.0]);
        m.validate().unwrap();
        assert_eq!(m.triangles.len(), 320);
        for v in &m.vertices {
            assert!((Vector3::from(*v).norm() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn cuboid_area() {
        let m = TriMesh::cuboid([0.0; 3], [1.0, 2.0, 3.0], [0.0; 3]);
        m.validate().unwrap();
        let area: f64 = (0..m.triangles.len()).map(|t| m.triangle_area(t)).sum();
        assert!((area - 22.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_index_rejected() {
        let mut m = TriMesh::cuboid([0.0; 3], [1.0; 3], [0.0; 3]);
        m.triangles.push([0, 1, 8]);
        assert!(m.validate().is_err());
    }

    #[test]
    fn degenerate_triangle_rejected() {
        let mut m = TriMesh::cuboid([0.0; 3], [1.0; 3], [0.0; 3]);
        m.triangles.push([0, 0, 1]);
        assert!(m.validate().is_err());
    }
}
