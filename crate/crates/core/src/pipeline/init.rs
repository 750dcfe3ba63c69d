//! Seeding a cloud from a mesh surface.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scene::{GaussianCloud, TriMesh};
use crate::{Error, Result};

/// Samples `count` points uniformly over the surface of `mesh`.
///
/// Colors are interpolated from the vertex colors, opacity starts at 0.5 and
/// every point gets the same isotropic scale: the mean distance to each
/// point's nearest neighbour.
pub fn init_gaussians(mesh: &TriMesh, count: usize, seed: u64) -> Result<GaussianCloud> {
    if mesh.is_empty() {
        return Err(Error::invalid("cannot initialize gaussians from an empty mesh"));
    }
    mesh.validate()?;
    let mut cumulative = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        total += mesh.triangle_area(t);
        cumulative.push(total);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    let mut colors = Vec::with_capacity(count);
    for _ in 0..count {
        let u = rng.gen::<f64>() * total;
        let t = cumulative.partition_point(|c| *c <= u).min(cumulative.len() - 1);
        let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
        let s = r1.sqrt();
        let bary = [1.0 - s, s * (1.0 - r2), s * r2];
        let tri = mesh.triangles[t];
        let mut p = [0.0; 3];
        let mut c = [0.0; 3];
        for (corner, b) in tri.iter().zip(bary) {
            for k in 0..3 {
                p[k] += b * mesh.vertices[*corner][k];
                c[k] += b * mesh.colors[*corner][k];
            }
        }
        points.push(p);
        colors.push(c);
    }
    let scale = if count >= 2 {
        mean_nearest_distance(&points)
    } else {
        0.1 * total.sqrt()
    }
    .max(1e-6);
    let mut cloud = GaussianCloud::with_capacity(count);
    for (p, c) in points.into_iter().zip(colors) {
        cloud.push(p, [1.0, 0.0, 0.0, 0.0], [scale.ln(); 3], c, 0.0);
    }
    Ok(cloud)
}

pub(crate) fn mean_nearest_distance(points: &[[f64; 3]]) -> f64 {
    let nearest = crate::par::map_range(points.len(), |i| {
        let p = Vector3::from(points[i]);
        points
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, q)| (Vector3::from(*q) - p).norm_squared())
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    });
    nearest.iter().sum::<f64>() / points.len() as f64
}
