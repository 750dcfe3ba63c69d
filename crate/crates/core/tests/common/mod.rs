//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use nalgebra::{Matrix2, Matrix3, Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use splat_align::deform::{positional_encoding, DeformationField};
use splat_align::render::RenderGrads;
use splat_align::scene::{Camera, GaussianCloud, ImageBuffer, ImageGrad};

pub const FD_STEP: f64 = 1e-4;
pub const FD_TOL: f64 = 1e-3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Gaussians scattered in front of a front camera at distance 3.
/// Colors stay inside (0, 1) and opacities below the clamp, so the only
/// non-smooth points are splat cutoffs and depth-order swaps.
pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> GaussianCloud {
    let mut c = GaussianCloud::with_capacity(n);
    for _ in 0..n {
        let q: [f64; 4] = [0; 4].map(|_| rng.gen_range(-1.0..1.0));
        let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
        c.push(
            [
                rng.gen_range(-spread..spread),
                rng.gen_range(-spread..spread),
                rng.gen_range(-0.6..0.6),
            ],
            q.map(|v| v / norm),
            [0; 3].map(|_| rng.gen_range(0.03f64..0.25).ln()),
            [0; 3].map(|_| rng.gen_range(0.05..0.95)),
            rng.gen_range(-2.0..2.0),
        );
    }
    c
}

pub fn random_grad(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ImageGrad {
    let mut g = ImageGrad::zeros(w, h);
    g.rgb.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    g.alpha.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    g
}

pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ImageBuffer {
    let mut img = ImageBuffer::new(w, h);
    img.rgb.iter_mut().for_each(|v| *v = rng.gen_range(0.0..1.0));
    img.alpha.iter_mut().for_each(|v| *v = rng.gen_range(0.0..1.0));
    img
}

pub fn dot(g: &ImageGrad, img: &ImageBuffer) -> f64 {
    g.rgb.iter().zip(&img.rgb).map(|(a, b)| a * b).sum::<f64>()
        + g.alpha.iter().zip(&img.alpha).map(|(a, b)| a * b).sum::<f64>()
}

pub fn cloud_to_vec(c: &GaussianCloud) -> Vec<f64> {
    let mut v = Vec::new();
    v.extend(c.positions.iter().flatten());
    v.extend(c.rotations.iter().flatten());
    v.extend(c.log_scales.iter().flatten());
    v.extend(c.colors.iter().flatten());
    v.extend(&c.opacity_logits);
    v
}

pub fn vec_to_cloud(v: &[f64], n: usize) -> GaussianCloud {
    let mut c = GaussianCloud::with_capacity(n);
    let (p, r, s, col, o) = (0, 3 * n, 7 * n, 10 * n, 13 * n);
    for i in 0..n {
        c.push(
            [v[p + 3 * i], v[p + 3 * i + 1], v[p + 3 * i + 2]],
            [v[r + 4 * i], v[r + 4 * i + 1], v[r + 4 * i + 2], v[r + 4 * i + 3]],
            [v[s + 3 * i], v[s + 3 * i + 1], v[s + 3 * i + 2]],
            [v[col + 3 * i], v[col + 3 * i + 1], v[col + 3 * i + 2]],
            v[o + i],
        );
    }
    c
}

/// Same layout as [`cloud_to_vec`].
pub fn grads_to_vec(g: &RenderGrads) -> Vec<f64> {
    let mut v = Vec::new();
    v.extend(g.positions.iter().flatten());
    v.extend(g.rotations.iter().flatten());
    v.extend(g.log_scales.iter().flatten());
    v.extend(g.colors.iter().flatten());
    v.extend(&g.opacity_logits);
    v
}

pub fn random_render_grads(rng: &mut ChaCha8Rng, n: usize) -> RenderGrads {
    let mut g = RenderGrads::zeros(n);
    let mut f = || rng.gen_range(-1.0..1.0);
    for i in 0..n {
        g.positions[i] = [f(), f(), f()];
        g.rotations[i] = [f(), f(), f(), f()];
        g.log_scales[i] = [f(), f(), f()];
        g.colors[i] = [f(), f(), f()];
        g.opacity_logits[i] = f();
    }
    g
}

pub fn field_to_vec(f: &DeformationField) -> Vec<f64> {
    f.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias)).copied().collect()
}

pub fn vec_to_field(template: &DeformationField, v: &[f64]) -> DeformationField {
    let mut f = template.clone();
    let mut k = 0;
    for block in f.parameter_blocks_mut() {
        block.copy_from_slice(&v[k..k + block.len()]);
        k += block.len();
    }
    f
}

/// Brute-force renderer: every splat tested at every pixel, no tiling, with
/// its own covariance and projection arithmetic.
pub fn naive_render(cloud: &GaussianCloud, cam: &Camera, bg: [f64; 3]) -> ImageBuffer {
    struct S {
        depth: f64,
        index: usize,
        mean: [f64; 2],
        inv: Matrix2<f64>,
        color: [f64; 3],
        opacity: f64,
    }
    let mut splats = Vec::new();
    for i in 0..cloud.len() {
        let q = cloud.rotations[i];
        let r = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3])).to_rotation_matrix();
        let s = Matrix3::from_diagonal(&Vector3::from(cloud.log_scales[i].map(f64::exp)));
        let m = r.matrix() * s;
        let sigma = m * m.transpose();
        let p = cam.rotation * Vector3::from(cloud.positions[i]) + cam.translation;
        if p.z <= cam.z_near {
            continue;
        }
        let f = cam.focal;
        let j = nalgebra::Matrix2x3::new(f / p.z, 0.0, -f * p.x / (p.z * p.z), 0.0, f / p.z, -f * p.y / (p.z * p.z));
        let t = j * cam.rotation;
        let cov = t * sigma * t.transpose() + Matrix2::identity() * 0.3;
        splats.push(S {
            depth: p.z,
            index: i,
            mean: [f * p.x / p.z + cam.cx, f * p.y / p.z + cam.cy],
            inv: cov.try_inverse().unwrap(),
            color: cloud.colors[i].map(|c| c.clamp(0.0, 1.0)),
            opacity: 1.0 / (1.0 + (-cloud.opacity_logits[i]).exp()),
        });
    }
    splats.sort_by(|a, b| a.depth.partial_cmp(&b.depth).unwrap().then(a.index.cmp(&b.index)));
    let mut img = ImageBuffer::new(cam.width, cam.height);
    for y in 0..cam.height {
        for x in 0..cam.width {
            let mut color = [0.0; 3];
            let mut trans = 1.0;
            for s in &splats {
                let d = nalgebra::Vector2::new(x as f64 - s.mean[0], y as f64 - s.mean[1]);
                let q = (d.transpose() * s.inv * d)[0];
                if q > 9.0 {
                    continue;
                }
                let eta = (s.opacity * (-q / 2.0).exp()).min(0.999);
                for (c, sc) in color.iter_mut().zip(s.color) {
                    *c += trans * eta * sc;
                }
                trans *= 1.0 - eta;
            }
            let rgb = [0, 1, 2].map(|c| color[c] + trans * bg[c]);
            img.set(x, y, rgb, 1.0 - trans);
        }
    }
    img
}

/// ReLU on/off pattern of every hidden unit for every point, recomputed
/// outside the library. Equal patterns at `x ± h` mean the field is
/// smooth along that segment.
pub fn relu_pattern(field: &DeformationField, cloud: &GaussianCloud, t: f64) -> Vec<bool> {
    let mut out = Vec::new();
    for p in &cloud.positions {
        let mut x = positional_encoding(p, field.position_frequencies);
        x.extend(positional_encoding(&[t], field.time_frequencies));
        for (l, layer) in field.layers.iter().enumerate() {
            let y: Vec<f64> = (0..layer.outputs)
                .map(|o| {
                    layer.bias[o]
                        + (0..layer.inputs)
                            .map(|i| layer.weights[o * layer.inputs + i] * x[i])
                            .sum::<f64>()
                })
                .collect();
            if l + 1 == field.layers.len() {
                break;
            }
            out.extend(y.iter().map(|v| *v > 0.0));
            x = y.into_iter().map(|v| v.max(0.0)).collect();
        }
    }
    out
}

/// Outcome of a coordinate-wise central-difference check.
#[derive(Debug, Default)]
pub struct FdReport {
    pub checked: usize,
    pub skipped: usize,
    pub worst: f64,
    pub worst_coord: usize,
}

impl FdReport {
    pub fn merge(&mut self, o: &FdReport) {
        self.checked += o.checked;
        self.skipped += o.skipped;
        if o.worst > self.worst {
            self.worst = o.worst;
            self.worst_coord = o.worst_coord;
        }
    }
}

/// Central differences of `f` at `x` along each coordinate in `coords`,
/// compared with `analytic`. `f` returns the value and a smoothness key;
/// coordinates whose `x ± h` keys differ from the base key are skipped.
pub fn fd_check<K: PartialEq>(
    x: &[f64],
    analytic: &[f64],
    coords: impl IntoIterator<Item = usize>,
    f: impl Fn(&[f64]) -> (f64, K),
) -> FdReport {
    let (_, base) = f(x);
    let mut rep = FdReport::default();
    let mut y = x.to_vec();
    for i in coords {
        y[i] = x[i] + FD_STEP;
        let (up, ku) = f(&y);
        y[i] = x[i] - FD_STEP;
        let (down, kd) = f(&y);
        y[i] = x[i];
        if ku != base || kd != base {
            rep.skipped += 1;
            continue;
        }
        let numeric = (up - down) / (2.0 * FD_STEP);
        let e = rel_err(analytic[i], numeric);
        rep.checked += 1;
        if e > rep.worst {
            rep.worst = e;
            rep.worst_coord = i;
        }
    }
    rep
}
