use nalgebra::{Matrix2, Matrix3, Vector3};

use super::project::{perspective_jacobian, project_gaussian, Splat2D, DILATION};
use super::RenderGrads;
use crate::par;
use crate::scene::{
    covariance_of, quat_matrix_vjp, quat_normalize_vjp, rotation_matrix, sigmoid, Camera, GaussianCloud,
    ImageBuffer, ImageGrad,
};
use crate::{Error, Result};

/// Tile edge in pixels.
pub const TILE: usize = 16;
/// Squared Mahalanobis radius beyond which a splat contributes nothing (3σ).
pub const CUTOFF: f64 = 9.0;
/// Upper clamp on per-splat opacity at a pixel.
pub const MAX_ETA: f64 = 0.999;

/// Diagnostics from a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderStats {
    /// Splats in front of the near plane.
    pub visible: usize,
    /// Total (pixel, splat) pairs that blended.
    pub contributions: usize,
    /// Hash of every pixel's ordered contributor list. Two renders with the
    /// same signature blended the same splats in the same order everywhere,
    /// so the image is a smooth function of the parameters between them.
    pub signature: u64,
}

struct Hit {
    eta: f64,
    /// Unclamped `exp(-q/2)`.
    falloff: f64,
    clamped: bool,
    dx: f64,
    dy: f64,
}

#[inline]
fn hit(s: &Splat2D, px: f64, py: f64) -> Option<Hit> {
    let [a, b, c] = s.footprint.conic;
    let dx = px - s.footprint.mean[0];
    let dy = py - s.footprint.mean[1];
    let q = a * dx * dx + 2.0 * b * dx * dy + c * dy * dy;
    if !(q <= CUTOFF) {
        return None;
    }
    let falloff = (-0.5 * q).exp();
    let raw = s.opacity * falloff;
    Some(Hit {
        eta: raw.min(MAX_ETA),
        falloff,
        clamped: raw > MAX_ETA,
        dx,
        dy,
    })
}

fn prepare(cloud: &GaussianCloud, camera: &Camera) -> Result<Vec<Splat2D>> {
    camera.validate()?;
    cloud.check_renderable()?;
    let mut splats = Vec::with_capacity(cloud.len());
    for i in 0..cloud.len() {
        let cov = covariance_of(cloud.rotations[i], cloud.log_scales[i])?;
        let mean = Vector3::from(cloud.positions[i]);
        if let Some(footprint) = project_gaussian(&mean, &cov, camera) {
            splats.push(Splat2D {
                index: i,
                footprint,
                color: cloud.colors[i].map(|c| c.clamp(0.0, 1.0)),
                opacity: sigmoid(cloud.opacity_logits[i]),
            });
        }
    }
    splats.sort_by(|a, b| {
        a.footprint
            .depth
            .total_cmp(&b.footprint.depth)
            .then(a.index.cmp(&b.index))
    });
    Ok(splats)
}

struct Tiles {
    cols: usize,
    /// Per tile, indices into the depth-sorted splat list, ascending.
    lists: Vec<Vec<u32>>,
}

impl Tiles {
    fn build(splats: &[Splat2D], width: usize, height: usize) -> Self {
        let cols = width.div_ceil(TILE);
        let rows = height.div_ceil(TILE);
        let mut lists = vec![Vec::new(); cols * rows];
        for (k, s) in splats.iter().enumerate() {
            let [mx, my] = s.footprint.mean;
            let r = s.footprint.radius;
            let x0 = (mx - r).ceil().max(0.0);
            let y0 = (my - r).ceil().max(0.0);
            let x1 = (mx + r).floor().min(width as f64 - 1.0);
            let y1 = (my + r).floor().min(height as f64 - 1.0);
            if !(x0 <= x1 && y0 <= y1) {
                continue;
            }
            let (tx0, tx1) = (x0 as usize / TILE, x1 as usize / TILE);
            let (ty0, ty1) = (y0 as usize / TILE, y1 as usize / TILE);
            for ty in ty0..=ty1 {
                for tx in tx0..=tx1 {
                    lists[ty * cols + tx].push(k as u32);
                }
            }
        }
        Self { cols, lists }
    }

    fn pixels(&self, tile: usize, width: usize, height: usize) -> impl Iterator<Item = (usize, usize)> {
        let (tx, ty) = (tile % self.cols, tile / self.cols);
        let xs = tx * TILE..((tx + 1) * TILE).min(width);
        let ys = ty * TILE..((ty + 1) * TILE).min(height);
        ys.flat_map(move |y| xs.clone().map(move |x| (x, y)))
    }
}

#[inline]
fn mix(h: u64, v: u64) -> u64 {
    (h ^ v).wrapping_mul(0x100_0000_01b3)
}

/// Alpha-composites `cloud` front to back as seen from `camera`.
pub fn render(cloud: &GaussianCloud, camera: &Camera, background: [f64; 3]) -> Result<ImageBuffer> {
    Ok(render_with_stats(cloud, camera, background)?.0)
}

pub fn render_with_stats(
    cloud: &GaussianCloud,
    camera: &Camera,
    background: [f64; 3],
) -> Result<(ImageBuffer, RenderStats)> {
    let splats = prepare(cloud, camera)?;
    let (w, h) = (camera.width, camera.height);
    let tiles = Tiles::build(&splats, w, h);

    struct TileOut {
        pixels: Vec<(usize, [f64; 3], f64)>,
        contributions: usize,
        signature: u64,
    }

    let outs = par::map_range(tiles.lists.len(), |t| {
        let list = &tiles.lists[t];
        let mut out = TileOut {
            pixels: Vec::with_capacity(TILE * TILE),
            contributions: 0,
            signature: 0xcbf2_9ce4_8422_2325,
        };
        for (x, y) in tiles.pixels(t, w, h) {
            let (px, py) = (x as f64, y as f64);
            let mut color = [0.0; 3];
            let mut trans = 1.0;
            for &k in list {
                let s = &splats[k as usize];
                if let Some(hit) = hit(s, px, py) {
                    let wgt = hit.eta * trans;
                    for (c, sc) in color.iter_mut().zip(s.color) {
                        *c += sc * wgt;
                    }
                    trans *= 1.0 - hit.eta;
                    out.contributions += 1;
                    out.signature = mix(out.signature, s.index as u64);
                }
            }
            for ch in 0..3 {
                color[ch] += background[ch] * trans;
            }
            out.signature = mix(out.signature, u64::MAX);
            out.pixels.push((y * w + x, color, 1.0 - trans));
        }
        out
    });

    let mut image = ImageBuffer::new(w, h);
    let mut stats = RenderStats {
        visible: splats.len(),
        contributions: 0,
        signature: 0,
    };
    for out in outs {
        for (p, color, alpha) in out.pixels {
            image.rgb[p * 3..p * 3 + 3].copy_from_slice(&color);
            image.alpha[p] = alpha;
        }
        stats.contributions += out.contributions;
        stats.signature = mix(stats.signature.rotate_left(7), out.signature);
    }
    Ok((image, stats))
}

#[derive(Clone, Copy, Default)]
struct ScreenGrad {
    mean: [f64; 2],
    conic: [f64; 3],
    opacity: f64,
    color: [f64; 3],
}

impl ScreenGrad {
    fn add(&mut self, o: &ScreenGrad) {
        for k in 0..2 {
            self.mean[k] += o.mean[k];
        }
        for k in 0..3 {
            self.conic[k] += o.conic[k];
            self.color[k] += o.color[k];
        }
        self.opacity += o.opacity;
    }
}

/// Vector-Jacobian product of [`render`] with respect to every cloud field,
/// for an upstream gradient on the RGB and alpha channels.
pub fn render_backward(
    cloud: &GaussianCloud,
    camera: &Camera,
    background: [f64; 3],
    upstream: &ImageGrad,
) -> Result<RenderGrads> {
    let (w, h) = (camera.width, camera.height);
    if upstream.width != w
        || upstream.height != h
        || upstream.rgb.len() != w * h * 3
        || upstream.alpha.len() != w * h
    {
        return Err(Error::invalid(format!(
            "upstream gradient is {}x{}, camera is {w}x{h}",
            upstream.width, upstream.height
        )));
    }
    let splats = prepare(cloud, camera)?;
    let tiles = Tiles::build(&splats, w, h);

    let per_tile = par::map_range(tiles.lists.len(), |t| {
        let list = &tiles.lists[t];
        let mut local = vec![ScreenGrad::default(); list.len()];
        let mut hits: Vec<(usize, Hit, f64)> = Vec::with_capacity(list.len());
        for (x, y) in tiles.pixels(t, w, h) {
            let p = y * w + x;
            let up_c = [upstream.rgb[p * 3], upstream.rgb[p * 3 + 1], upstream.rgb[p * 3 + 2]];
            let up_a = upstream.alpha[p];
            if up_c == [0.0; 3] && up_a == 0.0 {
                continue;
            }
            let (px, py) = (x as f64, y as f64);
            hits.clear();
            let mut trans = 1.0;
            for (slot, &k) in list.iter().enumerate() {
                if let Some(hit) = hit(&splats[k as usize], px, py) {
                    let t_before = trans;
                    trans *= 1.0 - hit.eta;
                    hits.push((slot, hit, t_before));
                }
            }
            let t_final = trans;
            // colour contributed by everything behind the current splat, background included
            let mut behind = background.map(|b| b * t_final);
            for (slot, hit, t_i) in hits.iter().rev() {
                let s = &splats[list[*slot] as usize];
                let g = &mut local[*slot];
                let inv = 1.0 / (1.0 - hit.eta);
                let mut d_eta = up_a * t_final * inv;
                for ch in 0..3 {
                    d_eta += up_c[ch] * (s.color[ch] * t_i - behind[ch] * inv);
                    g.color[ch] += up_c[ch] * hit.eta * t_i;
                    behind[ch] += s.color[ch] * hit.eta * t_i;
                }
                if !hit.clamped {
                    g.opacity += d_eta * hit.falloff;
                    let d_q = -0.5 * hit.eta * d_eta;
                    let [a, b, c] = s.footprint.conic;
                    g.conic[0] += d_q * hit.dx * hit.dx;
                    g.conic[1] += d_q * 2.0 * hit.dx * hit.dy;
                    g.conic[2] += d_q * hit.dy * hit.dy;
                    g.mean[0] += d_q * -2.0 * (a * hit.dx + b * hit.dy);
                    g.mean[1] += d_q * -2.0 * (b * hit.dx + c * hit.dy);
                }
            }
        }
        local
    });

    // deterministic reduction in tile order
    let mut screen = vec![ScreenGrad::default(); splats.len()];
    for (t, local) in per_tile.iter().enumerate() {
        for (slot, g) in local.iter().enumerate() {
            screen[tiles.lists[t][slot] as usize].add(g);
        }
    }

    let mut out = RenderGrads::zeros(cloud.len());
    let chained = par::map_range(splats.len(), |k| chain_to_world(cloud, camera, &splats[k], &screen[k]));
    for (s, g) in splats.iter().zip(chained) {
        let i = s.index;
        out.positions[i] = g.0;
        out.rotations[i] = g.1;
        out.log_scales[i] = g.2;
        out.colors[i] = g.3;
        out.opacity_logits[i] = g.4;
    }
    Ok(out)
}

type PointGrad = ([f64; 3], [f64; 4], [f64; 3], [f64; 3], f64);

fn chain_to_world(cloud: &GaussianCloud, cam: &Camera, s: &Splat2D, g: &ScreenGrad) -> PointGrad {
    let i = s.index;
    let q = cloud.rotations[i];
    let qn = q.iter().map(|c| c * c).sum::<f64>().sqrt();
    let unit = q.map(|c| c / qn);
    let rot = rotation_matrix(q);
    let var = Vector3::from(cloud.log_scales[i].map(|v| (2.0 * v).exp()));
    let d = Matrix3::from_diagonal(&var);
    let sigma = rot * d * rot.transpose();

    let w = &cam.rotation;
    let m = cam.world_to_camera(&Vector3::from(cloud.positions[i]));
    let j = perspective_jacobian(cam, &m);
    let sigma_cam = w * sigma * w.transpose();
    let dil = j * sigma_cam * j.transpose() + Matrix2::identity() * DILATION;
    let conic = dil.try_inverse().unwrap_or_else(Matrix2::zeros);

    let g_conic = Matrix2::new(g.conic[0], 0.5 * g.conic[1], 0.5 * g.conic[1], g.conic[2]);
    let g_cov2 = -(conic * g_conic * conic);
    let g_sigma_cam = j.transpose() * g_cov2 * j;
    let g_j = 2.0 * g_cov2 * j * sigma_cam;
    let g_sigma = w.transpose() * g_sigma_cam * w;
    let g_rot = 2.0 * g_sigma * rot * d;
    let g_diag = rot.transpose() * g_sigma * rot;
    let log_scale = [0, 1, 2].map(|k| g_diag[(k, k)] * 2.0 * var[k]);
    let rotation = quat_normalize_vjp(q, quat_matrix_vjp(unit, &g_rot));

    let (f, iz) = (cam.focal, 1.0 / m.z);
    let (gmx, gmy) = (g.mean[0], g.mean[1]);
    let gm = Vector3::new(
        gmx * f * iz - g_j[(0, 2)] * f * iz * iz,
        gmy * f * iz - g_j[(1, 2)] * f * iz * iz,
        -gmx * f * m.x * iz * iz - gmy * f * m.y * iz * iz - (g_j[(0, 0)] + g_j[(1, 1)]) * f * iz * iz
            + g_j[(0, 2)] * 2.0 * f * m.x * iz * iz * iz
            + g_j[(1, 2)] * 2.0 * f * m.y * iz * iz * iz,
    );
    let position: [f64; 3] = (w.transpose() * gm).into();

    let raw = cloud.colors[i];
    let color = [0, 1, 2].map(|k| if (0.0..=1.0).contains(&raw[k]) { g.color[k] } else { 0.0 });
    let opacity = g.opacity * s.opacity * (1.0 - s.opacity);
    (position, rotation, log_scale, color, opacity)
}
