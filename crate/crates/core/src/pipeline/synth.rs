//! Synthetic anchor fixtures with known focal length and motion.

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::RunConfig;
use super::init::init_gaussians;
use crate::render::render_mesh;
use crate::scene::{Camera, GaussianCloud, TriMesh, VideoClip};
use crate::Result;

const BODY_RADIUS: f64 = 0.5;
const LIMB_ROOT: [f64; 3] = [0.42, 0.0, 0.0];

/// Rigid turn and drift of the whole object plus a bend of the limb,
/// all scaled linearly by time so `t = 0` is the rest pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthMotion {
    /// Limb rotation about the camera axis at `t = 1`, radians.
    pub bend: f64,
    /// Whole-object rotation about the vertical axis at `t = 1`, radians.
    pub turn: f64,
    pub shift: [f64; 3],
}

impl SynthMotion {
    pub fn apply(&self, p: [f64; 3], is_limb: bool, t: f64) -> [f64; 3] {
        let mut v = Vector3::from(p);
        if is_limb {
            let root = Vector3::from(LIMB_ROOT);
            v = root + Rotation3::from_axis_angle(&Vector3::z_axis(), self.bend * t) * (v - root);
        }
        v = Rotation3::from_axis_angle(&Vector3::y_axis(), self.turn * t) * v;
        v += Vector3::from(self.shift) * t;
        v.into()
    }
}

#[derive(Debug, Clone)]
pub struct SynthAnchor {
    pub clip: VideoClip,
    /// Posed mesh per frame.
    pub meshes: Vec<TriMesh>,
    pub rest_mesh: TriMesh,
    /// Vertices from this index on belong to the limb.
    pub limb_start: usize,
    /// Focal the frames were rendered with.
    pub focal: f64,
    pub motion: SynthMotion,
    /// Cloud sampled from the rest mesh.
    pub cloud: GaussianCloud,
}

impl SynthAnchor {
    pub fn front_camera(&self, cfg: &RunConfig) -> Camera {
        Camera::front(cfg.camera_distance, self.focal, cfg.width, cfg.height)
    }
}

fn body_mesh(tint: [f64; 3]) -> TriMesh {
    let sphere = TriMesh::icosphere(BODY_RADIUS, 2, tint);
    let colors = sphere
        .vertices
        .iter()
        .map(|v| {
            let n = v.map(|c| c / BODY_RADIUS);
            [
                (tint[0] + 0.25 * n[0]).clamp(0.0, 1.0),
                (tint[1] - 0.25 * n[1]).clamp(0.0, 1.0),
                (tint[2] + 0.2 * n[2]).clamp(0.0, 1.0),
            ]
        })
        .collect();
    TriMesh { colors, ..sphere }
}

/// Picks an off-grid focal between 1.3 and 1.8 image widths.
fn pick_focal(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> f64 {
    let w = cfg.width as f64;
    let lo = cfg.focal.initial.unwrap_or(w) + cfg.focal.offset_min;
    let hi = cfg.focal.initial.unwrap_or(w) + cfg.focal.offset_max;
    let m = cfg.focal.candidates;
    if m < 2 || hi <= lo {
        return 1.5 * w + 0.37;
    }
    let step = (hi - lo) / (m - 1) as f64;
    let inside: Vec<f64> = (0..m - 1)
        .map(|i| lo + step * i as f64)
        .filter(|g| *g >= 1.3 * w && *g + step <= 1.8 * w)
        .collect();
    match inside.len() {
        0 => 1.5 * w + 0.37,
        n => inside[rng.gen_range(0..n)] + step * rng.gen_range(0.15..0.85),
    }
}

/// Builds a colored sphere with a limb, animates it and renders the front view
/// of every frame at a focal that does not lie on the default sweep grid.
pub fn synth_anchor(seed: u64, cfg: &RunConfig) -> Result<SynthAnchor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tint = [
        rng.gen_range(0.45..0.65),
        rng.gen_range(0.35..0.55),
        rng.gen_range(0.3..0.5),
    ];
    let mut rest_mesh = body_mesh(tint);
    let limb_start = rest_mesh.vertices.len();
    let limb = TriMesh::cuboid([0.4, -0.09, -0.09], [0.85, 0.09, 0.09], [0.95, 0.85, 0.25]);
    rest_mesh.merge(&limb);
    let motion = SynthMotion {
        bend: rng.gen_range(0.5..0.8),
        turn: rng.gen_range(0.25..0.45),
        shift: [rng.gen_range(0.08..0.15), rng.gen_range(-0.1..-0.05), 0.0],
    };
    let focal = pick_focal(cfg, &mut rng);
    let camera = Camera::front(cfg.camera_distance, focal, cfg.width, cfg.height);
    let mut meshes = Vec::with_capacity(cfg.frames);
    let mut frames = Vec::with_capacity(cfg.frames);
    for k in 0..cfg.frames {
        let t = crate::scene::normalized_time(k, cfg.frames);
        let posed = rest_mesh.map_vertices(|i, v| motion.apply(v, i >= limb_start, t));
        frames.push(render_mesh(&posed, &camera, cfg.background)?);
        meshes.push(posed);
    }
    let cloud = init_gaussians(&rest_mesh, cfg.num_gaussians, seed ^ 0x9e37_79b9)?;
    Ok(SynthAnchor {
        clip: VideoClip::new(frames)?,
        meshes,
        rest_mesh,
        limb_start,
        focal,
        motion,
        cloud,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        RunConfig {
            frames: 3,
            num_gaussians: 50,
            ..RunConfig::default()
        }
    }

    #[test]
    fn rest_pose_at_time_zero() {
        let cfg = small();
        let s = synth_anchor(4, &cfg).unwrap();
        assert_eq!(s.meshes[0], s.rest_mesh);
        let direct = render_mesh(&s.rest_mesh, &s.front_camera(&cfg), cfg.background).unwrap();
        assert_eq!(&direct, &s.clip.frames()[0]);
    }

    #[test]
    fn fixture_is_seeded() {
        let cfg = small();
        let a = synth_anchor(11, &cfg).unwrap();
        let b = synth_anchor(11, &cfg).unwrap();
        assert_eq!(a.clip.frames(), b.clip.frames());
        assert_eq!(a.focal, b.focal);
        assert_ne!(a.clip.frames()[0], a.clip.frames()[2]);
    }
}
