//! Browser bindings: fit a cloud to a synthetic anchor, sweep its focal
//! length, and watch two disagreeing denoisers pull an image apart.

use wasm_bindgen::prelude::*;

use splat_align::deform::DeformationField;
use splat_align::focal::{sweep_focal, FocalSweepConfig};
use splat_align::guidance::{conflict_descent, ConflictSetup};
use splat_align::pipeline::config::RunConfig;
use splat_align::pipeline::stages::{dynamic_stage, front_pose, initial_field, render_frames, static_stage_from, Oracles};
use splat_align::pipeline::synth::{synth_anchor, SynthAnchor};
use splat_align::render::render_mesh;
use splat_align::scene::{Camera, GaussianCloud, ImageBuffer};

fn js_err(e: splat_align::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    cfg: RunConfig,
    anchor: SynthAnchor,
    cloud: GaussianCloud,
    field: DeformationField,
    iterations: usize,
}

#[wasm_bindgen]
impl Demo {
    /// A 64x64 fixture with `gaussians` points sampled from its mesh.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, gaussians: usize) -> Result<Demo, JsError> {
        let cfg = RunConfig {
            seed,
            num_gaussians: gaussians,
            ..RunConfig::default()
        };
        let anchor = synth_anchor(seed, &cfg).map_err(js_err)?;
        Ok(Demo {
            field: initial_field(&cfg),
            cloud: anchor.cloud.clone(),
            cfg,
            anchor,
            iterations: 0,
        })
    }

    pub fn width(&self) -> usize {
        self.cfg.width
    }

    pub fn height(&self) -> usize {
        self.cfg.height
    }

    pub fn frame_count(&self) -> usize {
        self.anchor.clip.len()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn true_focal(&self) -> f64 {
        self.anchor.focal
    }

    /// RGBA bytes of anchor frame `k`.
    pub fn anchor_frame(&self, k: usize) -> Vec<u8> {
        let k = k.min(self.anchor.clip.len() - 1);
        self.anchor.clip.frames()[k].to_rgba8()
    }

    /// Runs `steps` static iterations, returns the front-view PSNR.
    /// Each call starts a fresh optimizer state.
    pub fn optimize_static(&mut self, steps: usize) -> Result<f64, JsError> {
        let cfg = RunConfig {
            static_iters: steps,
            seed: self.cfg.seed.wrapping_add(self.iterations as u64),
            ..self.cfg.clone()
        };
        let front = self.anchor.front_camera(&cfg);
        let (cloud, report) = static_stage_from(
            self.cloud.clone(),
            &self.anchor.clip,
            &self.anchor.meshes,
            &front,
            &cfg,
            &Oracles::Mock,
        )
        .map_err(js_err)?;
        self.cloud = cloud;
        self.iterations += steps;
        Ok(report.final_psnr)
    }

    /// Trains the deformation field from scratch for `steps` iterations;
    /// returns the mean front-view PSNR across frames.
    pub fn optimize_dynamic(&mut self, steps: usize) -> Result<f64, JsError> {
        let cfg = RunConfig {
            dynamic_iters: steps,
            ..self.cfg.clone()
        };
        let fronts = vec![self.anchor.front_camera(&cfg); self.anchor.clip.len()];
        let (field, report) =
            dynamic_stage(&self.cloud, &self.anchor.clip, &fronts, &cfg, &Oracles::Mock).map_err(js_err)?;
        self.field = field;
        Ok(report.final_psnr)
    }

    /// RGBA bytes of the current cloud at normalized time `t` seen from an orbit camera.
    pub fn render_view(&self, azimuth: f64, elevation: f64, t: f64) -> Result<Vec<u8>, JsError> {
        let view = Camera::orbit(
            azimuth,
            elevation,
            self.cfg.camera_distance,
            self.anchor.focal,
            self.cfg.width,
            self.cfg.height,
        );
        let frames = render_frames(&self.cloud, &self.field, &view, &[t.clamp(0.0, 1.0)], self.cfg.background)
            .map_err(js_err)?;
        Ok(frames[0].to_rgba8())
    }

    /// MSE against anchor frame 0 for each candidate of the default sweep,
    /// followed by the candidate focals: `[mse_0.., focal_0..]`.
    pub fn focal_curve(&self) -> Result<Vec<f64>, JsError> {
        let sweep_cfg = FocalSweepConfig::from_options(&self.cfg.focal, front_pose(&self.cfg), self.cfg.background);
        let sweep = sweep_focal(&self.anchor.meshes[0], &self.anchor.clip.frames()[0], &sweep_cfg).map_err(js_err)?;
        Ok(sweep.mse.iter().chain(&sweep.candidates).copied().collect())
    }

    /// RGBA bytes of the mesh rendered at `focal`, to compare with the anchor.
    pub fn mesh_at_focal(&self, focal: f64) -> Result<Vec<u8>, JsError> {
        let cam = front_pose(&self.cfg).with_focal(focal);
        Ok(render_mesh(&self.anchor.meshes[0], &cam, self.cfg.background)
            .map_err(js_err)?
            .to_rgba8())
    }
}

/// Two mock denoisers that want different images. Returns the RGBA bytes of
/// the final image followed by two little-endian `f32`s: its MSE to the
/// average of the targets and to the anchor (the first target).
#[wasm_bindgen]
pub fn conflict_demo(size: usize, anchor_weight: f64, steps: usize, seed: u64) -> Result<Vec<u8>, JsError> {
    let size = size.max(8);
    let mut a = ImageBuffer::new(size, size);
    let mut b = ImageBuffer::new(size, size);
    for y in 0..size {
        for x in 0..size {
            let u = x as f64 / (size - 1) as f64;
            let v = y as f64 / (size - 1) as f64;
            a.set(x, y, [0.9 * u, 0.2, 0.8 * (1.0 - v)], 1.0);
            b.set(x, y, [0.1, 0.9 * v, 0.3 + 0.5 * u], 1.0);
        }
    }
    let setup = ConflictSetup {
        start: ImageBuffer::filled(size, size, [0.5; 3], 1.0),
        anchor: (anchor_weight > 0.0).then(|| (a.clone(), anchor_weight)),
        targets: [a.clone(), b],
        steps,
        learning_rate: 0.05,
        lambda: 0.0,
        seed,
    };
    let run = conflict_descent(&setup).map_err(js_err)?;
    let mut out = run.image.to_rgba8();
    let avg = run.distance_to_average.last().copied().unwrap_or(f64::NAN);
    out.extend((avg as f32).to_le_bytes());
    out.extend((run.image.mse(&a) as f32).to_le_bytes());
    Ok(out)
}
