//! The static and dynamic optimization stages.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::RunConfig;
use super::init::init_gaussians;
use super::optim::{step_cloud, step_field, OptimizerState};
use super::report::{LossRow, StageReport};
use super::views::random_view;
use crate::deform::{deform, deform_backward, DeformationField, FieldGrads, HIDDEN_WIDTH, POSITION_FREQUENCIES, TIME_FREQUENCIES};
use crate::focal::{sweep_focal, FocalSweep, FocalSweepConfig};
use crate::guidance::{mv_refine_loss, sds_loss, time_refine_loss, Condition, DenoiserOracle, MockTargetOracle, OracleKind};
use crate::losses::{geometry_alignment, motion_alignment, texture_alignment_terms, FeatureStack};
use crate::par::map_range;
use crate::render::{render, render_backward, render_mesh, RenderGrads};
use crate::scene::{Camera, GaussianCloud, ImageBuffer, ImageGrad, RgbPlane, TriMesh, VideoClip};
use crate::{Error, Result};

/// Wall-clock timer that reads zero where the platform has no clock.
struct Stopwatch(#[cfg(not(target_family = "wasm"))] std::time::Instant);

impl Stopwatch {
    fn start() -> Self {
        Stopwatch(
            #[cfg(not(target_family = "wasm"))]
            std::time::Instant::now(),
        )
    }

    fn elapsed(&self) -> std::time::Duration {
        #[cfg(not(target_family = "wasm"))]
        return self.0.elapsed();
        #[cfg(target_family = "wasm")]
        std::time::Duration::ZERO
    }
}

const STATIC_STREAM: u64 = 0x5747_4943;
const DYNAMIC_STREAM: u64 = 0x4459_4e41;
const FEATURE_SEED: u64 = 0xfea7;

/// Where denoiser predictions come from.
pub enum Oracles {
    /// Perfect denoisers toward targets derived from the anchors.
    Mock,
    #[cfg(feature = "remote")]
    Remote(Box<[crate::guidance::RemoteOracle; 3]>),
}

impl Oracles {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        if cfg.is_mock() {
            return Ok(Oracles::Mock);
        }
        #[cfg(feature = "remote")]
        {
            use crate::guidance::{remote_oracle, EndpointDescriptor};
            let make = |kind| remote_oracle(EndpointDescriptor::new(cfg.oracle.clone(), kind));
            Ok(Oracles::Remote(Box::new([
                make(OracleKind::Image),
                make(OracleKind::Video),
                make(OracleKind::Multiview),
            ])))
        }
        #[cfg(not(feature = "remote"))]
        Err(Error::Config(format!(
            "oracle {:?} needs the remote feature; only \"mock\" is available",
            cfg.oracle
        )))
    }

    /// Runs `f` with an oracle of `kind`. In mock mode the oracle denoises
    /// toward `targets`, which is only evaluated in that case.
    fn with<T>(
        &self,
        kind: OracleKind,
        targets: impl FnOnce() -> Result<Vec<RgbPlane>>,
        f: impl FnOnce(&dyn DenoiserOracle) -> Result<T>,
    ) -> Result<T> {
        match self {
            Oracles::Mock => {
                let oracle = MockTargetOracle::new(kind, targets()?, Default::default());
                f(&oracle)
            }
            #[cfg(feature = "remote")]
            Oracles::Remote(o) => {
                let i = match kind {
                    OracleKind::Image => 0,
                    OracleKind::Video => 1,
                    OracleKind::Multiview => 2,
                };
                f(&o[i])
            }
        }
    }
}

/// Front-view cameras, one per frame, from the focal sweep.
#[derive(Debug, Clone)]
pub struct FocalResolution {
    pub fronts: Vec<Camera>,
    /// Sweep of frame 0, or of every frame in per-frame mode.
    pub sweeps: Vec<FocalSweep>,
}

impl FocalResolution {
    pub fn focal(&self) -> f64 {
        self.fronts[0].focal
    }

    pub fn front(&self) -> &Camera {
        &self.fronts[0]
    }
}

pub fn front_pose(cfg: &RunConfig) -> Camera {
    Camera::front(cfg.camera_distance, cfg.width as f64, cfg.width, cfg.height)
}

/// Sweeps the focal on frame 0, or on every frame when configured.
pub fn resolve_focal(clip: &VideoClip, meshes: &[TriMesh], cfg: &RunConfig) -> Result<FocalResolution> {
    check_inputs(clip, meshes, cfg)?;
    let sweep_cfg = FocalSweepConfig::from_options(&cfg.focal, front_pose(cfg), cfg.background);
    let count = if cfg.focal.per_frame { clip.len() } else { 1 };
    let sweeps = (0..count)
        .map(|k| sweep_focal(&meshes[k], &clip.frames()[k], &sweep_cfg))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("focal"))?;
    let fronts = (0..clip.len())
        .map(|k| sweep_cfg.pose.with_focal(sweeps[k.min(count - 1)].focal))
        .collect();
    Ok(FocalResolution { fronts, sweeps })
}

fn check_inputs(clip: &VideoClip, meshes: &[TriMesh], cfg: &RunConfig) -> Result<()> {
    if meshes.len() != clip.len() {
        return Err(Error::invalid(format!("{} meshes for {} frames", meshes.len(), clip.len())));
    }
    if clip.width() != cfg.width || clip.height() != cfg.height {
        return Err(Error::Config(format!(
            "frames are {}x{} but the config asks for {}x{}",
            clip.width(),
            clip.height(),
            cfg.width,
            cfg.height
        )));
    }
    Ok(())
}

fn sum_grads(n: usize, parts: impl IntoIterator<Item = Result<RenderGrads>>) -> Result<RenderGrads> {
    let mut total = RenderGrads::zeros(n);
    for p in parts {
        total.accumulate(&p?);
    }
    Ok(total)
}

fn draw_noise(rng: &mut ChaCha8Rng, shared: &mut Option<RgbPlane>, cfg: &RunConfig) -> RgbPlane {
    if cfg.independent_noise {
        return RgbPlane::gaussian(rng, cfg.width, cfg.height);
    }
    shared
        .get_or_insert_with(|| RgbPlane::gaussian(rng, cfg.width, cfg.height))
        .clone()
}

/// Optimizes a cloud sampled from `meshes[0]` against the first anchor frame
/// (texture alignment), mesh renders from random views (geometry alignment)
/// and an image denoiser.
pub fn static_stage(
    clip: &VideoClip,
    meshes: &[TriMesh],
    front: &Camera,
    cfg: &RunConfig,
    oracles: &Oracles,
) -> Result<(GaussianCloud, StageReport)> {
    check_inputs(clip, meshes, cfg)?;
    let cloud = init_gaussians(&meshes[0], cfg.num_gaussians, cfg.seed)?;
    static_stage_from(cloud, clip, meshes, front, cfg, oracles)
}

/// [`static_stage`] starting from a given cloud.
pub fn static_stage_from(
    mut cloud: GaussianCloud,
    clip: &VideoClip,
    meshes: &[TriMesh],
    front: &Camera,
    cfg: &RunConfig,
    oracles: &Oracles,
) -> Result<(GaussianCloud, StageReport)> {
    let started = Stopwatch::start();
    cfg.validate()?;
    let mut run = || -> Result<Vec<LossRow>> {
        let anchor = &clip.frames()[0];
        let anchor_plane = anchor.rgb_plane();
        let condition = Condition::Text(cfg.prompt.clone());
        let stack = FeatureStack::new(cfg.seed ^ FEATURE_SEED);
        let w = cfg.weights;
        let bg = cfg.background;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ STATIC_STREAM);
        let mut state = OptimizerState::default();
        let mut rows = Vec::with_capacity(cfg.static_iters);
        for iteration in 0..cfg.static_iters {
            let mut row = LossRow {
                iteration,
                ..LossRow::default()
            };
            let views = (0..cfg.views_per_step)
                .map(|_| random_view(&mut rng, cfg.camera_distance, front.focal, cfg.focal_jitter, cfg.width, cfg.height))
                .collect::<Result<Vec<_>>>()?;
            let tau = cfg.schedule.sample_timestep(&mut rng);
            let mut shared = None;
            let eps = draw_noise(&mut rng, &mut shared, cfg);

            let x = render(&cloud, front, bg)?;
            let mut upstream = ImageGrad::zeros_like(&x);
            if w.texture > 0.0 {
                let ta = texture_alignment_terms(&x, anchor, w.lambda, &stack)?;
                row.mse = ta.mse;
                row.mask = ta.mask;
                row.lpips = ta.perceptual;
                row.texture = w.texture * ta.total.value;
                upstream.add_scaled(ta.total.grad(), w.texture);
            }
            if w.t2i > 0.0 {
                let l = oracles.with(
                    OracleKind::Image,
                    || Ok(vec![anchor_plane.clone()]),
                    |o| sds_loss(&x, o, &condition, tau, &eps, &cfg.schedule),
                )?;
                row.t2i = w.t2i * l.value;
                upstream.add_scaled(l.grad(), w.t2i);
            }
            let mut grads = render_backward(&cloud, front, bg, &upstream)?;

            if w.geometry > 0.0 && !views.is_empty() {
                let gauss: Vec<ImageBuffer> = map_range(views.len(), |i| render(&cloud, &views[i], bg))
                    .into_iter()
                    .collect::<Result<_>>()?;
                let mesh: Vec<ImageBuffer> = map_range(views.len(), |i| render_mesh(&meshes[0], &views[i], bg))
                    .into_iter()
                    .collect::<Result<_>>()?;
                let ga = geometry_alignment(&gauss, &mesh, w.lambda, &stack)?;
                row.geometry = w.geometry * ga.value;
                let per_view = map_range(views.len(), |i| {
                    render_backward(&cloud, &views[i], bg, &ga.grads[i].clone().scaled(w.geometry))
                });
                grads.accumulate(&sum_grads(cloud.len(), per_view)?);
            }
            row.total = row.texture + row.geometry + row.t2i;
            step_cloud(&mut cloud, &grads, &mut state, &cfg.rates, &cfg.adam)?;
            rows.push(row);
        }
        Ok(rows)
    };
    let rows = run().map_err(|e| e.in_stage("static"))?;
    let final_psnr = render(&cloud, front, cfg.background)?.psnr(&clip.frames()[0]);
    Ok((
        cloud,
        StageReport {
            rows,
            wall_clock: started.elapsed(),
            final_psnr,
        },
    ))
}

/// A fresh identity field shaped by the config.
pub fn initial_field(cfg: &RunConfig) -> DeformationField {
    DeformationField::new(
        &[HIDDEN_WIDTH, HIDDEN_WIDTH],
        POSITION_FREQUENCIES,
        TIME_FREQUENCIES,
        cfg.deform_opacity,
        cfg.seed ^ DYNAMIC_STREAM,
    )
}

/// Trains a deformation field on top of the frozen `cloud`.
///
/// Each iteration makes one motion-alignment pass over every front frame,
/// one temporal refinement pass over every frame from a fresh random view,
/// and one multi-view refinement pass at a random frame.
pub fn dynamic_stage(
    cloud: &GaussianCloud,
    clip: &VideoClip,
    fronts: &[Camera],
    cfg: &RunConfig,
    oracles: &Oracles,
) -> Result<(DeformationField, StageReport)> {
    let started = Stopwatch::start();
    cfg.validate()?;
    if fronts.len() != clip.len() {
        return Err(Error::invalid(format!("{} front cameras for {} frames", fronts.len(), clip.len())));
    }
    let mut field = initial_field(cfg);
    let mut run = || -> Result<Vec<LossRow>> {
        let frames = clip.len();
        let times = clip.times();
        let condition = Condition::Text(cfg.prompt.clone());
        let w = cfg.weights;
        let bg = cfg.background;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ DYNAMIC_STREAM);
        let mut state = OptimizerState::default();
        let mut rows = Vec::with_capacity(cfg.dynamic_iters);
        for iteration in 0..cfg.dynamic_iters {
            let mut row = LossRow {
                iteration,
                ..LossRow::default()
            };
            let focal = fronts[0].focal;
            let time_view = random_view(&mut rng, cfg.camera_distance, focal, cfg.focal_jitter, cfg.width, cfg.height)?;
            let mv_frame = rng.gen_range(0..frames);
            let mv_views = (0..cfg.views_per_step)
                .map(|_| random_view(&mut rng, cfg.camera_distance, focal, cfg.focal_jitter, cfg.width, cfg.height))
                .collect::<Result<Vec<_>>>()?;
            let tau_time = cfg.schedule.sample_timestep(&mut rng);
            let tau_mv = cfg.schedule.sample_timestep(&mut rng);
            let mut shared = None;
            let eps_time = draw_noise(&mut rng, &mut shared, cfg);
            let eps_mv = draw_noise(&mut rng, &mut shared, cfg);

            let deformed: Vec<GaussianCloud> = map_range(frames, |k| deform(cloud, times[k], &field))
                .into_iter()
                .collect::<Result<_>>()?;
            let mut upstream: Vec<Option<RenderGrads>> = vec![None; frames];
            let mut add = |k: usize, g: RenderGrads| match &mut upstream[k] {
                Some(acc) => acc.accumulate(&g),
                slot => *slot = Some(g),
            };

            if w.motion > 0.0 {
                let renders: Vec<ImageBuffer> = map_range(frames, |k| render(&deformed[k], &fronts[k], bg))
                    .into_iter()
                    .collect::<Result<_>>()?;
                let ma = motion_alignment(&renders, clip)?;
                row.motion = w.motion * ma.value;
                let back = map_range(frames, |k| {
                    render_backward(&deformed[k], &fronts[k], bg, &ma.grads[k].clone().scaled(w.motion))
                });
                for (k, g) in back.into_iter().enumerate() {
                    add(k, g?);
                }
            }
            if w.time > 0.0 {
                let renders: Vec<ImageBuffer> = map_range(frames, |k| render(&deformed[k], &time_view, bg))
                    .into_iter()
                    .collect::<Result<_>>()?;
                let l = oracles.with(
                    OracleKind::Video,
                    || Ok(vec![render(cloud, &time_view, bg)?.rgb_plane()]),
                    |o| time_refine_loss(&renders, o, &condition, tau_time, &eps_time, &cfg.schedule),
                )?;
                row.time = w.time * l.value;
                let back = map_range(frames, |k| {
                    render_backward(&deformed[k], &time_view, bg, &l.grads[k].clone().scaled(w.time))
                });
                for (k, g) in back.into_iter().enumerate() {
                    add(k, g?);
                }
            }
            if w.multiview > 0.0 && !mv_views.is_empty() {
                let d = &deformed[mv_frame];
                let renders: Vec<ImageBuffer> = map_range(mv_views.len(), |i| render(d, &mv_views[i], bg))
                    .into_iter()
                    .collect::<Result<_>>()?;
                let targets = || {
                    map_range(mv_views.len(), |i| render(cloud, &mv_views[i], bg).map(|x| x.rgb_plane()))
                        .into_iter()
                        .collect()
                };
                let anchor = &clip.frames()[mv_frame];
                let l = oracles.with(OracleKind::Multiview, targets, |o| {
                    mv_refine_loss(&renders, o, anchor, tau_mv, &eps_mv, &cfg.schedule)
                })?;
                row.multiview = w.multiview * l.value;
                let g = sum_grads(
                    cloud.len(),
                    map_range(mv_views.len(), |i| {
                        render_backward(d, &mv_views[i], bg, &l.grads[i].clone().scaled(w.multiview))
                    }),
                )?;
                add(mv_frame, g);
            }
            row.total = row.motion + row.time + row.multiview;

            let field_grads = map_range(frames, |k| match &upstream[k] {
                Some(g) => deform_backward(cloud, times[k], &field, g).map(|(f, _)| Some(f)),
                None => Ok(None),
            });
            let mut total = FieldGrads::zeros_like(&field);
            for g in field_grads {
                if let Some(g) = g? {
                    total.accumulate(&g);
                }
            }
            step_field(&mut field, &total, &mut state, cfg.rates.deformation, &cfg.adam)?;
            rows.push(row);
        }
        Ok(rows)
    };
    let rows = run().map_err(|e| e.in_stage("dynamic"))?;
    let final_psnr = mean_front_psnr(cloud, &field, clip, fronts, cfg.background)?;
    Ok((
        field,
        StageReport {
            rows,
            wall_clock: started.elapsed(),
            final_psnr,
        },
    ))
}

/// Renders the deformed cloud at each time from one camera.
pub fn render_frames(
    cloud: &GaussianCloud,
    field: &DeformationField,
    view: &Camera,
    times: &[f64],
    background: [f64; 3],
) -> Result<Vec<ImageBuffer>> {
    map_range(times.len(), |k| render(&deform(cloud, times[k], field)?, view, background))
        .into_iter()
        .collect()
}

/// Mean front-view PSNR of the deformed cloud over all frames.
pub fn mean_front_psnr(
    cloud: &GaussianCloud,
    field: &DeformationField,
    clip: &VideoClip,
    fronts: &[Camera],
    background: [f64; 3],
) -> Result<f64> {
    let times = clip.times();
    let mut total = 0.0;
    for (k, frame) in clip.frames().iter().enumerate() {
        total += render(&deform(cloud, times[k], field)?, &fronts[k], background)?.psnr(frame);
    }
    Ok(total / clip.len() as f64)
}
