//! End-to-end runs and their on-disk layout.

use super::config::RunConfig;
use super::report::{Manifest, StageReport};
use super::stages::{dynamic_stage, resolve_focal, static_stage, FocalResolution, Oracles};
use crate::deform::DeformationField;
use crate::scene::{GaussianCloud, TriMesh, VideoClip};
use crate::Result;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub focal: FocalResolution,
    pub cloud: GaussianCloud,
    pub field: DeformationField,
    pub static_report: StageReport,
    pub dynamic_report: StageReport,
}

impl RunOutput {
    pub fn manifest(&self, cfg: &RunConfig) -> Manifest {
        Manifest {
            config: cfg.clone(),
            focal: self.focal.focal(),
            frame_focals: self.focal.fronts.iter().map(|c| c.focal).collect(),
            static_iterations: self.static_report.iterations(),
            dynamic_iterations: self.dynamic_report.iterations(),
            static_seconds: self.static_report.wall_clock.as_secs_f64(),
            dynamic_seconds: self.dynamic_report.wall_clock.as_secs_f64(),
            static_psnr: self.static_report.final_psnr,
            gaussians: self.cloud.len(),
        }
    }
}

/// Focal sweep, static stage, then dynamic stage.
pub fn run_pipeline(clip: &VideoClip, meshes: &[TriMesh], cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let oracles = Oracles::from_config(cfg)?;
    let focal = resolve_focal(clip, meshes, cfg)?;
    let (cloud, static_report) = static_stage(clip, meshes, focal.front(), cfg, &oracles)?;
    let (field, dynamic_report) = dynamic_stage(&cloud, clip, &focal.fronts, cfg, &oracles)?;
    Ok(RunOutput {
        focal,
        cloud,
        field,
        static_report,
        dynamic_report,
    })
}

/// File names inside an output directory.
pub mod files {
    pub const CLOUD: &str = "cloud.ply";
    pub const FIELD: &str = "field.bin";
    pub const STATIC_REPORT: &str = "static_report.csv";
    pub const DYNAMIC_REPORT: &str = "dynamic_report.csv";
    pub const FOCAL_SWEEP: &str = "focal_sweep.csv";
    pub const MANIFEST: &str = "manifest.json";
    pub const FRAMES: &str = "frames";
}

#[cfg(feature = "io")]
pub fn write_run(out: &RunOutput, cfg: &RunConfig, dir: &std::path::Path) -> Result<()> {
    use crate::Error;
    let put = |name: &str, bytes: &[u8]| {
        let p = dir.join(name);
        std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    put(files::CLOUD, &super::ply::ply_bytes(&out.cloud))?;
    put(files::FIELD, &out.field.to_bytes())?;
    put(files::STATIC_REPORT, out.static_report.to_csv().as_bytes())?;
    put(files::DYNAMIC_REPORT, out.dynamic_report.to_csv().as_bytes())?;
    let sweeps: String = out.focal.sweeps.iter().map(|s| s.to_csv()).collect();
    put(files::FOCAL_SWEEP, sweeps.as_bytes())?;
    put(files::MANIFEST, out.manifest(cfg).to_json().as_bytes())?;
    let times: Vec<f64> = (0..out.focal.fronts.len())
        .map(|k| crate::scene::normalized_time(k, out.focal.fronts.len()))
        .collect();
    super::io::render_sequence(
        &out.cloud,
        &out.field,
        out.focal.front(),
        &times,
        cfg.background,
        &dir.join(files::FRAMES),
    )?;
    Ok(())
}
