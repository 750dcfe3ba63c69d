use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use splat_align::deform::deform;
use splat_align::pipeline::config::RunConfig;
use splat_align::pipeline::io::{ingest_anchor, ingest_meshes, read_field, render_sequence, write_field, write_frames, write_obj};
use splat_align::pipeline::ply::{export_ply, import_ply};
use splat_align::pipeline::run::{files, run_pipeline, write_run};
use splat_align::pipeline::stages::{dynamic_stage, resolve_focal, static_stage, Oracles};
use splat_align::pipeline::synth::synth_anchor;
use splat_align::scene::{Camera, TriMesh, VideoClip};
use splat_align::{Error, Result};

#[derive(Parser)]
#[command(name = "splat-align", version, about = "Optimize 4D Gaussians against anchor frames and meshes")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `mock` or the base URL of a denoising server.
    #[arg(long, global = true)]
    oracle: Option<String>,
    /// Directory with frame_0000.png, frame_0001.png, ...
    #[arg(long, global = true)]
    frames: Option<PathBuf>,
    /// Directory with mesh_0000.obj, ...
    #[arg(long, global = true)]
    meshes: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the focal length on the anchor frames.
    Focal,
    /// Focal sweep and static stage; writes cloud.ply.
    Static,
    /// Train the deformation field on top of an existing cloud.
    Dynamic {
        /// Cloud from the static stage (default: <out>/cloud.ply).
        #[arg(long)]
        cloud: Option<PathBuf>,
    },
    /// Focal sweep, static and dynamic stages.
    Run,
    /// Render the trained cloud at evenly spaced times.
    Render {
        #[arg(long)]
        cloud: Option<PathBuf>,
        #[arg(long)]
        field: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        count: usize,
        #[arg(long)]
        focal: Option<f64>,
        /// Orbit azimuth in degrees.
        #[arg(long, default_value_t = 0.0)]
        azimuth: f64,
        #[arg(long, default_value_t = 0.0)]
        elevation: f64,
    },
    /// Write the cloud deformed to time `t` as PLY.
    Export {
        #[arg(long)]
        cloud: Option<PathBuf>,
        #[arg(long)]
        field: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        time: f64,
    },
    /// Write a synthetic anchor fixture (frames and meshes).
    Synth,
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::from_json(&std::fs::read_to_string(p).map_err(|e| io_err(p, e))?)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output_dir = o.clone();
    }
    if let Some(o) = &common.oracle {
        cfg.oracle = o.clone();
    }
    if let Some(f) = &common.frames {
        cfg.frames_dir = Some(f.clone());
    }
    if let Some(m) = &common.meshes {
        cfg.meshes_dir = Some(m.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn inputs(cfg: &RunConfig) -> Result<(VideoClip, Vec<TriMesh>)> {
    let frames = cfg
        .frames_dir
        .as_ref()
        .ok_or_else(|| Error::Config("no anchor frames given; pass --frames (try `splat-align synth` first)".into()))?;
    let meshes = cfg
        .meshes_dir
        .as_ref()
        .ok_or_else(|| Error::Config("no meshes given; pass --meshes".into()))?;
    let clip = ingest_anchor(frames, cfg.background)?;
    let meshes = ingest_meshes(meshes, clip.len())?;
    Ok((clip, meshes))
}

/// Focal recorded by a previous run in the same output directory.
fn manifest_focal(path: &Path) -> Result<f64> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    value["focal"]
        .as_f64()
        .ok_or_else(|| Error::Config(format!("{} has no focal; pass --focal", path.display())))
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    std::fs::write(&path, text).map_err(|e| io_err(&path, e))
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| io_err(&cfg.output_dir, e))?;
    Ok(&cfg.output_dir)
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.common)?;
    let default_path = |given: &Option<PathBuf>, name: &str| given.clone().unwrap_or_else(|| cfg.output_dir.join(name));
    match &cli.command {
        Command::Focal => {
            let (clip, meshes) = inputs(&cfg)?;
            let res = resolve_focal(&clip, &meshes, &cfg)?;
            let csv: String = res.sweeps.iter().map(|s| s.to_csv()).collect();
            write(out_dir(&cfg)?.join(files::FOCAL_SWEEP), &csv)?;
            for (k, c) in res.fronts.iter().enumerate() {
                println!("frame {k}: focal {:.3}", c.focal);
            }
        }
        Command::Static => {
            let (clip, meshes) = inputs(&cfg)?;
            let res = resolve_focal(&clip, &meshes, &cfg)?;
            let (cloud, report) = static_stage(&clip, &meshes, res.front(), &cfg, &Oracles::from_config(&cfg)?)?;
            let dir = out_dir(&cfg)?;
            export_ply(&cloud, &dir.join(files::CLOUD))?;
            write(dir.join(files::STATIC_REPORT), &report.to_csv())?;
            println!(
                "static: {} iterations, front PSNR {:.2} dB, {:.1}s",
                report.iterations(),
                report.final_psnr,
                report.wall_clock.as_secs_f64()
            );
        }
        Command::Dynamic { cloud } => {
            let (clip, meshes) = inputs(&cfg)?;
            let cloud = import_ply(&default_path(cloud, files::CLOUD))?;
            let res = resolve_focal(&clip, &meshes, &cfg)?;
            let (field, report) = dynamic_stage(&cloud, &clip, &res.fronts, &cfg, &Oracles::from_config(&cfg)?)?;
            let dir = out_dir(&cfg)?;
            write_field(&field, &dir.join(files::FIELD))?;
            write(dir.join(files::DYNAMIC_REPORT), &report.to_csv())?;
            println!(
                "dynamic: {} iterations, mean front PSNR {:.2} dB, {:.1}s",
                report.iterations(),
                report.final_psnr,
                report.wall_clock.as_secs_f64()
            );
        }
        Command::Run => {
            let (clip, meshes) = inputs(&cfg)?;
            let out = run_pipeline(&clip, &meshes, &cfg)?;
            write_run(&out, &cfg, out_dir(&cfg)?)?;
            println!(
                "run: focal {:.3}, {} + {} iterations, static PSNR {:.2} dB, output in {}",
                out.focal.focal(),
                out.static_report.iterations(),
                out.dynamic_report.iterations(),
                out.static_report.final_psnr,
                cfg.output_dir.display()
            );
        }
        Command::Render {
            cloud,
            field,
            count,
            focal,
            azimuth,
            elevation,
        } => {
            let cloud = import_ply(&default_path(cloud, files::CLOUD))?;
            let field = read_field(&default_path(field, files::FIELD))?;
            let f = match focal {
                Some(f) => *f,
                None => manifest_focal(&cfg.output_dir.join(files::MANIFEST))?,
            };
            let view = Camera::orbit(*azimuth, *elevation, cfg.camera_distance, f, cfg.width, cfg.height);
            let times: Vec<f64> = (0..*count)
                .map(|k| if *count > 1 { k as f64 / (*count - 1) as f64 } else { 0.0 })
                .collect();
            let paths = render_sequence(&cloud, &field, &view, &times, cfg.background, &out_dir(&cfg)?.join(files::FRAMES))?;
            println!("wrote {} frames", paths.len());
        }
        Command::Export { cloud, field, time } => {
            let cloud = import_ply(&default_path(cloud, files::CLOUD))?;
            let field = read_field(&default_path(field, files::FIELD))?;
            let path = out_dir(&cfg)?.join(format!("cloud_t{time:.3}.ply"));
            export_ply(&deform(&cloud, *time, &field)?, &path)?;
            println!("wrote {}", path.display());
        }
        Command::Synth => {
            let s = synth_anchor(cfg.seed, &cfg)?;
            let dir = out_dir(&cfg)?;
            write_frames(s.clip.frames(), &dir.join("frames"))?;
            let mesh_dir = dir.join("meshes");
            std::fs::create_dir_all(&mesh_dir).map_err(|e| io_err(&mesh_dir, e))?;
            for (k, m) in s.meshes.iter().enumerate() {
                write_obj(m, &mesh_dir.join(format!("mesh_{k:04}.obj")))?;
            }
            println!(
                "wrote {} frames and meshes to {} (true focal {:.3})",
                s.clip.len(),
                dir.display(),
                s.focal
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
