//! Per-iteration loss records and the run manifest.

use std::time::Duration;

use serde::Serialize;

use super::config::RunConfig;

/// One iteration's weighted loss terms. Terms a stage does not use stay zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LossRow {
    pub iteration: usize,
    pub mse: f64,
    pub mask: f64,
    pub lpips: f64,
    pub texture: f64,
    pub geometry: f64,
    pub t2i: f64,
    pub motion: f64,
    pub time: f64,
    pub multiview: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageReport {
    pub rows: Vec<LossRow>,
    pub wall_clock: Duration,
    /// Front-view PSNR against the first anchor frame after the stage.
    pub final_psnr: f64,
}

impl StageReport {
    pub fn iterations(&self) -> usize {
        self.rows.len()
    }

    /// CSV text with one header line and one row per iteration.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,mse,mask,lpips,texture,geometry,t2i,motion,time,multiview,total\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                r.iteration, r.mse, r.mask, r.lpips, r.texture, r.geometry, r.t2i, r.motion, r.time, r.multiview, r.total
            ));
        }
        out
    }
}

/// Resolved settings and timings of a run.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub focal: f64,
    /// Per-frame focals when sweeping every frame.
    pub frame_focals: Vec<f64>,
    pub static_iterations: usize,
    pub dynamic_iterations: usize,
    pub static_seconds: f64,
    pub dynamic_seconds: f64,
    pub static_psnr: f64,
    pub gaussians: usize,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest is always serializable")
    }
}
