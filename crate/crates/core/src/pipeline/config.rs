//! Run configuration, mirrored field-for-field by the JSON config file.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::optim::{AdamConfig, LearningRates};
use crate::focal::FocalOptions;
use crate::losses::DEFAULT_LAMBDA;
use crate::scene::DiffusionSchedule;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    /// Perceptual weight inside texture and geometry alignment.
    pub lambda: f64,
    pub texture: f64,
    pub geometry: f64,
    pub t2i: f64,
    pub motion: f64,
    pub time: f64,
    pub multiview: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            texture: 1.0,
            geometry: 1.0,
            t2i: 0.01,
            motion: 1.0,
            time: 0.01,
            multiview: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub frames_dir: Option<PathBuf>,
    pub meshes_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub width: usize,
    pub height: usize,
    pub background: [f64; 3],
    /// Distance from the origin of the front and random cameras.
    pub camera_distance: f64,
    pub weights: LossWeights,
    pub static_iters: usize,
    pub dynamic_iters: usize,
    pub rates: LearningRates,
    pub adam: AdamConfig,
    /// Random geometry-alignment and multi-view cameras per iteration.
    pub views_per_step: usize,
    /// Frame count of generated fixtures.
    pub frames: usize,
    pub seed: u64,
    /// `"mock"` or the base URL of a denoising server.
    pub oracle: String,
    pub prompt: String,
    pub focal: FocalOptions,
    /// Focal perturbation of random cameras, in pixels.
    pub focal_jitter: f64,
    pub num_gaussians: usize,
    /// Give each oracle its own noise sample instead of a shared one.
    pub independent_noise: bool,
    pub deform_opacity: bool,
    pub schedule: DiffusionSchedule,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            frames_dir: None,
            meshes_dir: None,
            output_dir: PathBuf::from("out"),
            width: 64,
            height: 64,
            background: [0.0; 3],
            camera_distance: 2.5,
            weights: LossWeights::default(),
            static_iters: 400,
            dynamic_iters: 200,
            rates: LearningRates::default(),
            adam: AdamConfig::default(),
            views_per_step: 4,
            frames: 8,
            seed: 0,
            oracle: "mock".into(),
            prompt: String::new(),
            focal: FocalOptions::default(),
            focal_jitter: 8.0,
            num_gaussians: 1200,
            independent_noise: false,
            deform_opacity: false,
            schedule: DiffusionSchedule::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn is_mock(&self) -> bool {
        self.oracle == "mock"
    }

    pub fn total_iters(&self) -> usize {
        self.static_iters + self.dynamic_iters
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < crate::losses::MIN_SIDE || self.height < crate::losses::MIN_SIDE {
            return Err(Error::Config(format!(
                "image size {}x{} is below the minimum side {}",
                self.width,
                self.height,
                crate::losses::MIN_SIDE
            )));
        }
        let w = &self.weights;
        let weights = [w.lambda, w.texture, w.geometry, w.t2i, w.motion, w.time, w.multiview];
        if weights.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config(format!("loss weights must be finite and non-negative, got {w:?}")));
        }
        if !(self.camera_distance > 0.0) || !self.camera_distance.is_finite() {
            return Err(Error::Config("camera_distance must be positive".into()));
        }
        if !(self.focal_jitter >= 0.0) {
            return Err(Error::Config("focal_jitter must be non-negative".into()));
        }
        if self.frames == 0 {
            return Err(Error::Config("frames must be at least 1".into()));
        }
        if self.focal.candidates == 0 || !(self.focal.offset_min <= self.focal.offset_max) {
            return Err(Error::Config(format!("focal sweep settings are not valid: {:?}", self.focal)));
        }
        if self.oracle.is_empty() {
            return Err(Error::Config("oracle must be \"mock\" or a URL".into()));
        }
        self.rates.validate()?;
        self.adam.validate()?;
        self.schedule.validate().map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_total_six_hundred() {
        assert_eq!(RunConfig::default().total_iters(), 600);
    }

    #[test]
    fn json_round_trip() {
        let cfg = RunConfig {
            seed: 7,
            ..RunConfig::default()
        };
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(RunConfig::from_json(r#"{"sede": 3}"#), Err(Error::Config(_))));
        assert!(RunConfig::from_json(r#"{"weights": {"lamda": 0.1}}"#).is_err());
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = RunConfig::from_json(r#"{"static_iters": 5}"#).unwrap();
        assert_eq!(cfg.static_iters, 5);
        assert_eq!(cfg.dynamic_iters, 200);
    }

    #[test]
    fn negative_weight_rejected() {
        assert!(RunConfig::from_json(r#"{"weights": {"geometry": -1}}"#).is_err());
    }
}
