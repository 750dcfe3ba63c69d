//! Focal-length recovery by grid search over mesh renders.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::render::render_mesh;
use crate::scene::{Camera, ImageBuffer, TriMesh};
use crate::{Error, Result};

/// Serializable sweep settings; the pose is supplied separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FocalOptions {
    /// Centre of the sweep; `None` means the image width.
    pub initial: Option<f64>,
    pub offset_min: f64,
    pub offset_max: f64,
    pub candidates: usize,
    /// Second sweep around the winner over 1/8 of the range.
    pub refine: bool,
    /// Sweep every frame instead of only the first.
    pub per_frame: bool,
}

impl Default for FocalOptions {
    fn default() -> Self {
        Self {
            initial: None,
            offset_min: -64.0,
            offset_max: 64.0,
            candidates: 33,
            refine: false,
            per_frame: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FocalSweepConfig {
    pub initial: f64,
    pub offset_min: f64,
    pub offset_max: f64,
    pub candidates: usize,
    pub refine: bool,
    /// Front-view pose; its focal is ignored.
    pub pose: Camera,
    pub background: [f64; 3],
}

impl FocalSweepConfig {
    pub fn from_options(opts: &FocalOptions, pose: Camera, background: [f64; 3]) -> Self {
        Self {
            initial: opts.initial.unwrap_or(pose.width as f64),
            offset_min: opts.offset_min,
            offset_max: opts.offset_max,
            candidates: opts.candidates,
            refine: opts.refine,
            pose,
            background,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.candidates == 0 {
            return Err(Error::invalid("focal sweep needs at least one candidate"));
        }
        if !(self.offset_min <= self.offset_max) || !self.initial.is_finite() {
            return Err(Error::invalid(format!(
                "focal sweep range [{}, {}] around {} is not valid",
                self.offset_min, self.offset_max, self.initial
            )));
        }
        Ok(())
    }

    /// Evenly spaced candidates over `[initial + offset_min, initial + offset_max]`.
    pub fn grid(&self) -> Vec<f64> {
        grid(self.initial + self.offset_min, self.initial + self.offset_max, self.candidates)
    }
}

fn grid(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![lo];
    }
    (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FocalSweep {
    pub focal: f64,
    pub candidates: Vec<f64>,
    /// RGB MSE per candidate; non-positive focals score `+inf`.
    pub mse: Vec<f64>,
}

impl FocalSweep {
    /// `candidate_focal,mse` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("candidate_focal,mse\n");
        for (f, m) in self.candidates.iter().zip(&self.mse) {
            out.push_str(&format!("{f},{m}\n"));
        }
        out
    }
}

fn score(mesh: &TriMesh, frame: &ImageBuffer, cfg: &FocalSweepConfig, candidates: &[f64]) -> Result<Vec<f64>> {
    crate::par::map_range(candidates.len(), |i| {
        let f = candidates[i];
        if !(f > 0.0) {
            return Ok(f64::INFINITY);
        }
        Ok(render_mesh(mesh, &cfg.pose.with_focal(f), cfg.background)?.mse(frame))
    })
    .into_iter()
    .collect()
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Renders the mesh from the front at each candidate focal and keeps the
/// one closest to `frame` in MSE, taking the first on ties.
pub fn sweep_focal(mesh: &TriMesh, frame: &ImageBuffer, cfg: &FocalSweepConfig) -> Result<FocalSweep> {
    if mesh.is_empty() {
        return Err(Error::invalid("focal sweep needs a nonempty mesh"));
    }
    cfg.validate()?;
    if frame.width != cfg.pose.width || frame.height != cfg.pose.height {
        return Err(Error::invalid(format!(
            "frame is {}x{}, camera is {}x{}",
            frame.width, frame.height, cfg.pose.width, cfg.pose.height
        )));
    }
    let mut candidates = cfg.grid();
    let mut mse = score(mesh, frame, cfg, &candidates)?;
    let mut best = argmin(&mse);
    if cfg.refine && cfg.candidates > 1 {
        let half = (cfg.offset_max - cfg.offset_min) / 16.0;
        let centre = candidates[best];
        let fine = grid(centre - half, centre + half, cfg.candidates);
        let fine_mse = score(mesh, frame, cfg, &fine)?;
        let b = argmin(&fine_mse);
        if fine_mse[b] < mse[best] {
            best = candidates.len() + b;
        }
        candidates.extend(fine);
        mse.extend(fine_mse);
    }
    Ok(FocalSweep {
        focal: candidates[best],
        candidates,
        mse,
    })
}

/// `f` plus a uniform offset in `[-magnitude, magnitude]`, fixed by `seed`.
pub fn jitter_focal(f: f64, magnitude: f64, seed: u64) -> Result<f64> {
    if !(magnitude >= 0.0) || !magnitude.is_finite() {
        return Err(Error::invalid(format!("jitter magnitude {magnitude} must be non-negative")));
    }
    if magnitude == 0.0 {
        return Ok(f);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(f + rng.gen_range(-magnitude..=magnitude))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(m: usize) -> (TriMesh, FocalSweepConfig) {
        let mesh = TriMesh::icosphere(0.5, 2, [0.8, 0.4, 0.2]);
        let pose = Camera::front(2.5, 64.0, 48, 48);
        let cfg = FocalSweepConfig::from_options(
            &FocalOptions {
                candidates: m,
                ..FocalOptions::default()
            },
            pose,
            [0.0; 3],
        );
        (mesh, cfg)
    }

    #[test]
    fn on_grid_focal_is_exact() {
        let (mesh, cfg) = setup(33);
        let truth = cfg.grid()[21];
        let frame = render_mesh(&mesh, &cfg.pose.with_focal(truth), [0.0; 3]).unwrap();
        let s = sweep_focal(&mesh, &frame, &cfg).unwrap();
        assert_eq!(s.focal, truth);
        assert!(s.mse[21] < 1e-10);
        assert!(s.mse.iter().all(|m| *m >= s.mse[21]));
    }

    #[test]
    fn single_candidate_is_lower_bound() {
        let (mesh, cfg) = setup(1);
        let frame = ImageBuffer::new(48, 48);
        let s = sweep_focal(&mesh, &frame, &cfg).unwrap();
        assert_eq!(s.focal, 48.0 - 64.0);
        assert_eq!(s.mse.len(), 1);
    }

    #[test]
    fn empty_mesh_rejected() {
        let (_, cfg) = setup(5);
        let err = sweep_focal(&TriMesh::default(), &ImageBuffer::new(48, 48), &cfg);
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn jitter_is_seeded_and_bounded() {
        assert_eq!(jitter_focal(100.0, 0.0, 9).unwrap(), 100.0);
        assert_eq!(jitter_focal(100.0, 8.0, 9).unwrap(), jitter_focal(100.0, 8.0, 9).unwrap());
        let v = jitter_focal(100.0, 8.0, 3).unwrap();
        assert!((92.0..=108.0).contains(&v));
        assert!(jitter_focal(1.0, -1.0, 0).is_err());
    }
}
