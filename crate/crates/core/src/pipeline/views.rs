//! Random cameras for geometry alignment and refinement.

use rand::Rng;

use crate::focal::jitter_focal;
use crate::scene::Camera;
use crate::Result;

pub const AZIMUTH_RANGE: (f64, f64) = (0.0, 360.0);
pub const ELEVATION_RANGE: (f64, f64) = (-15.0, 30.0);

/// Orbit camera at `distance` with azimuth in [0, 360), elevation in
/// [-15, 30] degrees and a jittered focal.
pub fn random_view<R: Rng + ?Sized>(
    rng: &mut R,
    distance: f64,
    focal: f64,
    jitter: f64,
    width: usize,
    height: usize,
) -> Result<Camera> {
    let az = rng.gen_range(AZIMUTH_RANGE.0..AZIMUTH_RANGE.1);
    let el = rng.gen_range(ELEVATION_RANGE.0..=ELEVATION_RANGE.1);
    let f = jitter_focal(focal, jitter, rng.gen())?;
    Ok(Camera::orbit(az, el, distance, f, width, height))
}
