use std::f64::consts::FRAC_PI_2;

use crate::{Error, Result};

/// Variance-preserving cosine noise schedule:
/// `alpha(tau) = cos(pi tau / 2 T)`, `sigma(tau) = sin(pi tau / 2 T)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffusionSchedule {
    pub max_timestep: u32,
    /// Constant weight `w(tau)`.
    pub weight: f64,
}

impl Default for DiffusionSchedule {
    fn default() -> Self {
        Self {
            max_timestep: 1000,
            weight: 1.0,
        }
    }
}

impl DiffusionSchedule {
    pub fn with_weight(weight: f64) -> Self {
        Self {
            weight,
            ..Self::default()
        }
    }

    fn angle(&self, tau: u32) -> Result<f64> {
        if tau > self.max_timestep {
            return Err(Error::invalid(format!(
                "timestep {tau} exceeds {}",
                self.max_timestep
            )));
        }
        Ok(FRAC_PI_2 * tau as f64 / self.max_timestep as f64)
    }

    /// `(alpha, sigma)` at `tau`; `tau = 0` is the noise-free limit `(1, 0)`.
    pub fn coefficients(&self, tau: u32) -> Result<(f64, f64)> {
        let a = self.angle(tau)?;
        Ok((a.cos(), a.sin()))
    }

    pub fn alpha(&self, tau: u32) -> Result<f64> {
        Ok(self.coefficients(tau)?.0)
    }

    pub fn sigma(&self, tau: u32) -> Result<f64> {
        Ok(self.coefficients(tau)?.1)
    }

    pub fn weight(&self, _tau: u32) -> f64 {
        self.weight
    }

    /// Timestep range used when sampling: `[0.02 T, 0.98 T]`.
    pub fn sampling_range(&self) -> (u32, u32) {
        let t = self.max_timestep as f64;
        ((0.02 * t).round() as u32, (0.98 * t).round() as u32)
    }

    pub fn sample_timestep<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let (lo, hi) = self.sampling_range();
        rng.gen_range(lo..=hi)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_timestep == 0 {
            return Err(Error::invalid("schedule needs a positive max timestep"));
        }
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return Err(Error::invalid("schedule weight must be positive"));
        }
        Ok(())
    }
}
