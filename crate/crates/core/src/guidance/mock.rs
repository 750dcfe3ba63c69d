use super::{Condition, DenoiserOracle, OracleKind};
use crate::scene::{DiffusionSchedule, RgbPlane};
use crate::{Error, Result};

/// Perfect denoiser towards known targets:
/// `eps_hat(z, ., tau) = (z - alpha_tau x*) / sigma_tau`.
///
/// One target is broadcast over the batch; otherwise the batch must
/// have exactly one target per input.
#[derive(Debug, Clone, PartialEq)]
pub struct MockTargetOracle {
    pub kind: OracleKind,
    pub targets: Vec<RgbPlane>,
    pub schedule: DiffusionSchedule,
}

impl MockTargetOracle {
    pub fn new(kind: OracleKind, targets: Vec<RgbPlane>, schedule: DiffusionSchedule) -> Self {
        Self {
            kind,
            targets,
            schedule,
        }
    }
}

impl DenoiserOracle for MockTargetOracle {
    fn kind(&self) -> OracleKind {
        self.kind
    }

    fn predict_noise(&self, noisy: &[RgbPlane], _condition: &Condition, tau: u32) -> Result<Vec<RgbPlane>> {
        let (a, s) = self.schedule.coefficients(tau)?;
        if s == 0.0 {
            return Err(Error::invalid("mock oracle is undefined at tau = 0"));
        }
        if self.targets.len() != 1 && self.targets.len() != noisy.len() {
            return Err(Error::invalid(format!(
                "mock oracle has {} targets for a batch of {}",
                self.targets.len(),
                noisy.len()
            )));
        }
        noisy
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let target = &self.targets[if self.targets.len() == 1 { 0 } else { i }];
                if !target.same_shape(z) {
                    return Err(Error::invalid("mock oracle target shape differs from input"));
                }
                Ok(RgbPlane {
                    width: z.width,
                    height: z.height,
                    data: z.data.iter().zip(&target.data).map(|(zv, t)| (zv - a * t) / s).collect(),
                })
            })
            .collect()
    }
}
