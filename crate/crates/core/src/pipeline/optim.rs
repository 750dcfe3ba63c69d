//! Adam with per-group learning rates.

use serde::{Deserialize, Serialize};

use crate::deform::{DeformationField, FieldGrads};
use crate::render::RenderGrads;
use crate::scene::GaussianCloud;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |b: f64| (0.0..1.0).contains(&b);
        if !unit(self.beta1) || !unit(self.beta2) || !(self.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "adam betas must lie in [0, 1) and epsilon must be positive, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Learning rate per parameter group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearningRates {
    pub positions: f64,
    pub colors: f64,
    pub opacity: f64,
    pub scales: f64,
    pub rotations: f64,
    pub deformation: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            positions: 1.6e-4,
            colors: 2.5e-3,
            opacity: 5e-2,
            scales: 5e-3,
            rotations: 1e-3,
            deformation: 1e-3,
        }
    }
}

impl LearningRates {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.positions,
            self.colors,
            self.opacity,
            self.scales,
            self.rotations,
            self.deformation,
        ];
        if all.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(Error::Config(format!("learning rates must be finite and non-negative, got {self:?}")));
        }
        Ok(())
    }
}

/// Moment accumulators, one pair per parameter group, created on the first step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
}

impl OptimizerState {
    fn ensure_shapes(&mut self, params: &[&mut [f64]]) -> Result<()> {
        if self.first.is_empty() && self.step == 0 {
            self.first = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.second = self.first.clone();
            return Ok(());
        }
        let same = self.first.len() == params.len()
            && self.first.iter().zip(params).all(|(m, p)| m.len() == p.len());
        if !same {
            return Err(Error::invalid("optimizer state does not match parameter shapes"));
        }
        Ok(())
    }
}

/// One bias-corrected Adam update over several parameter groups.
///
/// Gradients are checked before anything is written, so a rejected step
/// leaves both parameters and state untouched.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut OptimizerState,
    rates: &[f64],
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != rates.len() {
        return Err(Error::invalid(format!(
            "adam_step got {} parameter groups, {} gradient groups and {} rates",
            params.len(),
            grads.len(),
            rates.len()
        )));
    }
    for (g, (p, gr)) in params.iter().zip(grads).enumerate() {
        if p.len() != gr.len() {
            return Err(Error::invalid(format!(
                "group {g} has {} parameters but {} gradients",
                p.len(),
                gr.len()
            )));
        }
        if let Some(i) = gr.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow(format!("gradient {i} of group {g} is not finite")));
        }
    }
    state.ensure_shapes(params)?;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (g, p) in params.iter_mut().enumerate() {
        let (m, v) = (&mut state.first[g], &mut state.second[g]);
        for i in 0..p.len() {
            let gi = grads[g][i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= rates[g] * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
    Ok(())
}

/// Updates every cloud group and renormalizes the quaternions afterwards.
pub fn step_cloud(
    cloud: &mut GaussianCloud,
    grads: &RenderGrads,
    state: &mut OptimizerState,
    rates: &LearningRates,
    cfg: &AdamConfig,
) -> Result<()> {
    if grads.len() != cloud.len() {
        return Err(Error::invalid(format!(
            "gradient has {} points, cloud has {}",
            grads.len(),
            cloud.len()
        )));
    }
    let mut params: Vec<&mut [f64]> = vec![
        cloud.positions.as_flattened_mut(),
        cloud.colors.as_flattened_mut(),
        cloud.opacity_logits.as_mut_slice(),
        cloud.log_scales.as_flattened_mut(),
        cloud.rotations.as_flattened_mut(),
    ];
    let g: [&[f64]; 5] = [
        grads.positions.as_flattened(),
        grads.colors.as_flattened(),
        &grads.opacity_logits,
        grads.log_scales.as_flattened(),
        grads.rotations.as_flattened(),
    ];
    let r = [rates.positions, rates.colors, rates.opacity, rates.scales, rates.rotations];
    adam_step(&mut params, &g, state, &r, cfg)?;
    cloud.normalize_rotations();
    Ok(())
}

/// Updates every weight and bias of the field with the deformation rate.
pub fn step_field(
    field: &mut DeformationField,
    grads: &FieldGrads,
    state: &mut OptimizerState,
    rate: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    let g: Vec<&[f64]> = grads
        .weights
        .iter()
        .zip(&grads.bias)
        .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
        .collect();
    let mut params = field.parameter_blocks_mut();
    let rates = vec![rate; params.len()];
    adam_step(&mut params, &g, state, &rates, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = vec![1.0, -2.0];
        let mut s = OptimizerState::default();
        adam_step(&mut [p.as_mut_slice()], &[&[0.0, 0.0]], &mut s, &[0.1], &AdamConfig::default()).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_moves_by_rate() {
        for g in [1e-2, 1.0, 300.0] {
            let mut p = vec![0.0];
            let mut s = OptimizerState::default();
            adam_step(&mut [p.as_mut_slice()], &[&[g]], &mut s, &[0.01], &AdamConfig::default()).unwrap();
            assert!(((-p[0]) / 0.01 - 1.0).abs() < 1e-6, "g={g} p={}", p[0]);
        }
    }

    #[test]
    fn non_finite_gradient_rejected_without_side_effects() {
        let mut p = vec![0.5];
        let mut s = OptimizerState::default();
        let err = adam_step(&mut [p.as_mut_slice()], &[&[f64::NAN]], &mut s, &[0.1], &AdamConfig::default());
        assert!(matches!(err, Err(Error::NumericOverflow(_))));
        assert_eq!(p, vec![0.5]);
        assert_eq!(s.step, 0);
    }

    #[test]
    fn shape_change_rejected() {
        let mut s = OptimizerState::default();
        let cfg = AdamConfig::default();
        let mut a = vec![0.0; 2];
        adam_step(&mut [a.as_mut_slice()], &[&[1.0, 1.0]], &mut s, &[0.1], &cfg).unwrap();
        let mut b = vec![0.0; 3];
        assert!(adam_step(&mut [b.as_mut_slice()], &[&[1.0; 3]], &mut s, &[0.1], &cfg).is_err());
    }
}
