//! Pixel-space descent under two disagreeing denoisers, with or without an anchor.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{combined_sds, Condition, DenoiserOracle, MockTargetOracle, OracleKind};
use crate::losses::{texture_alignment, FeatureStack};
use crate::pipeline::optim::{adam_step, AdamConfig, OptimizerState};
use crate::scene::{DiffusionSchedule, ImageBuffer, RgbPlane};
use crate::Result;

#[derive(Debug, Clone)]
pub struct ConflictSetup {
    pub start: ImageBuffer,
    pub targets: [ImageBuffer; 2],
    /// Anchor image and the weight of its texture-alignment term.
    pub anchor: Option<(ImageBuffer, f64)>,
    pub steps: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ConflictRun {
    pub image: ImageBuffer,
    /// MSE to the mean of the two targets after each step.
    pub distance_to_average: Vec<f64>,
    /// MSE to the anchor after each step (empty without an anchor).
    pub distance_to_anchor: Vec<f64>,
}

pub fn target_average(targets: &[ImageBuffer; 2]) -> ImageBuffer {
    let mut avg = targets[0].clone();
    for (a, b) in avg.rgb.iter_mut().zip(&targets[1].rgb) {
        *a = 0.5 * (*a + b);
    }
    avg
}

/// Adam descent on the pixels of `setup.start` against the summed SDS
/// gradient of two mock denoisers. The learning rate decays linearly to
/// zero so the final iterate settles instead of jittering with `tau`.
pub fn conflict_descent(setup: &ConflictSetup) -> Result<ConflictRun> {
    let schedule = DiffusionSchedule::default();
    let stack = FeatureStack::new(setup.seed ^ 0x5eed);
    let oracles: Vec<MockTargetOracle> = setup
        .targets
        .iter()
        .map(|t| MockTargetOracle::new(OracleKind::Image, vec![t.rgb_plane()], schedule))
        .collect();
    let pairs: Vec<(&dyn DenoiserOracle, Condition)> = oracles
        .iter()
        .map(|o| (o as &dyn DenoiserOracle, Condition::None))
        .collect();
    let average = target_average(&setup.targets);
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let mut x = setup.start.clone();
    let n = x.rgb.len() as f64;
    let mut state = OptimizerState::default();
    let adam = AdamConfig::default();
    let mut run = ConflictRun {
        image: x.clone(),
        distance_to_average: Vec::with_capacity(setup.steps),
        distance_to_anchor: Vec::new(),
    };
    for step in 0..setup.steps {
        let tau = schedule.sample_timestep(&mut rng);
        let eps = RgbPlane::gaussian(&mut rng, x.width, x.height);
        let mut grad = combined_sds(&x, &pairs, tau, std::slice::from_ref(&eps), &schedule)?.scaled(1.0 / n);
        if let Some((anchor, weight)) = &setup.anchor {
            let ta = texture_alignment(&x, anchor, setup.lambda, &stack)?;
            grad.add_scaled(ta.grad(), *weight);
        }
        let lr = setup.learning_rate * (1.0 - step as f64 / setup.steps as f64);
        adam_step(&mut [x.rgb.as_mut_slice()], &[grad.rgb.as_slice()], &mut state, &[lr], &adam)?;
        run.distance_to_average.push(x.mse(&average));
        if let Some((anchor, _)) = &setup.anchor {
            run.distance_to_anchor.push(x.mse(anchor));
        }
    }
    run.image = x;
    Ok(run)
}
