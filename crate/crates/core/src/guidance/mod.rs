//! Score distillation against pluggable denoisers.
//!
//! Latents are pixels: `z = alpha_tau * x + sigma_tau * eps` is formed
//! directly on the rendered RGB. Oracle predictions are treated as
//! constants (stop-gradient), so every gradient returned here is the
//! residual `w(tau) (eps_hat - eps)`, scaled to match its loss.

mod conflict;
mod mock;
#[cfg(feature = "remote")]
mod remote;

pub use conflict::{conflict_descent, ConflictRun, ConflictSetup};
pub use mock::MockTargetOracle;
#[cfg(feature = "remote")]
pub use remote::{remote_oracle, EndpointDescriptor, RemoteOracle, DEFAULT_MAX_IN_FLIGHT};

use crate::losses::LossValue;
use crate::scene::{DiffusionSchedule, ImageBuffer, ImageGrad, RgbPlane};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    Image,
    Video,
    Multiview,
}

impl std::fmt::Display for OracleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OracleKind::Image => "image",
            OracleKind::Video => "video",
            OracleKind::Multiview => "multiview",
        })
    }
}

/// What a denoiser is conditioned on.
#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    None,
    Text(String),
    Image(ImageBuffer),
}

/// A noise-prediction service.
///
/// Implementations must be deterministic for fixed inputs, return one
/// prediction per input with identical shape, and be callable from several
/// threads at once.
pub trait DenoiserOracle: Send + Sync {
    fn kind(&self) -> OracleKind;

    fn predict_noise(&self, noisy: &[RgbPlane], condition: &Condition, tau: u32) -> Result<Vec<RgbPlane>>;
}

/// `z = alpha_tau * x + sigma_tau * eps`.
pub fn add_noise(x: &ImageBuffer, tau: u32, eps: &RgbPlane, schedule: &DiffusionSchedule) -> Result<RgbPlane> {
    add_noise_plane(&x.rgb_plane(), tau, eps, schedule)
}

pub(crate) fn add_noise_plane(x: &RgbPlane, tau: u32, eps: &RgbPlane, schedule: &DiffusionSchedule) -> Result<RgbPlane> {
    if !x.same_shape(eps) {
        return Err(Error::invalid(format!(
            "noise is {}x{}, image is {}x{}",
            eps.width, eps.height, x.width, x.height
        )));
    }
    let (a, s) = schedule.coefficients(tau)?;
    Ok(RgbPlane {
        width: x.width,
        height: x.height,
        data: x.data.iter().zip(&eps.data).map(|(xv, e)| a * xv + s * e).collect(),
    })
}

fn check_tau(tau: u32, schedule: &DiffusionSchedule) -> Result<()> {
    if tau == 0 || tau > schedule.max_timestep {
        return Err(Error::invalid(format!(
            "timestep {tau} outside [1, {}]",
            schedule.max_timestep
        )));
    }
    Ok(())
}

fn predict_checked(
    oracle: &dyn DenoiserOracle,
    noisy: &[RgbPlane],
    condition: &Condition,
    tau: u32,
) -> Result<Vec<RgbPlane>> {
    let out = oracle.predict_noise(noisy, condition, tau)?;
    let bad_shape = out.len() != noisy.len() || out.iter().zip(noisy).any(|(a, b)| !a.same_shape(b));
    if bad_shape {
        return Err(Error::OracleUnavailable {
            kind: oracle.kind(),
            endpoint: None,
            status: None,
            detail: "prediction shape does not match input shape".into(),
        });
    }
    if out.iter().any(|p| p.data.iter().any(|v| !v.is_finite())) {
        return Err(Error::OracleUnavailable {
            kind: oracle.kind(),
            endpoint: None,
            status: None,
            detail: "prediction is not finite".into(),
        });
    }
    Ok(out)
}

/// Per-pixel score-distillation gradient `w(tau) (eps_hat(z, condition, tau) - eps)`.
pub fn sds_gradient(
    x: &ImageBuffer,
    oracle: &dyn DenoiserOracle,
    condition: &Condition,
    tau: u32,
    eps: &RgbPlane,
    schedule: &DiffusionSchedule,
) -> Result<ImageGrad> {
    combined_sds(x, &[(oracle, condition.clone())], tau, std::slice::from_ref(eps), schedule)
}

/// Sum of score-distillation gradients from several oracles.
///
/// With one noise sample, every oracle sees the same latent and the result
/// is `w(tau) (sum_k eps_hat_k - K eps)`. Passing one noise sample per
/// oracle gives each its own latent instead.
pub fn combined_sds(
    x: &ImageBuffer,
    oracles: &[(&dyn DenoiserOracle, Condition)],
    tau: u32,
    eps: &[RgbPlane],
    schedule: &DiffusionSchedule,
) -> Result<ImageGrad> {
    if oracles.is_empty() {
        return Err(Error::invalid("combined_sds needs at least one oracle"));
    }
    if eps.len() != 1 && eps.len() != oracles.len() {
        return Err(Error::invalid(format!(
            "combined_sds got {} noise samples for {} oracles",
            eps.len(),
            oracles.len()
        )));
    }
    check_tau(tau, schedule)?;
    let w = schedule.weight(tau);
    let xp = x.rgb_plane();
    let mut residual = RgbPlane::zeros(x.width, x.height);
    let shared = if eps.len() == 1 {
        Some(add_noise_plane(&xp, tau, &eps[0], schedule)?)
    } else {
        None
    };
    for (k, (oracle, condition)) in oracles.iter().enumerate() {
        let e = if eps.len() == 1 { &eps[0] } else { &eps[k] };
        let z = match &shared {
            Some(z) => z.clone(),
            None => add_noise_plane(&xp, tau, e, schedule)?,
        };
        let eps_hat = predict_checked(*oracle, std::slice::from_ref(&z), condition, tau)?;
        for ((r, p), ev) in residual.data.iter_mut().zip(&eps_hat[0].data).zip(&e.data) {
            *r += w * (p - ev);
        }
    }
    Ok(ImageGrad::from_rgb(residual))
}

/// Mean over a batch of `w(tau) * mean((eps_hat - eps)^2)` with
/// stop-gradient per-image gradients `w(tau) (eps_hat - eps) / (n * batch)`,
/// where `n` is the number of RGB values per image.
fn refinement_loss(
    renders: &[ImageBuffer],
    oracle: &dyn DenoiserOracle,
    expected: OracleKind,
    condition: &Condition,
    tau: u32,
    eps: &RgbPlane,
    schedule: &DiffusionSchedule,
) -> Result<LossValue> {
    if oracle.kind() != expected {
        return Err(Error::invalid(format!(
            "refinement needs a {expected} oracle, got {}",
            oracle.kind()
        )));
    }
    if renders.is_empty() {
        return Err(Error::invalid("refinement needs at least one render"));
    }
    check_tau(tau, schedule)?;
    let noisy = renders
        .iter()
        .map(|x| add_noise(x, tau, eps, schedule))
        .collect::<Result<Vec<_>>>()?;
    let eps_hat = predict_checked(oracle, &noisy, condition, tau)?;
    let w = schedule.weight(tau);
    let batch = renders.len() as f64;
    let mut out = LossValue {
        value: 0.0,
        grads: Vec::with_capacity(renders.len()),
    };
    for (x, pred) in renders.iter().zip(&eps_hat) {
        let n = pred.data.len().max(1) as f64;
        let mut sq = 0.0;
        let mut g = ImageGrad::zeros_like(x);
        for ((gv, p), e) in g.rgb.iter_mut().zip(&pred.data).zip(&eps.data) {
            let d = p - e;
            sq += d * d;
            *gv = w * d / (n * batch);
        }
        out.value += w * sq / n / batch;
        out.grads.push(g);
    }
    Ok(out)
}

/// Temporal refinement: every frame rendered from one shared random view,
/// scored by a video denoiser conditioned on the text prompt.
pub fn time_refine_loss(
    front_renders: &[ImageBuffer],
    oracle: &dyn DenoiserOracle,
    condition: &Condition,
    tau: u32,
    eps: &RgbPlane,
    schedule: &DiffusionSchedule,
) -> Result<LossValue> {
    refinement_loss(front_renders, oracle, OracleKind::Video, condition, tau, eps, schedule)
}

/// Multi-view refinement: several random views at one time, scored by a
/// multi-view denoiser conditioned on that time's anchor frame.
pub fn mv_refine_loss(
    view_renders: &[ImageBuffer],
    oracle: &dyn DenoiserOracle,
    anchor: &ImageBuffer,
    tau: u32,
    eps: &RgbPlane,
    schedule: &DiffusionSchedule,
) -> Result<LossValue> {
    refinement_loss(
        view_renders,
        oracle,
        OracleKind::Multiview,
        &Condition::Image(anchor.clone()),
        tau,
        eps,
        schedule,
    )
}

/// Single-image form of the refinement objective, used for the image-kind prior term.
pub fn sds_loss(
    x: &ImageBuffer,
    oracle: &dyn DenoiserOracle,
    condition: &Condition,
    tau: u32,
    eps: &RgbPlane,
    schedule: &DiffusionSchedule,
) -> Result<LossValue> {
    refinement_loss(std::slice::from_ref(x), oracle, oracle.kind(), condition, tau, eps, schedule)
}
