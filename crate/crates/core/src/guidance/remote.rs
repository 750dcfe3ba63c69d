//! HTTP client for external denoisers.
//!
//! `POST {url}/v1/denoise` with
//! `{"kind", "tau", "condition_text", "condition_image", "images", "height", "width", "guidance_scale"}`;
//! images are base64 little-endian `f32` arrays in `H x W x 3` row-major
//! order and the condition image is a base64 PNG. The reply is
//! `{"eps_hat": [...]}` in the same encoding.

use std::io::Cursor;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{Condition, DenoiserOracle, OracleKind};
use crate::scene::{ImageBuffer, RgbPlane};
use crate::{Error, Result};

pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;
const TIMEOUT: Duration = Duration::from_secs(120);
const RETRIES: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct EndpointDescriptor {
    /// Base URL, e.g. `http://127.0.0.1:8000`.
    pub url: String,
    pub kind: OracleKind,
    pub guidance_scale: Option<f64>,
    pub max_in_flight: usize,
}

impl EndpointDescriptor {
    pub fn new(url: impl Into<String>, kind: OracleKind) -> Self {
        Self {
            url: url.into(),
            kind,
            guidance_scale: None,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
        }
    }
}

#[derive(Serialize)]
struct DenoiseRequest<'a> {
    kind: OracleKind,
    tau: u32,
    condition_text: Option<&'a str>,
    condition_image: Option<String>,
    images: Vec<String>,
    height: usize,
    width: usize,
    guidance_scale: Option<f64>,
}

#[derive(Deserialize)]
struct DenoiseResponse {
    eps_hat: Vec<String>,
}

struct Permits {
    free: Mutex<usize>,
    released: Condvar,
}

impl Permits {
    fn acquire(&self) -> PermitGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.released.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        PermitGuard(self)
    }
}

struct PermitGuard<'a>(&'a Permits);

impl Drop for PermitGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.released.notify_one();
    }
}

pub struct RemoteOracle {
    descriptor: EndpointDescriptor,
    agent: ureq::Agent,
    permits: Permits,
}

/// Builds a [`DenoiserOracle`] that forwards predictions to `descriptor.url`.
pub fn remote_oracle(descriptor: EndpointDescriptor) -> RemoteOracle {
    let agent = ureq::AgentBuilder::new().timeout(TIMEOUT).build();
    let permits = Permits {
        free: Mutex::new(descriptor.max_in_flight.max(1)),
        released: Condvar::new(),
    };
    RemoteOracle {
        descriptor,
        agent,
        permits,
    }
}

pub(crate) fn encode_f32(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend((*v as f32).to_le_bytes());
    }
    B64.encode(bytes)
}

pub(crate) fn decode_f32(text: &str) -> std::result::Result<Vec<f64>, String> {
    let bytes = B64.decode(text).map_err(|e| format!("bad base64: {e}"))?;
    if bytes.len() % 4 != 0 {
        return Err(format!("shape: {} bytes is not a whole number of floats", bytes.len()));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect())
}

fn encode_png(image: &ImageBuffer) -> Result<String> {
    let rgba = image::RgbaImage::from_raw(image.width as u32, image.height as u32, image.to_rgba8())
        .ok_or_else(|| Error::invalid("condition image has inconsistent size"))?;
    let mut out = Cursor::new(Vec::new());
    rgba.write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| Error::invalid(format!("condition image encoding failed: {e}")))?;
    Ok(B64.encode(out.into_inner()))
}

impl RemoteOracle {
    pub fn descriptor(&self) -> &EndpointDescriptor {
        &self.descriptor
    }

    fn endpoint(&self) -> String {
        format!("{}/v1/denoise", self.descriptor.url.trim_end_matches('/'))
    }

    fn unavailable(&self, status: Option<u16>, detail: impl Into<String>) -> Error {
        Error::OracleUnavailable {
            kind: self.descriptor.kind,
            endpoint: Some(self.endpoint()),
            status,
            detail: detail.into(),
        }
    }

    fn post(&self, body: &str) -> Result<String> {
        let _permit = self.permits.acquire();
        let mut last = None;
        for _ in 0..=RETRIES {
            let sent = self
                .agent
                .post(&self.endpoint())
                .set("Content-Type", "application/json")
                .send_string(body);
            match sent {
                Ok(resp) => {
                    return resp
                        .into_string()
                        .map_err(|e| self.unavailable(Some(200), format!("unreadable body: {e}")))
                }
                Err(ureq::Error::Status(code, _)) if code >= 500 || code == 429 => {
                    last = Some(self.unavailable(Some(code), "server error"));
                }
                Err(ureq::Error::Status(code, _)) => {
                    return Err(self.unavailable(Some(code), "request rejected"));
                }
                Err(ureq::Error::Transport(t)) => {
                    last = Some(self.unavailable(None, t.to_string()));
                }
            }
        }
        Err(last.expect("at least one attempt"))
    }
}

impl DenoiserOracle for RemoteOracle {
    fn kind(&self) -> OracleKind {
        self.descriptor.kind
    }

    fn predict_noise(&self, noisy: &[RgbPlane], condition: &Condition, tau: u32) -> Result<Vec<RgbPlane>> {
        let Some(first) = noisy.first() else {
            return Ok(Vec::new());
        };
        if noisy.iter().any(|z| !z.same_shape(first)) {
            return Err(Error::invalid("remote oracle batch must share one image size"));
        }
        let (condition_text, condition_image) = match condition {
            Condition::None => (None, None),
            Condition::Text(t) => (Some(t.as_str()), None),
            Condition::Image(img) => (None, Some(encode_png(img)?)),
        };
        let request = DenoiseRequest {
            kind: self.descriptor.kind,
            tau,
            condition_text,
            condition_image,
            images: noisy.iter().map(|z| encode_f32(&z.data)).collect(),
            height: first.height,
            width: first.width,
            guidance_scale: self.descriptor.guidance_scale,
        };
        let body = serde_json::to_string(&request).map_err(|e| Error::invalid(e.to_string()))?;
        let reply = self.post(&body)?;
        let parsed: DenoiseResponse = serde_json::from_str(&reply)
            .map_err(|e| self.unavailable(Some(200), format!("malformed payload: {e}")))?;
        if parsed.eps_hat.len() != noisy.len() {
            return Err(self.unavailable(
                Some(200),
                format!("shape: got {} predictions for {} images", parsed.eps_hat.len(), noisy.len()),
            ));
        }
        parsed
            .eps_hat
            .iter()
            .zip(noisy)
            .map(|(text, z)| {
                let data = decode_f32(text).map_err(|e| self.unavailable(Some(200), e))?;
                if data.len() != z.data.len() {
                    return Err(self.unavailable(
                        Some(200),
                        format!("shape: got {} values, expected {}", data.len(), z.data.len()),
                    ));
                }
                Ok(RgbPlane {
                    width: z.width,
                    height: z.height,
                    data,
                })
            })
            .collect()
    }
}
