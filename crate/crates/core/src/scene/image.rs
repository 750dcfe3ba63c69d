use crate::{Error, Result};

/// `H x W` RGB + alpha image, row-major, stored as `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    pub width: usize,
    pub height: usize,
    /// `H * W * 3` interleaved RGB.
    pub rgb: Vec<f64>,
    /// `H * W` coverage.
    pub alpha: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, [0.0; 3], 0.0)
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3], alpha: f64) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            rgb: rgb.iter().copied().cycle().take(n * 3).collect(),
            alpha: vec![alpha; n],
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn rgb_at(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn alpha_at(&self, x: usize, y: usize) -> f64 {
        self.alpha[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [f64; 3], alpha: f64) {
        let p = y * self.width + x;
        self.rgb[p * 3..p * 3 + 3].copy_from_slice(&rgb);
        self.alpha[p] = alpha;
    }

    pub fn same_size(&self, other: &ImageBuffer) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn ensure_same_size(&self, other: &ImageBuffer, what: &str) -> Result<()> {
        if self.same_size(other) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "{what}: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.pixel_count();
        if self.rgb.len() != n * 3 || self.alpha.len() != n {
            return Err(Error::invalid("image buffer lengths do not match its size"));
        }
        if self.rgb.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("image has non-finite color"));
        }
        if self.alpha.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::invalid("image alpha outside [0, 1]"));
        }
        Ok(())
    }

    pub fn rgb_plane(&self) -> RgbPlane {
        RgbPlane {
            width: self.width,
            height: self.height,
            data: self.rgb.clone(),
        }
    }

    /// Mean squared RGB error against `other`.
    pub fn mse(&self, other: &ImageBuffer) -> f64 {
        let n = self.rgb.len().max(1) as f64;
        self.rgb
            .iter()
            .zip(&other.rgb)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n
    }

    /// Peak signal-to-noise ratio in dB for unit-range RGB.
    pub fn psnr(&self, other: &ImageBuffer) -> f64 {
        let mse = self.mse(other);
        if mse == 0.0 {
            f64::INFINITY
        } else {
            -10.0 * mse.log10()
        }
    }

    /// Quantizes to 8-bit RGBA, clamping to `[0, 1]`.
    pub fn to_rgba8(&self) -> Vec<u8> {
        let q = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        let mut out = Vec::with_capacity(self.pixel_count() * 4);
        for p in 0..self.pixel_count() {
            out.extend_from_slice(&[
                q(self.rgb[p * 3]),
                q(self.rgb[p * 3 + 1]),
                q(self.rgb[p * 3 + 2]),
                q(self.alpha[p]),
            ]);
        }
        out
    }
}

/// Gradient with respect to an [`ImageBuffer`]; same layout, unbounded values.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrad {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl ImageGrad {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            rgb: vec![0.0; width * height * 3],
            alpha: vec![0.0; width * height],
        }
    }

    pub fn zeros_like(image: &ImageBuffer) -> Self {
        Self::zeros(image.width, image.height)
    }

    pub fn from_rgb(plane: RgbPlane) -> Self {
        Self {
            width: plane.width,
            height: plane.height,
            alpha: vec![0.0; plane.width * plane.height],
            rgb: plane.data,
        }
    }

    /// `self += k * other`.
    pub fn add_scaled(&mut self, other: &ImageGrad, k: f64) {
        debug_assert_eq!((self.width, self.height), (other.width, other.height));
        for (a, b) in self.rgb.iter_mut().zip(&other.rgb) {
            *a += k * b;
        }
        for (a, b) in self.alpha.iter_mut().zip(&other.alpha) {
            *a += k * b;
        }
    }

    pub fn scaled(mut self, k: f64) -> Self {
        self.rgb.iter_mut().chain(self.alpha.iter_mut()).for_each(|v| *v *= k);
        self
    }

    pub fn is_zero(&self) -> bool {
        self.rgb.iter().chain(&self.alpha).all(|&v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.rgb.iter().chain(&self.alpha).fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Plain `H x W x 3` array: noise samples, noisy latents, predicted noise.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbPlane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl RgbPlane {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height * 3],
        }
    }

    pub fn same_shape(&self, other: &RgbPlane) -> bool {
        self.width == other.width && self.height == other.height && self.data.len() == other.data.len()
    }

    /// Standard-normal sample.
    pub fn gaussian<R: rand::Rng + ?Sized>(rng: &mut R, width: usize, height: usize) -> Self {
        use rand_distr::{Distribution, StandardNormal};
        Self {
            width,
            height,
            data: (0..width * height * 3).map(|_| StandardNormal.sample(rng)).collect(),
        }
    }
}

/// Ordered anchor frames of equal size.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoClip {
    frames: Vec<ImageBuffer>,
}

impl VideoClip {
    pub fn new(frames: Vec<ImageBuffer>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::invalid("video clip needs at least one frame"))?;
        if let Some((i, _)) = frames.iter().enumerate().find(|(_, f)| !f.same_size(first)) {
            return Err(Error::invalid(format!("frame {i} differs in size from frame 0")));
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[ImageBuffer] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    /// Normalized time of frame `k`: `k / (T - 1)`, or 0 for a single frame.
    pub fn time_of(&self, k: usize) -> f64 {
        normalized_time(k, self.frames.len())
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time_of(k)).collect()
    }
}

pub(crate) fn normalized_time(k: usize, count: usize) -> f64 {
    if count <= 1 {
        0.0
    } else {
        k as f64 / (count - 1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_rejects_mixed_sizes() {
        let e = VideoClip::new(vec![ImageBuffer::new(4, 4), ImageBuffer::new(4, 5)]);
        assert!(e.is_err());
        assert!(VideoClip::new(vec![]).is_err());
    }

    #[test]
    fn clip_times_span_unit_interval() {
        let c = VideoClip::new(vec![ImageBuffer::new(2, 2); 5]).unwrap();
        assert_eq!(c.times(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let one = VideoClip::new(vec![ImageBuffer::new(2, 2)]).unwrap();
        assert_eq!(one.times(), vec![0.0]);
    }

    #[test]
    fn psnr_of_known_mse() {
        let a = ImageBuffer::filled(4, 4, [0.1; 3], 1.0);
        let b = ImageBuffer::filled(4, 4, [0.2; 3], 1.0);
        assert!((a.psnr(&b) - 20.0).abs() < 1e-9);
    }

    #[test]
    fn alpha_out_of_range_rejected() {
        let mut a = ImageBuffer::new(2, 2);
        a.alpha[1] = 1.5;
        assert!(a.validate().is_err());
    }
}
