//! Pixel-space alignment objectives.
//!
//! Every loss is a mean over pixels (and channels where applicable) and
//! returns its value with gradients for each differentiable input image,
//! ready to feed into [`render_backward`](crate::render::render_backward).

mod features;

pub use features::{ConvLayer, FeatureMap, FeatureStack, CHANNELS, MIN_SIDE};

use features::{normalize_channels, normalize_channels_vjp};

use crate::scene::{ImageBuffer, ImageGrad, VideoClip};
use crate::{Error, Result};

/// Default perceptual weight inside the texture and geometry terms.
pub const DEFAULT_LAMBDA: f64 = 0.1;

/// A scalar objective and its gradients, one per differentiable input image.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub grads: Vec<ImageGrad>,
}

impl LossValue {
    fn single(value: f64, grad: ImageGrad) -> Self {
        Self {
            value,
            grads: vec![grad],
        }
    }

    pub fn grad(&self) -> &ImageGrad {
        &self.grads[0]
    }
}

/// Mean squared RGB difference; gradient w.r.t. `a`.
pub fn mse_loss(a: &ImageBuffer, b: &ImageBuffer) -> Result<LossValue> {
    a.ensure_same_size(b, "mse_loss size mismatch")?;
    let n = (a.pixel_count() * 3).max(1) as f64;
    let mut grad = ImageGrad::zeros_like(a);
    let mut sum = 0.0;
    for (k, (x, y)) in a.rgb.iter().zip(&b.rgb).enumerate() {
        let d = x - y;
        sum += d * d;
        grad.rgb[k] = 2.0 * d / n;
    }
    Ok(LossValue::single(sum / n, grad))
}

/// Mean squared alpha difference; gradient w.r.t. `a`'s alpha.
pub fn mask_loss(a: &ImageBuffer, b: &ImageBuffer) -> Result<LossValue> {
    a.ensure_same_size(b, "mask_loss size mismatch")?;
    let n = a.pixel_count().max(1) as f64;
    let mut grad = ImageGrad::zeros_like(a);
    let mut sum = 0.0;
    for (k, (x, y)) in a.alpha.iter().zip(&b.alpha).enumerate() {
        let d = x - y;
        sum += d * d;
        grad.alpha[k] = 2.0 * d / n;
    }
    Ok(LossValue::single(sum / n, grad))
}

/// Sum over feature layers of the per-pixel mean squared distance between
/// channel-normalized features.
pub fn perceptual_loss(a: &ImageBuffer, b: &ImageBuffer, stack: &FeatureStack) -> Result<LossValue> {
    a.ensure_same_size(b, "perceptual_loss size mismatch")?;
    let ta = stack.trace(&a.rgb, a.width, a.height)?;
    let tb = stack.trace(&b.rgb, b.width, b.height)?;
    let mut value = 0.0;
    let mut g_layers = Vec::with_capacity(ta.outputs.len());
    for (fa, fb) in ta.outputs.iter().zip(&tb.outputs) {
        let (ua, na) = normalize_channels(fa);
        let (ub, _) = normalize_channels(fb);
        let hw = (fa.width * fa.height) as f64;
        let mut g_unit = ua.clone();
        for (k, (x, y)) in ua.data.iter().zip(&ub.data).enumerate() {
            let d = x - y;
            value += d * d / hw;
            g_unit.data[k] = 2.0 * d / hw;
        }
        g_layers.push(normalize_channels_vjp(fa, &ua, &na, &g_unit));
    }
    let mut grad = ImageGrad::zeros_like(a);
    grad.rgb = stack.backward(&ta, g_layers);
    Ok(LossValue::single(value, grad))
}

/// Components of one texture-alignment evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct TextureTerms {
    pub mse: f64,
    pub mask: f64,
    /// Unweighted perceptual distance (zero when `lambda` is zero).
    pub perceptual: f64,
    /// `mse + mask + lambda * perceptual` and its gradient.
    pub total: LossValue,
}

/// `mse + mask + lambda * perceptual`.
pub fn texture_alignment(x: &ImageBuffer, anchor: &ImageBuffer, lambda: f64, stack: &FeatureStack) -> Result<LossValue> {
    texture_alignment_terms(x, anchor, lambda, stack).map(|t| t.total)
}

/// [`texture_alignment`] with its individual terms kept for reporting.
pub fn texture_alignment_terms(
    x: &ImageBuffer,
    anchor: &ImageBuffer,
    lambda: f64,
    stack: &FeatureStack,
) -> Result<TextureTerms> {
    let mse = mse_loss(x, anchor)?;
    let mask = mask_loss(x, anchor)?;
    let mut value = mse.value + mask.value;
    let mut grad = mse.grads[0].clone();
    grad.add_scaled(&mask.grads[0], 1.0);
    let mut perceptual = 0.0;
    if lambda != 0.0 {
        let p = perceptual_loss(x, anchor, stack)?;
        perceptual = p.value;
        value += lambda * p.value;
        grad.add_scaled(&p.grads[0], lambda);
    }
    Ok(TextureTerms {
        mse: mse.value,
        mask: mask.value,
        perceptual,
        total: LossValue::single(value, grad),
    })
}

/// Texture alignment summed over paired Gaussian and mesh renders from the same views.
pub fn geometry_alignment(
    gauss_renders: &[ImageBuffer],
    mesh_renders: &[ImageBuffer],
    lambda: f64,
    stack: &FeatureStack,
) -> Result<LossValue> {
    if gauss_renders.len() != mesh_renders.len() {
        return Err(Error::invalid(format!(
            "geometry_alignment got {} gaussian renders and {} mesh renders",
            gauss_renders.len(),
            mesh_renders.len()
        )));
    }
    let per_view = crate::par::map_range(gauss_renders.len(), |i| {
        texture_alignment(&gauss_renders[i], &mesh_renders[i], lambda, stack)
    });
    let mut out = LossValue {
        value: 0.0,
        grads: Vec::with_capacity(per_view.len()),
    };
    for v in per_view {
        let v = v?;
        out.value += v.value;
        out.grads.extend(v.grads);
    }
    Ok(out)
}

/// Mean over frames of the front-view MSE against the anchor video.
pub fn motion_alignment(front_renders: &[ImageBuffer], video: &VideoClip) -> Result<LossValue> {
    if front_renders.len() != video.len() {
        return Err(Error::invalid(format!(
            "motion_alignment got {} renders for {} frames",
            front_renders.len(),
            video.len()
        )));
    }
    let frames = video.len() as f64;
    let mut out = LossValue {
        value: 0.0,
        grads: Vec::with_capacity(video.len()),
    };
    for (x, frame) in front_renders.iter().zip(video.frames()) {
        let l = mse_loss(x, frame)?;
        out.value += l.value / frames;
        out.grads.push(l.grads.into_iter().next().unwrap().scaled(1.0 / frames));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_of_ones_vs_zeros() {
        let a = ImageBuffer::filled(2, 2, [1.0; 3], 1.0);
        let b = ImageBuffer::filled(2, 2, [0.0; 3], 1.0);
        assert_eq!(mse_loss(&a, &b).unwrap().value, 1.0);
        let same = mse_loss(&a, &a).unwrap();
        assert_eq!(same.value, 0.0);
        assert!(same.grad().is_zero());
    }

    #[test]
    fn mask_of_full_vs_empty() {
        let a = ImageBuffer::filled(3, 2, [0.0; 3], 1.0);
        let b = ImageBuffer::filled(3, 2, [0.0; 3], 0.0);
        assert_eq!(mask_loss(&a, &b).unwrap().value, 1.0);
        assert_eq!(mask_loss(&a, &a).unwrap().value, 0.0);
    }

    #[test]
    fn size_mismatch_rejected() {
        let a = ImageBuffer::new(8, 8);
        let b = ImageBuffer::new(8, 9);
        assert!(mse_loss(&a, &b).is_err());
        assert!(mask_loss(&a, &b).is_err());
        assert!(perceptual_loss(&a, &b, &FeatureStack::new(0)).is_err());
    }

    #[test]
    fn perceptual_rejects_small_images() {
        let a = ImageBuffer::new(6, 6);
        assert!(perceptual_loss(&a, &a, &FeatureStack::new(0)).is_err());
    }

    #[test]
    fn texture_alignment_zero_on_identical() {
        let a = ImageBuffer::filled(8, 8, [0.3, 0.6, 0.9], 0.5);
        let s = FeatureStack::new(0);
        assert_eq!(texture_alignment(&a, &a, 0.0, &s).unwrap().value, 0.0);
        assert_eq!(texture_alignment(&a, &a, 0.1, &s).unwrap().value, 0.0);
    }

    #[test]
    fn geometry_alignment_length_mismatch() {
        let a = ImageBuffer::new(8, 8);
        let s = FeatureStack::new(0);
        assert!(geometry_alignment(std::slice::from_ref(&a), &[a.clone(), a.clone()], 0.1, &s).is_err());
    }

    #[test]
    fn motion_alignment_length_mismatch() {
        let clip = VideoClip::new(vec![ImageBuffer::new(4, 4); 3]).unwrap();
        assert!(motion_alignment(&[ImageBuffer::new(4, 4)], &clip).is_err());
    }
}
