use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::{Error, Result};

pub const CHANNELS: [usize; 3] = [8, 16, 32];
const KERNEL: usize = 3;
/// Smallest image side the stack accepts.
pub const MIN_SIDE: usize = 8;

/// Stride-2, zero-padded 3x3 convolution followed by `tanh`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub in_channels: usize,
    pub out_channels: usize,
    /// `[out][in][ky][kx]`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Channel-major feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    fn zeros(channels: usize, width: usize, height: usize) -> Self {
        Self {
            channels,
            width,
            height,
            data: vec![0.0; channels * width * height],
        }
    }

    #[inline]
    fn idx(&self, c: usize, x: usize, y: usize) -> usize {
        (c * self.height + y) * self.width + x
    }
}

fn out_side(n: usize) -> usize {
    (n - 1) / 2 + 1
}

impl ConvLayer {
    fn forward(&self, input: &FeatureMap) -> (FeatureMap, FeatureMap) {
        let (ow, oh) = (out_side(input.width), out_side(input.height));
        let mut pre = FeatureMap::zeros(self.out_channels, ow, oh);
        for o in 0..self.out_channels {
            for y in 0..oh {
                for x in 0..ow {
                    let mut acc = self.bias[o];
                    for i in 0..self.in_channels {
                        for ky in 0..KERNEL {
                            let sy = (2 * y + ky) as isize - 1;
                            if sy < 0 || sy as usize >= input.height {
                                continue;
                            }
                            for kx in 0..KERNEL {
                                let sx = (2 * x + kx) as isize - 1;
                                if sx < 0 || sx as usize >= input.width {
                                    continue;
                                }
                                acc += self.weight(o, i, ky, kx) * input.data[input.idx(i, sx as usize, sy as usize)];
                            }
                        }
                    }
                    let p = pre.idx(o, x, y);
                    pre.data[p] = acc;
                }
            }
        }
        let mut act = pre.clone();
        act.data.iter_mut().for_each(|v| *v = v.tanh());
        (pre, act)
    }

    /// Gradient w.r.t. the layer input given the gradient on its activated output.
    fn backward(&self, input: &FeatureMap, act: &FeatureMap, g_act: &FeatureMap) -> FeatureMap {
        let mut g_in = FeatureMap::zeros(input.channels, input.width, input.height);
        for o in 0..self.out_channels {
            for y in 0..act.height {
                for x in 0..act.width {
                    let p = act.idx(o, x, y);
                    let a = act.data[p];
                    let g_pre = g_act.data[p] * (1.0 - a * a);
                    if g_pre == 0.0 {
                        continue;
                    }
                    for i in 0..self.in_channels {
                        for ky in 0..KERNEL {
                            let sy = (2 * y + ky) as isize - 1;
                            if sy < 0 || sy as usize >= input.height {
                                continue;
                            }
                            for kx in 0..KERNEL {
                                let sx = (2 * x + kx) as isize - 1;
                                if sx < 0 || sx as usize >= input.width {
                                    continue;
                                }
                                let q = g_in.idx(i, sx as usize, sy as usize);
                                g_in.data[q] += g_pre * self.weight(o, i, ky, kx);
                            }
                        }
                    }
                }
            }
        }
        g_in
    }

    #[inline]
    fn weight(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        self.weights[((o * self.in_channels + i) * KERNEL + ky) * KERNEL + kx]
    }
}

/// Frozen, seeded stand-in for a pretrained perceptual encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    pub layers: Vec<ConvLayer>,
}

pub(crate) struct Trace {
    /// Layer inputs; `inputs[0]` is the rescaled image.
    pub inputs: Vec<FeatureMap>,
    /// Activated outputs per layer.
    pub outputs: Vec<FeatureMap>,
}

impl FeatureStack {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut in_ch = 3;
        let layers = CHANNELS
            .iter()
            .map(|&out_ch| {
                let fan_in = (in_ch * KERNEL * KERNEL) as f64;
                let normal = Normal::new(0.0, (1.0 / fan_in).sqrt()).unwrap();
                let layer = ConvLayer {
                    in_channels: in_ch,
                    out_channels: out_ch,
                    weights: (0..out_ch * in_ch * KERNEL * KERNEL).map(|_| normal.sample(&mut rng)).collect(),
                    bias: (0..out_ch).map(|_| 0.1 * normal.sample(&mut rng)).collect(),
                };
                in_ch = out_ch;
                layer
            })
            .collect();
        Self { layers }
    }

    pub fn check_size(&self, width: usize, height: usize) -> Result<()> {
        if width < MIN_SIDE || height < MIN_SIDE {
            return Err(Error::invalid(format!(
                "{width}x{height} image is smaller than the feature stack receptive field ({MIN_SIDE}x{MIN_SIDE})"
            )));
        }
        Ok(())
    }

    /// Feature maps for an interleaved RGB image, mapped to `[-1, 1]` first.
    pub fn features(&self, rgb: &[f64], width: usize, height: usize) -> Result<Vec<FeatureMap>> {
        Ok(self.trace(rgb, width, height)?.outputs)
    }

    pub(crate) fn trace(&self, rgb: &[f64], width: usize, height: usize) -> Result<Trace> {
        self.check_size(width, height)?;
        let mut input = FeatureMap::zeros(3, width, height);
        for y in 0..height {
            for x in 0..width {
                for c in 0..3 {
                    let p = input.idx(c, x, y);
                    input.data[p] = 2.0 * rgb[(y * width + x) * 3 + c] - 1.0;
                }
            }
        }
        let mut inputs = vec![input];
        let mut outputs = Vec::new();
        for layer in &self.layers {
            let (_, act) = layer.forward(inputs.last().unwrap());
            outputs.push(act.clone());
            inputs.push(act);
        }
        inputs.pop();
        Ok(Trace { inputs, outputs })
    }

    /// Back-propagates per-layer output gradients to an interleaved RGB gradient.
    pub(crate) fn backward(&self, trace: &Trace, mut g_outputs: Vec<FeatureMap>) -> Vec<f64> {
        let mut carry: Option<FeatureMap> = None;
        for l in (0..self.layers.len()).rev() {
            let mut g = std::mem::replace(&mut g_outputs[l], FeatureMap::zeros(0, 0, 0));
            if let Some(c) = carry.take() {
                g.data.iter_mut().zip(&c.data).for_each(|(a, b)| *a += b);
            }
            carry = Some(self.layers[l].backward(&trace.inputs[l], &trace.outputs[l], &g));
        }
        let g_in = carry.unwrap();
        let (w, h) = (g_in.width, g_in.height);
        let mut rgb = vec![0.0; w * h * 3];
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    rgb[(y * w + x) * 3 + c] = 2.0 * g_in.data[g_in.idx(c, x, y)];
                }
            }
        }
        rgb
    }
}

/// Unit-normalizes a feature map across channels at every pixel, returning
/// the normalized map and the per-pixel norms.
pub(crate) fn normalize_channels(f: &FeatureMap) -> (FeatureMap, Vec<f64>) {
    let mut out = f.clone();
    let mut norms = Vec::with_capacity(f.width * f.height);
    for y in 0..f.height {
        for x in 0..f.width {
            let s: f64 = (0..f.channels).map(|c| f.data[f.idx(c, x, y)].powi(2)).sum();
            let r = (s + NORM_EPS).sqrt();
            for c in 0..f.channels {
                let p = f.idx(c, x, y);
                out.data[p] = f.data[p] / r;
            }
            norms.push(r);
        }
    }
    (out, norms)
}

/// Added to the squared norm before the square root.
pub(crate) const NORM_EPS: f64 = 1e-12;

/// VJP of [`normalize_channels`].
pub(crate) fn normalize_channels_vjp(f: &FeatureMap, unit: &FeatureMap, norms: &[f64], g_unit: &FeatureMap) -> FeatureMap {
    let mut g = FeatureMap::zeros(f.channels, f.width, f.height);
    for y in 0..f.height {
        for x in 0..f.width {
            let r = norms[y * f.width + x];
            let dot: f64 = (0..f.channels)
                .map(|c| g_unit.data[f.idx(c, x, y)] * unit.data[f.idx(c, x, y)])
                .sum();
            for c in 0..f.channels {
                let p = f.idx(c, x, y);
                g.data[p] = (g_unit.data[p] - unit.data[p] * dot) / r;
            }
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_given_seed() {
        assert_eq!(FeatureStack::new(4), FeatureStack::new(4));
        assert_ne!(FeatureStack::new(4), FeatureStack::new(5));
    }

    #[test]
    fn layer_shapes() {
        let s = FeatureStack::new(0);
        let f = s.features(&vec![0.5; 16 * 12 * 3], 16, 12).unwrap();
        let shapes: Vec<_> = f.iter().map(|m| (m.channels, m.width, m.height)).collect();
        assert_eq!(shapes, vec![(8, 8, 6), (16, 4, 3), (32, 2, 2)]);
    }

    #[test]
    fn rejects_tiny_images() {
        let s = FeatureStack::new(0);
        assert!(s.features(&vec![0.0; 7 * 8 * 3], 7, 8).is_err());
    }

    #[test]
    fn normalized_features_are_unit() {
        let s = FeatureStack::new(1);
        let rgb: Vec<f64> = (0..8 * 8 * 3).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        for f in s.features(&rgb, 8, 8).unwrap() {
            let (u, _) = normalize_channels(&f);
            for y in 0..u.height {
                for x in 0..u.width {
                    let n: f64 = (0..u.channels).map(|c| u.data[u.idx(c, x, y)].powi(2)).sum();
                    assert!((n - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
