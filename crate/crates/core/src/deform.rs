//! Time-conditioned deformation MLP.
//!
//! Input is the frequency encoding of a point's canonical position and of
//! the normalized time; output is an additive delta on position, rotation
//! (renormalized afterwards) and log-scale. Colors and opacities are left
//! alone unless `deform_opacity` is set, in which case one extra output
//! shifts the opacity logit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::render::RenderGrads;
use crate::scene::{quat_normalize_vjp, GaussianCloud};
use crate::{Error, Result};

pub const POSITION_FREQUENCIES: usize = 6;
pub const TIME_FREQUENCIES: usize = 4;
pub const HIDDEN_WIDTH: usize = 64;

/// Concatenation of `v` with `sin(2^k π v)` and `cos(2^k π v)` for `k < frequencies`.
pub fn positional_encoding(v: &[f64], frequencies: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(encoded_len(v.len(), frequencies));
    encode_into(v, frequencies, &mut out);
    out
}

pub fn encoded_len(dim: usize, frequencies: usize) -> usize {
    dim * (2 * frequencies + 1)
}

fn encode_into(v: &[f64], frequencies: usize, out: &mut Vec<f64>) {
    out.extend_from_slice(v);
    for k in 0..frequencies {
        let w = std::f64::consts::PI * (1u64 << k) as f64;
        out.extend(v.iter().map(|x| (w * x).sin()));
        out.extend(v.iter().map(|x| (w * x).cos()));
    }
}

/// Adds `d(encoding)/dv^T * grad` into `dv`.
fn encode_vjp(v: &[f64], frequencies: usize, grad: &[f64], dv: &mut [f64]) {
    let d = v.len();
    for i in 0..d {
        dv[i] += grad[i];
    }
    for k in 0..frequencies {
        let w = std::f64::consts::PI * (1u64 << k) as f64;
        let base = d + 2 * k * d;
        for i in 0..d {
            let (s, c) = (w * v[i]).sin_cos();
            dv[i] += grad[base + i] * w * c - grad[base + d + i] * w * s;
        }
    }
}

/// Fully connected layer; `weights` is `outputs x inputs`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn forward(&self, x: &[f64], y: &mut Vec<f64>) {
        y.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            y.push(self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeformationField {
    pub layers: Vec<Dense>,
    pub position_frequencies: usize,
    pub time_frequencies: usize,
    pub deform_opacity: bool,
}

/// Gradients with the same layout as [`DeformationField::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrads {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl FieldGrads {
    pub fn zeros_like(field: &DeformationField) -> Self {
        Self {
            weights: field.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: field.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn accumulate(&mut self, other: &FieldGrads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .chain(&self.bias)
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Weights then bias, layer by layer.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.bias) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

impl DeformationField {
    /// The standard field: two hidden layers of 64, 6 position and 4 time frequencies.
    pub fn standard(seed: u64) -> Self {
        Self::new(&[HIDDEN_WIDTH, HIDDEN_WIDTH], POSITION_FREQUENCIES, TIME_FREQUENCIES, false, seed)
    }

    /// He-initialized hidden layers; the output layer starts at zero so the
    /// field is the identity deformation.
    pub fn new(
        hidden: &[usize],
        position_frequencies: usize,
        time_frequencies: usize,
        deform_opacity: bool,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = encoded_len(3, position_frequencies) + encoded_len(1, time_frequencies);
        let output = if deform_opacity { 11 } else { 10 };
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(l, pair)| {
                let (i, o) = (pair[0], pair[1]);
                let weights = if l == last {
                    vec![0.0; i * o]
                } else {
                    let normal = Normal::new(0.0, (2.0 / i as f64).sqrt()).unwrap();
                    (0..i * o).map(|_| normal.sample(&mut rng)).collect()
                };
                Dense {
                    inputs: i,
                    outputs: o,
                    weights,
                    bias: vec![0.0; o],
                }
            })
            .collect();
        Self {
            layers,
            position_frequencies,
            time_frequencies,
            deform_opacity,
        }
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().map(|l| l.outputs).unwrap_or(0)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(Dense::parameter_count).sum()
    }

    fn check_shape(&self) -> Result<()> {
        let want_in = encoded_len(3, self.position_frequencies) + encoded_len(1, self.time_frequencies);
        let want_out = if self.deform_opacity { 11 } else { 10 };
        if self.layers.is_empty() || self.input_len() != want_in || self.output_len() != want_out {
            return Err(Error::invalid("deformation field layer sizes do not match its encoding"));
        }
        for pair in self.layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::invalid("deformation field layers do not chain"));
            }
        }
        for l in &self.layers {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::invalid("deformation field layer has wrong parameter count"));
            }
        }
        Ok(())
    }

    fn encode(&self, position: [f64; 3], t: f64) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.input_len());
        encode_into(&position, self.position_frequencies, &mut x);
        encode_into(&[t], self.time_frequencies, &mut x);
        x
    }

    /// Runs the MLP, keeping every layer's activation (input first, raw output last).
    fn activations(&self, position: [f64; 3], t: f64) -> Result<Vec<Vec<f64>>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(self.encode(position, t));
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut y = Vec::with_capacity(layer.outputs);
            layer.forward(acts.last().unwrap(), &mut y);
            if l != last {
                y.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericOverflow(format!("deformation layer {l}")));
            }
            acts.push(y);
        }
        Ok(acts)
    }

    /// Raw network output for one point.
    pub fn delta(&self, position: [f64; 3], t: f64) -> Result<Vec<f64>> {
        self.check_shape()?;
        Ok(self.activations(position, t)?.pop().unwrap())
    }

    /// Flat little-endian checkpoint: `u32` count of layer sizes, the sizes,
    /// `u32` position and time frequency counts, a `u32` opacity flag, then
    /// every layer's weights and bias as `f32`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut sizes = vec![self.input_len() as u32];
        sizes.extend(self.layers.iter().map(|l| l.outputs as u32));
        let mut out = Vec::new();
        out.extend((sizes.len() as u32).to_le_bytes());
        for s in &sizes {
            out.extend(s.to_le_bytes());
        }
        out.extend((self.position_frequencies as u32).to_le_bytes());
        out.extend((self.time_frequencies as u32).to_le_bytes());
        out.extend((self.deform_opacity as u32).to_le_bytes());
        for l in &self.layers {
            for v in l.weights.iter().chain(&l.bias) {
                out.extend((*v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = bytes;
        let mut next_u32 = || -> Result<u32> {
            if cursor.len() < 4 {
                return Err(Error::invalid("checkpoint truncated"));
            }
            let (head, rest) = cursor.split_at(4);
            cursor = rest;
            Ok(u32::from_le_bytes(head.try_into().unwrap()))
        };
        let count = next_u32()? as usize;
        if !(2..=64).contains(&count) {
            return Err(Error::invalid(format!("checkpoint declares {count} layer sizes")));
        }
        let sizes = (0..count).map(|_| next_u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let position_frequencies = next_u32()? as usize;
        let time_frequencies = next_u32()? as usize;
        let deform_opacity = next_u32()? != 0;
        let mut floats = cursor.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
        let mut layers = Vec::new();
        for pair in sizes.windows(2) {
            let (i, o) = (pair[0], pair[1]);
            let weights: Vec<f64> = floats.by_ref().take(i * o).collect();
            let bias: Vec<f64> = floats.by_ref().take(o).collect();
            if weights.len() != i * o || bias.len() != o {
                return Err(Error::invalid("checkpoint truncated"));
            }
            layers.push(Dense {
                inputs: i,
                outputs: o,
                weights,
                bias,
            });
        }
        if floats.next().is_some() || !cursor.len().is_multiple_of(4) {
            return Err(Error::invalid("checkpoint has trailing bytes"));
        }
        let field = Self {
            layers,
            position_frequencies,
            time_frequencies,
            deform_opacity,
        };
        field.check_shape()?;
        Ok(field)
    }

    /// Mutable views of every parameter block, matching [`FieldGrads::flatten`] order.
    pub fn parameter_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            out.push(&mut l.weights);
            out.push(&mut l.bias);
        }
        out
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("deformation time {t} outside [0, 1]")));
    }
    Ok(())
}

/// Applies the field at normalized time `t`.
pub fn deform(cloud: &GaussianCloud, t: f64, field: &DeformationField) -> Result<GaussianCloud> {
    check_time(t)?;
    field.check_shape()?;
    cloud.check_renderable()?;
    let deltas = crate::par::map_range(cloud.len(), |i| field.activations(cloud.positions[i], t).map(|mut a| a.pop().unwrap()));
    let mut out = cloud.clone();
    for (i, delta) in deltas.into_iter().enumerate() {
        let d = delta?;
        for k in 0..3 {
            out.positions[i][k] += d[k];
            out.log_scales[i][k] += d[7 + k];
        }
        let q = [0, 1, 2, 3].map(|k| cloud.rotations[i][k] + d[3 + k]);
        let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::NumericOverflow(format!("rotation of point {i}")));
        }
        out.rotations[i] = q.map(|c| c / n);
        if field.deform_opacity {
            out.opacity_logits[i] += d[10];
        }
    }
    Ok(out)
}

/// Points per chunk in the backward pass; fixed so the reduction order does not depend on thread count.
const CHUNK: usize = 64;

/// Per-point gradient w.r.t. base position, rotation, log-scale and opacity logit.
type BaseGrad = ([f64; 3], [f64; 4], [f64; 3], f64);

/// Pulls gradients on the deformed cloud back to the field weights and the base cloud.
pub fn deform_backward(
    cloud: &GaussianCloud,
    t: f64,
    field: &DeformationField,
    upstream: &RenderGrads,
) -> Result<(FieldGrads, RenderGrads)> {
    check_time(t)?;
    field.check_shape()?;
    cloud.check_renderable()?;
    if upstream.len() != cloud.len()
        || upstream.rotations.len() != cloud.len()
        || upstream.log_scales.len() != cloud.len()
        || upstream.colors.len() != cloud.len()
        || upstream.opacity_logits.len() != cloud.len()
    {
        return Err(Error::invalid(format!(
            "upstream gradient has {} points, cloud has {}",
            upstream.len(),
            cloud.len()
        )));
    }
    let n = cloud.len();
    let chunks = n.div_ceil(CHUNK);
    let results = crate::par::map_range(chunks, |c| -> Result<(FieldGrads, Vec<BaseGrad>)> {
        let mut fg = FieldGrads::zeros_like(field);
        let mut base = Vec::with_capacity(CHUNK);
        for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
            base.push(point_backward(cloud, i, t, field, upstream, &mut fg)?);
        }
        Ok((fg, base))
    });

    let mut field_grads = FieldGrads::zeros_like(field);
    let mut base = upstream.clone();
    let mut i = 0;
    for r in results {
        let (fg, pts) = r?;
        field_grads.accumulate(&fg);
        for (pos, rot, scale, opacity) in pts {
            base.positions[i] = pos;
            base.rotations[i] = rot;
            base.log_scales[i] = scale;
            base.opacity_logits[i] = opacity;
            i += 1;
        }
    }
    Ok((field_grads, base))
}

fn point_backward(
    cloud: &GaussianCloud,
    i: usize,
    t: f64,
    field: &DeformationField,
    upstream: &RenderGrads,
    fg: &mut FieldGrads,
) -> Result<BaseGrad> {
    let acts = field.activations(cloud.positions[i], t)?;
    let out = acts.last().unwrap();
    let mut g_out = vec![0.0; field.output_len()];
    g_out[..3].copy_from_slice(&upstream.positions[i]);
    let q_raw = [0, 1, 2, 3].map(|k| cloud.rotations[i][k] + out[3 + k]);
    let g_q = quat_normalize_vjp(q_raw, upstream.rotations[i]);
    g_out[3..7].copy_from_slice(&g_q);
    g_out[7..10].copy_from_slice(&upstream.log_scales[i]);
    if field.deform_opacity {
        g_out[10] = upstream.opacity_logits[i];
    }

    let mut g = g_out;
    for l in (0..field.layers.len()).rev() {
        let layer = &field.layers[l];
        let input = &acts[l];
        let (gw, gb) = (&mut fg.weights[l], &mut fg.bias[l]);
        let mut g_in = vec![0.0; layer.inputs];
        for o in 0..layer.outputs {
            let go = g[o];
            if go == 0.0 {
                continue;
            }
            gb[o] += go;
            let row = o * layer.inputs;
            for k in 0..layer.inputs {
                gw[row + k] += go * input[k];
                g_in[k] += go * layer.weights[row + k];
            }
        }
        if l > 0 {
            // ReLU mask of the previous layer's output
            for (gi, a) in g_in.iter_mut().zip(input) {
                if *a <= 0.0 {
                    *gi = 0.0;
                }
            }
        }
        g = g_in;
    }

    let mut d_pos = upstream.positions[i];
    encode_vjp(&cloud.positions[i], field.position_frequencies, &g[..encoded_len(3, field.position_frequencies)], &mut d_pos);
    Ok((d_pos, g_q, upstream.log_scales[i], upstream.opacity_logits[i]))
}
