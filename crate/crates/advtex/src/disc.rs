//! Conditional patch discriminator.
//!
//! Five 4x4 convolution blocks (padding 1) over channels
//! 6 -> 64 -> 128 -> 256 -> 512 -> 1 with strides (2,2,2,1,1), leaky ReLU
//! after the first four and a sigmoid after the last; no normalization
//! layers. The stack scores overlapping 70x70 patches of its input. The
//! input is the channel concatenation of the condition image and the
//! residual (candidate - condition), so the discriminator judges how the
//! candidate deviates from the view it is conditioned on.

use crate::error::{Error, Result};
use crate::tensor::{adam_step, AdamState, Graph, Param, TensorId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Channel plan: the canonical five-block layout whose composed receptive
/// field is exactly 70 input pixels.
pub const CHANNELS: [usize; 6] = [6, 64, 128, 256, 512, 1];
pub const STRIDES: [usize; 5] = [2, 2, 2, 1, 1];
pub const KERNEL: usize = 4;
pub const PADDING: usize = 1;

/// Default discriminator learning rate.
pub const LEARNING_RATE: f32 = 1e-4;

/// Leaky ReLU slope between blocks.
pub const LEAKY_SLOPE: f32 = 0.2;

/// Std-dev of the Gaussian weight initialization.
pub const INIT_STD: f32 = 0.02;

pub struct ConvBlock {
    pub weight: Param,
    pub bias: Param,
    pub weight_adam: AdamState,
    pub bias_adam: AdamState,
    pub stride: usize,
}

/// Parameters and optimizer state for the five convolution blocks.
pub struct DiscriminatorState {
    pub blocks: Vec<ConvBlock>,
}

/// Per-graph leaf handles for one attachment of the discriminator, shared
/// by every forward pass on that graph so gradients accumulate in one place.
pub struct DiscriminatorHandles {
    leaves: Vec<(TensorId, TensorId)>,
    frozen: bool,
}

/// Deterministic initialization: Gaussian(0, 0.02) weights, zero biases.
/// `input_channels` must be 6 (condition RGB + residual RGB).
pub fn init_discriminator(input_channels: usize, seed: u64) -> Result<DiscriminatorState> {
    if input_channels != CHANNELS[0] {
        return Err(Error::invalid_argument(
            "init_discriminator",
            format!("input_channels {input_channels} != {}", CHANNELS[0]),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks = (0..5)
        .map(|b| {
            let (c_in, c_out) = (CHANNELS[b], CHANNELS[b + 1]);
            let n = c_out * c_in * KERNEL * KERNEL;
            let weight_data: Vec<f32> =
                (0..n).map(|_| INIT_STD * normal_sample(&mut rng)).collect();
            let weight = Param::new(weight_data, &[c_out, c_in, KERNEL, KERNEL]);
            let bias = Param::zeros(&[c_out]);
            ConvBlock {
                weight_adam: AdamState::new(LEARNING_RATE, weight.len()),
                bias_adam: AdamState::new(LEARNING_RATE, bias.len()),
                weight,
                bias,
                stride: STRIDES[b],
            }
        })
        .collect();
    Ok(DiscriminatorState { blocks })
}

/// Standard normal via Box-Muller, driven by the seeded stream.
fn normal_sample(rng: &mut ChaCha8Rng) -> f32 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    ((-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()) as f32
}

impl DiscriminatorState {
    pub fn set_learning_rate(&mut self, lr: f32) {
        for b in &mut self.blocks {
            b.weight_adam.learning_rate = lr;
            b.bias_adam.learning_rate = lr;
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.blocks.iter().map(|b| b.weight.len() + b.bias.len()).sum()
    }

    /// Copies the parameters onto a graph once; every forward pass on that
    /// graph must reuse the returned handles.
    pub fn attach(&self, g: &mut Graph, frozen: bool) -> DiscriminatorHandles {
        let leaves = self
            .blocks
            .iter()
            .map(|b| (g.leaf_param(&b.weight, frozen), g.leaf_param(&b.bias, frozen)))
            .collect();
        DiscriminatorHandles { leaves, frozen }
    }

    /// Scores `candidate` conditioned on `condition` (both [3,H,W] nodes,
    /// H,W >= 70). Output is a [1,H',W'] patch-score map in (0,1).
    pub fn forward(
        &self,
        g: &mut Graph,
        handles: &DiscriminatorHandles,
        condition: TensorId,
        candidate: TensorId,
    ) -> Result<TensorId> {
        let logits = self.forward_logits(g, handles, condition, candidate)?;
        Ok(g.sigmoid(logits))
    }

    /// The pre-sigmoid score map. Training losses consume this through the
    /// fused BCE so gradients survive score saturation; [`Self::forward`]
    /// applies the sigmoid for the (0,1) patch-score contract.
    pub fn forward_logits(
        &self,
        g: &mut Graph,
        handles: &DiscriminatorHandles,
        condition: TensorId,
        candidate: TensorId,
    ) -> Result<TensorId> {
        let shape = g.shape(condition).to_vec();
        if shape.len() != 3 || shape[0] != 3 {
            return Err(Error::shape(
                "discriminator_forward",
                format!("condition shape {shape:?}, expected [3,H,W]"),
            ));
        }
        let rf = receptive_field();
        if shape[1] < rf || shape[2] < rf {
            return Err(Error::invalid_argument(
                "discriminator_forward",
                format!(
                    "input {}x{} smaller than one receptive field ({rf})",
                    shape[1], shape[2]
                ),
            ));
        }
        let residual = g.sub(candidate, condition)?;
        let mut x = g.concat_channels(condition, residual)?;
        for (i, block) in self.blocks.iter().enumerate() {
            let (w, b) = handles.leaves[i];
            x = g.conv2d(x, w, b, block.stride, PADDING)?;
            if i + 1 < self.blocks.len() {
                x = g.leaky_relu(x, LEAKY_SLOPE)?;
            }
        }
        Ok(x)
    }

    /// Pulls accumulated gradients off the graph into the parameters.
    pub fn collect_gradients(&mut self, g: &mut Graph, handles: &DiscriminatorHandles) {
        assert!(!handles.frozen, "collect_gradients on frozen attachment");
        for (block, &(w, b)) in self.blocks.iter_mut().zip(&handles.leaves) {
            if let Some(gw) = g.take_grad(w) {
                block.weight.accumulate_grad(&gw);
            }
            if let Some(gb) = g.take_grad(b) {
                block.bias.accumulate_grad(&gb);
            }
        }
    }

    /// One Adam update on every parameter that has a gradient.
    pub fn adam_step_all(&mut self) -> Result<()> {
        for block in &mut self.blocks {
            if block.weight.grad.is_some() {
                adam_step(&mut block.weight, &mut block.weight_adam)?;
            }
            if block.bias.grad.is_some() {
                adam_step(&mut block.bias, &mut block.bias_adam)?;
            }
        }
        Ok(())
    }
}

/// Spatial size of the score map for a given input size.
pub fn score_map_size(h: usize, w: usize) -> (usize, usize) {
    let mut dims = (h, w);
    for s in STRIDES {
        dims = (
            crate::tensor::conv::conv_out_size(dims.0, KERNEL, s, PADDING),
            crate::tensor::conv::conv_out_size(dims.1, KERNEL, s, PADDING),
        );
    }
    dims
}

/// Receptive field of one score cell, by the recurrence
/// rf <- rf + (k - 1) * jump, jump <- jump * stride.
pub fn receptive_field() -> usize {
    let (mut rf, mut jump) = (1usize, 1usize);
    for s in STRIDES {
        rf += (KERNEL - 1) * jump;
        jump *= s;
    }
    rf
}

/// Input-pixel span of score cell c along one axis, before clipping:
/// [offset + c*jump, offset + c*jump + rf). Derived by unrolling the conv
/// stack from the top.
pub fn receptive_field_span() -> (isize, usize, usize) {
    let (mut lo, mut hi) = (0isize, 0isize); // cell 0 input range, inclusive
    for s in STRIDES.iter().rev() {
        lo = lo * *s as isize - PADDING as isize;
        hi = hi * *s as isize - PADDING as isize + (KERNEL - 1) as isize;
    }
    let mut jump = 1usize;
    for s in STRIDES {
        jump *= s;
    }
    (lo, jump, (hi - lo + 1) as usize)
}

/// Which score cells to keep for training, from the foreground mask and the
/// occlusion-validity mask of the example (both h x w): a cell survives iff
/// foreground covers at least 10% of its receptive field (clipped at the
/// image borders) and strictly more than half of it is not occluded.
/// Returns the score-map mask and the number of kept cells.
pub fn receptive_field_mask(
    foreground: &[u8],
    occlusion_valid: &[u8],
    h: usize,
    w: usize,
) -> (Vec<f32>, usize) {
    assert_eq!(foreground.len(), h * w);
    assert_eq!(occlusion_valid.len(), h * w);
    let (h5, w5) = score_map_size(h, w);
    let (offset, jump, rf) = receptive_field_span();

    let fg_sums = integral_image(foreground, h, w);
    let ok_sums = integral_image(occlusion_valid, h, w);

    let mut mask = vec![0.0f32; h5 * w5];
    let mut kept = 0usize;
    for cy in 0..h5 {
        let y0 = (offset + (cy * jump) as isize).max(0) as usize;
        let y1 = ((offset + (cy * jump) as isize + rf as isize).min(h as isize)) as usize;
        for cx in 0..w5 {
            let x0 = (offset + (cx * jump) as isize).max(0) as usize;
            let x1 = ((offset + (cx * jump) as isize + rf as isize).min(w as isize)) as usize;
            let area = ((y1 - y0) * (x1 - x0)) as u64;
            if area == 0 {
                continue;
            }
            let fg = box_sum(&fg_sums, w, y0, x0, y1, x1);
            let ok = box_sum(&ok_sums, w, y0, x0, y1, x1);
            // integer comparisons: fg/area >= 1/10 and ok/area > 1/2
            if fg * 10 >= area && ok * 2 > area {
                mask[cy * w5 + cx] = 1.0;
                kept += 1;
            }
        }
    }
    (mask, kept)
}

/// Summed-area table with a zero top row and left column.
fn integral_image(mask: &[u8], h: usize, w: usize) -> Vec<u64> {
    let stride = w + 1;
    let mut s = vec![0u64; (h + 1) * stride];
    for y in 0..h {
        let mut row_sum = 0u64;
        for x in 0..w {
            row_sum += u64::from(mask[y * w + x] != 0);
            s[(y + 1) * stride + x + 1] = s[y * stride + x + 1] + row_sum;
        }
    }
    s
}

fn box_sum(s: &[u64], w: usize, y0: usize, x0: usize, y1: usize, x1: usize) -> u64 {
    let stride = w + 1;
    s[y1 * stride + x1] + s[y0 * stride + x0] - s[y0 * stride + x1] - s[y1 * stride + x0]
}
