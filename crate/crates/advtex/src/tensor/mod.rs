//! Dense f32 tensors with reverse-mode automatic differentiation.
//!
//! A [`Graph`] is a tape: every operation appends a node holding its output
//! values and a record of the producing op. `backward` walks the tape in
//! reverse, accumulating gradients into leaf nodes. Graphs are rebuilt every
//! optimization step; an internal buffer pool recycles the large activation
//! buffers between steps so the loop does not churn the allocator.
//!
//! The op set is exactly what the texturing pipeline needs: 4x4 convolutions,
//! leaky ReLU, sigmoid, bilinear sampling with fixed coordinates, masked BCE
//! and L1 losses, and a few elementwise glue ops.

pub mod adam;
pub mod conv;
pub mod gemm;

pub use adam::{adam_step, AdamState, Param};

use crate::error::{Error, Result};
use std::collections::HashMap;

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorId(u32);

impl TensorId {
    fn idx(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d {
        input: TensorId,
        weight: TensorId,
        bias: TensorId,
        stride: usize,
        padding: usize,
        /// im2col matrix saved for the backward pass.
        cols: Vec<f32>,
    },
    LeakyRelu {
        input: TensorId,
        slope: f32,
    },
    Sigmoid {
        input: TensorId,
    },
    BilinearSample {
        source: TensorId,
        coords: TensorId,
        validity: TensorId,
    },
    /// Channel concatenation of two [C,H,W] tensors.
    ConcatChannels {
        a: TensorId,
        b: TensorId,
    },
    Add {
        a: TensorId,
        b: TensorId,
    },
    Sub {
        a: TensorId,
        b: TensorId,
    },
    Mul {
        a: TensorId,
        b: TensorId,
    },
    Scale {
        a: TensorId,
        factor: f32,
    },
    Sum {
        input: TensorId,
    },
    MaskedBce {
        scores: TensorId,
        label: f32,
        mask: TensorId,
        kept: usize,
    },
    /// BCE fused with the sigmoid, computed from logits: numerically stable
    /// and its gradient sigmoid(z) - t never saturates to zero.
    MaskedBceLogits {
        logits: TensorId,
        label: f32,
        mask: TensorId,
        kept: usize,
    },
    MaskedL1 {
        a: TensorId,
        target: TensorId,
        mask: TensorId,
        kept: usize,
    },
}

struct Node {
    shape: Vec<usize>,
    data: Vec<f32>,
    grad: Option<Vec<f32>>,
    op: Op,
    needs_grad: bool,
}

#[derive(Default)]
struct Pool {
    by_len: HashMap<usize, Vec<Vec<f32>>>,
}

impl Pool {
    /// Buffer of exactly `len` elements with unspecified contents; the
    /// caller must overwrite every element.
    fn take_uninit(&mut self, len: usize) -> Vec<f32> {
        match self.by_len.get_mut(&len).and_then(Vec::pop) {
            Some(buf) => buf,
            None => vec![0.0; len],
        }
    }

    fn take_zeroed(&mut self, len: usize) -> Vec<f32> {
        let mut buf = self.take_uninit(len);
        buf.fill(0.0);
        buf
    }

    fn put(&mut self, buf: Vec<f32>) {
        if buf.len() >= 64 {
            self.by_len.entry(buf.len()).or_default().push(buf);
        }
    }
}

/// Reverse-mode autodiff tape.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    pool: Pool,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    /// Drops all nodes but keeps their buffers for reuse by the next step.
    pub fn clear(&mut self) {
        let mut nodes = std::mem::take(&mut self.nodes);
        for node in nodes.drain(..) {
            let Node { data, grad, op, .. } = node;
            self.pool.put(data);
            if let Some(g) = grad {
                self.pool.put(g);
            }
            if let Op::Conv2d { cols, .. } = op {
                self.pool.put(cols);
            }
        }
        self.nodes = nodes;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<f32>, op: Op, needs_grad: bool) -> TensorId {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        let id = TensorId(self.nodes.len() as u32);
        self.nodes.push(Node {
            shape,
            data,
            grad: None,
            op,
            needs_grad,
        });
        id
    }

    fn node(&self, id: TensorId) -> &Node {
        &self.nodes[id.idx()]
    }

    /// Constant leaf: no gradient is tracked through it.
    pub fn leaf(&mut self, data: &[f32], shape: &[usize]) -> TensorId {
        assert_eq!(
            data.len(),
            shape.iter().product::<usize>(),
            "leaf data does not match shape"
        );
        let mut buf = self.pool.take_uninit(data.len());
        buf.copy_from_slice(data);
        self.push(shape.to_vec(), buf, Op::Leaf, false)
    }

    /// Leaf that accumulates a gradient during `backward`.
    pub fn leaf_with_grad(&mut self, data: &[f32], shape: &[usize]) -> TensorId {
        let id = self.leaf(data, shape);
        self.nodes[id.idx()].needs_grad = true;
        id
    }

    /// Copies a persistent parameter onto the tape as a gradient-tracking
    /// leaf (or a constant when `frozen`).
    pub fn leaf_param(&mut self, param: &Param, frozen: bool) -> TensorId {
        if frozen {
            self.leaf(&param.data, &param.shape)
        } else {
            self.leaf_with_grad(&param.data, &param.shape)
        }
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        &self.node(id).shape
    }

    pub fn data(&self, id: TensorId) -> &[f32] {
        &self.node(id).data
    }

    /// Accumulated gradient of a leaf, if `backward` has reached it.
    pub fn grad(&self, id: TensorId) -> Option<&[f32]> {
        self.node(id).grad.as_deref()
    }

    /// Moves the accumulated gradient out of the node.
    pub fn take_grad(&mut self, id: TensorId) -> Option<Vec<f32>> {
        self.nodes[id.idx()].grad.take()
    }

    /// Value of a scalar (single-element) node.
    pub fn value(&self, id: TensorId) -> f32 {
        debug_assert_eq!(self.node(id).data.len(), 1, "value() on non-scalar");
        self.node(id).data[0]
    }

    // ── Forward ops ─────────────────────────────────────────────────────

    /// 2D convolution of `input[c_in,h,w]` with `weight[c_out,c_in,kh,kw]`.
    pub fn conv2d(
        &mut self,
        input: TensorId,
        weight: TensorId,
        bias: TensorId,
        stride: usize,
        padding: usize,
    ) -> Result<TensorId> {
        let inp = self.node(input);
        let wgt = self.node(weight);
        let b = self.node(bias);
        if inp.shape.len() != 3 || wgt.shape.len() != 4 {
            return Err(Error::shape(
                "conv2d",
                format!("input rank {} weight rank {}", inp.shape.len(), wgt.shape.len()),
            ));
        }
        let (c_in, h, w) = (inp.shape[0], inp.shape[1], inp.shape[2]);
        let (c_out, wc_in, kh, kw) = (wgt.shape[0], wgt.shape[1], wgt.shape[2], wgt.shape[3]);
        if wc_in != c_in {
            return Err(Error::shape(
                "conv2d",
                format!("input has {c_in} channels but weight expects {wc_in}"),
            ));
        }
        if b.shape != [c_out] {
            return Err(Error::shape(
                "conv2d",
                format!("bias shape {:?} vs c_out {}", b.shape, c_out),
            ));
        }
        if !(stride == 1 || stride == 2) {
            return Err(Error::invalid_argument(
                "conv2d",
                format!("stride {stride} not in {{1,2}}"),
            ));
        }
        if padding != 1 {
            return Err(Error::invalid_argument("conv2d", format!("padding {padding} != 1")));
        }
        if h < 2 || w < 2 {
            return Err(Error::invalid_argument(
                "conv2d",
                format!("spatial dims {h}x{w} below minimum 2"),
            ));
        }

        let oh = conv::conv_out_size(h, kh, stride, padding);
        let ow = conv::conv_out_size(w, kw, stride, padding);
        let k = c_in * kh * kw;
        let n = oh * ow;

        let mut cols = self.pool.take_uninit(k * n);
        conv::im2col(&mut cols, &self.node(input).data, c_in, h, w, kh, kw, stride, padding);

        let mut out = self.pool.take_uninit(c_out * n);
        for (co, chunk) in out.chunks_mut(n).enumerate() {
            chunk.fill(self.node(bias).data[co]);
        }
        gemm::gemm_nn(&mut out, &self.node(weight).data, &cols, c_out, k, n);

        let needs = self.node(input).needs_grad
            || self.node(weight).needs_grad
            || self.node(bias).needs_grad;
        Ok(self.push(
            vec![c_out, oh, ow],
            out,
            Op::Conv2d {
                input,
                weight,
                bias,
                stride,
                padding,
                cols,
            },
            needs,
        ))
    }

    /// Elementwise `x if x >= 0 else slope * x`.
    pub fn leaky_relu(&mut self, input: TensorId, slope: f32) -> Result<TensorId> {
        if !(slope > 0.0 && slope < 1.0) {
            return Err(Error::invalid_argument(
                "leaky_relu",
                format!("negative_slope {slope} not in (0,1)"),
            ));
        }
        let src = &self.nodes[input.idx()];
        let mut out = self.pool.take_uninit(src.data.len());
        for (o, &x) in out.iter_mut().zip(&src.data) {
            *o = if x >= 0.0 { x } else { slope * x };
        }
        let (shape, needs) = (src.shape.clone(), src.needs_grad);
        Ok(self.push(shape, out, Op::LeakyRelu { input, slope }, needs))
    }

    /// Elementwise logistic sigmoid.
    pub fn sigmoid(&mut self, input: TensorId) -> TensorId {
        let src = &self.nodes[input.idx()];
        let mut out = self.pool.take_uninit(src.data.len());
        for (o, &x) in out.iter_mut().zip(&src.data) {
            *o = 1.0 / (1.0 + (-x).exp());
        }
        let (shape, needs) = (src.shape.clone(), src.needs_grad);
        self.push(shape, out, Op::Sigmoid { input }, needs)
    }

    /// Bilinear gather from `source[c,h,w]` at fixed `coords[2,oh,ow]`
    /// (pixel units: row plane then column plane), masked by
    /// `validity[oh,ow]`. Gradients flow to `source` only. Returns the
    /// output and the number of valid output pixels whose coordinates fell
    /// outside the source and were clamped to the border.
    pub fn bilinear_sample(
        &mut self,
        source: TensorId,
        coords: TensorId,
        validity: TensorId,
    ) -> Result<(TensorId, usize)> {
        let src = self.node(source);
        let crd = self.node(coords);
        let val = self.node(validity);
        if src.shape.len() != 3 || crd.shape.len() != 3 || crd.shape[0] != 2 {
            return Err(Error::shape(
                "bilinear_sample",
                format!("source {:?} coords {:?}", src.shape, crd.shape),
            ));
        }
        let (c, h, w) = (src.shape[0], src.shape[1], src.shape[2]);
        let (oh, ow) = (crd.shape[1], crd.shape[2]);
        if val.shape != [oh, ow] {
            return Err(Error::shape(
                "bilinear_sample",
                format!("validity {:?} vs coords {}x{}", val.shape, oh, ow),
            ));
        }

        let npix = oh * ow;
        let mut out = self.pool.take_zeroed(c * npix);
        let mut out_of_range = 0usize;
        {
            let src_data = &self.node(source).data;
            let crd_data = &self.node(coords).data;
            let val_data = &self.node(validity).data;
            for p in 0..npix {
                if val_data[p] == 0.0 {
                    continue;
                }
                let (y, x, oob) = clamp_coord(crd_data[p], crd_data[npix + p], h, w);
                if oob {
                    out_of_range += 1;
                }
                let (y0, x0, fy, fx) = corner(y, x, h, w);
                let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
                for ch in 0..c {
                    let plane = &src_data[ch * h * w..(ch + 1) * h * w];
                    let v00 = plane[y0 * w + x0];
                    let v01 = plane[y0 * w + x1];
                    let v10 = plane[y1 * w + x0];
                    let v11 = plane[y1 * w + x1];
                    let top = v00 + fx * (v01 - v00);
                    let bot = v10 + fx * (v11 - v10);
                    out[ch * npix + p] = top + fy * (bot - top);
                }
            }
        }
        let needs = self.node(source).needs_grad;
        let id = self.push(
            vec![c, oh, ow],
            out,
            Op::BilinearSample {
                source,
                coords,
                validity,
            },
            needs,
        );
        Ok((id, out_of_range))
    }

    /// Concatenates two [C,H,W] tensors along the channel axis.
    pub fn concat_channels(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (na, nb) = (self.node(a), self.node(b));
        if na.shape.len() != 3 || nb.shape.len() != 3 || na.shape[1..] != nb.shape[1..] {
            return Err(Error::shape(
                "concat_channels",
                format!("{:?} vs {:?}", na.shape, nb.shape),
            ));
        }
        let shape = vec![na.shape[0] + nb.shape[0], na.shape[1], na.shape[2]];
        let needs = na.needs_grad || nb.needs_grad;
        let split = na.data.len();
        let mut out = self.pool.take_uninit(split + nb.data.len());
        out[..split].copy_from_slice(&self.node(a).data);
        out[split..].copy_from_slice(&self.node(b).data);
        Ok(self.push(shape, out, Op::ConcatChannels { a, b }, needs))
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.elementwise_binary(a, b, "add", |x, y| x + y, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.elementwise_binary(a, b, "sub", |x, y| x - y, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.elementwise_binary(a, b, "mul", |x, y| x * y, Op::Mul { a, b })
    }

    fn elementwise_binary(
        &mut self,
        a: TensorId,
        b: TensorId,
        name: &'static str,
        f: impl Fn(f32, f32) -> f32,
        op: Op,
    ) -> Result<TensorId> {
        let (na, nb) = (self.node(a), self.node(b));
        if na.shape != nb.shape {
            return Err(Error::shape(name, format!("{:?} vs {:?}", na.shape, nb.shape)));
        }
        let mut out = self.pool.take_uninit(na.data.len());
        {
            let (na, nb) = (self.node(a), self.node(b));
            for ((o, &x), &y) in out.iter_mut().zip(&na.data).zip(&nb.data) {
                *o = f(x, y);
            }
        }
        let shape = self.node(a).shape.clone();
        let needs = self.node(a).needs_grad || self.node(b).needs_grad;
        Ok(self.push(shape, out, op, needs))
    }

    pub fn scale(&mut self, a: TensorId, factor: f32) -> TensorId {
        let na = &self.nodes[a.idx()];
        let mut out = self.pool.take_uninit(na.data.len());
        for (o, &x) in out.iter_mut().zip(&na.data) {
            *o = factor * x;
        }
        let (shape, needs) = (na.shape.clone(), na.needs_grad);
        self.push(shape, out, Op::Scale { a, factor }, needs)
    }

    /// Sum of all elements, as a scalar node.
    pub fn sum(&mut self, input: TensorId) -> TensorId {
        let src = self.node(input);
        let s: f32 = src.data.iter().sum();
        let needs = src.needs_grad;
        self.push(vec![1], vec![s], Op::Sum { input }, needs)
    }

    /// Mean binary cross-entropy of `scores` against a constant label over
    /// the cells where `mask` is nonzero. Scores are clamped to
    /// [1e-7, 1-1e-7] before the logs. Returns the scalar loss node and the
    /// number of cells kept; with an all-zero mask the loss is 0 and the
    /// count lets the caller flag "no valid patches".
    pub fn masked_bce_loss(
        &mut self,
        scores: TensorId,
        target_label: f32,
        mask: TensorId,
    ) -> Result<(TensorId, usize)> {
        if !(target_label == 0.0 || target_label == 1.0) {
            return Err(Error::invalid_argument(
                "masked_bce_loss",
                format!("target_label {target_label} not in {{0,1}}"),
            ));
        }
        let (ns, nm) = (self.node(scores), self.node(mask));
        if ns.data.len() != nm.data.len() {
            return Err(Error::shape(
                "masked_bce_loss",
                format!("scores {:?} vs mask {:?}", ns.shape, nm.shape),
            ));
        }
        let mut kept = 0usize;
        let mut total = 0.0f64;
        for (&s, &m) in ns.data.iter().zip(&nm.data) {
            if m == 0.0 {
                continue;
            }
            kept += 1;
            let s = s.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP) as f64;
            total -= target_label as f64 * s.ln() + (1.0 - target_label as f64) * (1.0 - s).ln();
        }
        let loss = if kept > 0 { (total / kept as f64) as f32 } else { 0.0 };
        let needs = ns.needs_grad;
        let id = self.push(
            vec![1],
            vec![loss],
            Op::MaskedBce {
                scores,
                label: target_label,
                mask,
                kept,
            },
            needs,
        );
        Ok((id, kept))
    }

    /// Mean binary cross-entropy of sigmoid(`logits`) against a constant
    /// label over the cells where `mask` is nonzero, fused for numerical
    /// stability: the loss uses max(z,0) - z*t + ln(1+exp(-|z|)) and the
    /// gradient is (sigmoid(z) - t), which stays informative even where a
    /// separate sigmoid would round to exactly 0 or 1.
    pub fn masked_bce_with_logits(
        &mut self,
        logits: TensorId,
        target_label: f32,
        mask: TensorId,
    ) -> Result<(TensorId, usize)> {
        if !(target_label == 0.0 || target_label == 1.0) {
            return Err(Error::invalid_argument(
                "masked_bce_with_logits",
                format!("target_label {target_label} not in {{0,1}}"),
            ));
        }
        let (nl, nm) = (&self.nodes[logits.idx()], &self.nodes[mask.idx()]);
        if nl.data.len() != nm.data.len() {
            return Err(Error::shape(
                "masked_bce_with_logits",
                format!("logits {:?} vs mask {:?}", nl.shape, nm.shape),
            ));
        }
        let mut kept = 0usize;
        let mut total = 0.0f64;
        for (&z, &m) in nl.data.iter().zip(&nm.data) {
            if m == 0.0 {
                continue;
            }
            kept += 1;
            let z = z as f64;
            total += z.max(0.0) - z * target_label as f64 + (-z.abs()).exp().ln_1p();
        }
        let loss = if kept > 0 { (total / kept as f64) as f32 } else { 0.0 };
        let needs = self.nodes[logits.idx()].needs_grad;
        let id = self.push(
            vec![1],
            vec![loss],
            Op::MaskedBceLogits {
                logits,
                label: target_label,
                mask,
                kept,
            },
            needs,
        );
        Ok((id, kept))
    }

    /// Mean absolute difference of `a` and `target` over nonzero `mask`
    /// entries; differentiable w.r.t. `a` only. The mask is broadcast
    /// across channels when `a` is [C,H,W] and the mask [H,W]. Returns the
    /// scalar loss node and the number of mask pixels kept.
    pub fn l1_loss(
        &mut self,
        a: TensorId,
        target: TensorId,
        mask: TensorId,
    ) -> Result<(TensorId, usize)> {
        let (na, nt, nm) = (self.node(a), self.node(target), self.node(mask));
        if na.shape != nt.shape {
            return Err(Error::shape(
                "l1_loss",
                format!("a {:?} vs target {:?}", na.shape, nt.shape),
            ));
        }
        let npix = nm.data.len();
        if npix == 0 || na.data.len() % npix != 0 {
            return Err(Error::shape(
                "l1_loss",
                format!("mask of {npix} does not divide {} elements", na.data.len()),
            ));
        }
        let channels = na.data.len() / npix;
        let mut kept = 0usize;
        let mut total = 0.0f64;
        for p in 0..npix {
            if nm.data[p] == 0.0 {
                continue;
            }
            kept += 1;
            for ch in 0..channels {
                total += (na.data[ch * npix + p] - nt.data[ch * npix + p]).abs() as f64;
            }
        }
        let loss = if kept > 0 {
            (total / (kept * channels) as f64) as f32
        } else {
            0.0
        };
        let needs = self.node(a).needs_grad;
        let id = self.push(
            vec![1],
            vec![loss],
            Op::MaskedL1 {
                a,
                target,
                mask,
                kept: kept * channels,
            },
            needs,
        );
        Ok((id, kept))
    }

    // ── Backward ────────────────────────────────────────────────────────

    /// Accumulates d(loss)/d(leaf) into the grad of every reachable
    /// gradient-tracking leaf. Each call propagates its own pass, so calling
    /// twice on the same graph doubles the leaf gradients.
    pub fn backward(&mut self, loss: TensorId) -> Result<()> {
        if self.node(loss).data.len() != 1 {
            return Err(Error::invalid_argument(
                "backward",
                format!("loss has shape {:?}, expected a scalar", self.node(loss).shape),
            ));
        }
        let n = loss.idx() + 1;
        let mut delta: Vec<Option<Vec<f32>>> = Vec::with_capacity(n);
        delta.resize_with(n, || None);
        delta[loss.idx()] = Some(vec![1.0]);

        for i in (0..n).rev() {
            let Some(d) = delta[i].take() else { continue };
            if !self.nodes[i].needs_grad {
                self.pool.put(d);
                continue;
            }
            self.propagate(i, &d, &mut delta);
            if matches!(self.nodes[i].op, Op::Leaf) {
                match &mut self.nodes[i].grad {
                    Some(g) => {
                        for (a, b) in g.iter_mut().zip(&d) {
                            *a += b;
                        }
                        self.pool.put(d);
                    }
                    None => self.nodes[i].grad = Some(d),
                }
            } else {
                self.pool.put(d);
            }
        }
        Ok(())
    }

    /// Routes `d`, the loss gradient at node `i`, into the deltas of the
    /// node's inputs.
    fn propagate(&mut self, i: usize, d: &[f32], delta: &mut [Option<Vec<f32>>]) {
        // Ops hold ids, not references, so per-input buffers are created on
        // demand; the tape is append-only and inputs always precede node i.
        macro_rules! delta_buf {
            ($id:expr) => {{
                let idx = $id.idx();
                if delta[idx].is_none() {
                    let len = self.nodes[idx].data.len();
                    delta[idx] = Some(self.pool.take_zeroed(len));
                }
                delta[idx].as_mut().unwrap()
            }};
        }

        match self.nodes[i].op {
            Op::Leaf => {}
            Op::Conv2d {
                input,
                weight,
                bias,
                stride,
                padding,
                ..
            } => {
                let in_shape = self.nodes[input.idx()].shape.clone();
                let w_shape = self.nodes[weight.idx()].shape.clone();
                let (c_in, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
                let (c_out, kh, kw) = (w_shape[0], w_shape[2], w_shape[3]);
                let k = c_in * kh * kw;
                let npix = d.len() / c_out;

                if self.nodes[weight.idx()].needs_grad {
                    let mut dw = self.pool.take_zeroed(c_out * k);
                    if let Op::Conv2d { cols, .. } = &self.nodes[i].op {
                        gemm::gemm_nt(&mut dw, d, cols, c_out, npix, k);
                    }
                    let buf = delta_buf!(weight);
                    for (a, b) in buf.iter_mut().zip(&dw) {
                        *a += b;
                    }
                    self.pool.put(dw);
                }
                if self.nodes[bias.idx()].needs_grad {
                    let buf = delta_buf!(bias);
                    for (co, chunk) in d.chunks(npix).enumerate() {
                        buf[co] += chunk.iter().sum::<f32>();
                    }
                }
                if self.nodes[input.idx()].needs_grad {
                    let mut dcols = self.pool.take_zeroed(k * npix);
                    gemm::gemm_tn(&mut dcols, &self.nodes[weight.idx()].data, d, k, c_out, npix);
                    let mut dinput = self.pool.take_zeroed(c_in * h * w);
                    conv::col2im(&mut dinput, &dcols, c_in, h, w, kh, kw, stride, padding);
                    self.pool.put(dcols);
                    let buf = delta_buf!(input);
                    for (a, b) in buf.iter_mut().zip(&dinput) {
                        *a += b;
                    }
                    self.pool.put(dinput);
                }
            }
            Op::LeakyRelu { input, slope } => {
                let src = input.idx();
                let buf = delta_buf!(input);
                // split borrows: buf lives in delta, node data in self
                let x = &self.nodes[src].data;
                for ((g, &dv), &xv) in buf.iter_mut().zip(d).zip(x) {
                    *g += if xv >= 0.0 { dv } else { slope * dv };
                }
            }
            Op::Sigmoid { input } => {
                let out = i;
                let buf = delta_buf!(input);
                let s = &self.nodes[out].data;
                for ((g, &dv), &sv) in buf.iter_mut().zip(d).zip(s) {
                    *g += dv * sv * (1.0 - sv);
                }
            }
            Op::BilinearSample {
                source,
                coords,
                validity,
            } => {
                if !self.nodes[source.idx()].needs_grad {
                    return;
                }
                let s_shape = self.nodes[source.idx()].shape.clone();
                let (c, h, w) = (s_shape[0], s_shape[1], s_shape[2]);
                let npix = self.nodes[validity.idx()].data.len();
                let buf = delta_buf!(source);
                let crd = &self.nodes[coords.idx()].data;
                let val = &self.nodes[validity.idx()].data;
                for p in 0..npix {
                    if val[p] == 0.0 {
                        continue;
                    }
                    let (y, x, _) = clamp_coord(crd[p], crd[npix + p], h, w);
                    let (y0, x0, fy, fx) = corner(y, x, h, w);
                    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
                    for ch in 0..c {
                        let g = d[ch * npix + p];
                        let plane = &mut buf[ch * h * w..(ch + 1) * h * w];
                        plane[y0 * w + x0] += g * (1.0 - fy) * (1.0 - fx);
                        plane[y0 * w + x1] += g * (1.0 - fy) * fx;
                        plane[y1 * w + x0] += g * fy * (1.0 - fx);
                        plane[y1 * w + x1] += g * fy * fx;
                    }
                }
            }
            Op::ConcatChannels { a, b } => {
                let na = self.nodes[a.idx()].data.len();
                if self.nodes[a.idx()].needs_grad {
                    let buf = delta_buf!(a);
                    for (g, &dv) in buf.iter_mut().zip(&d[..na]) {
                        *g += dv;
                    }
                }
                if self.nodes[b.idx()].needs_grad {
                    let buf = delta_buf!(b);
                    for (g, &dv) in buf.iter_mut().zip(&d[na..]) {
                        *g += dv;
                    }
                }
            }
            Op::Add { a, b } => {
                for id in [a, b] {
                    if self.nodes[id.idx()].needs_grad {
                        let buf = delta_buf!(id);
                        for (g, &dv) in buf.iter_mut().zip(d) {
                            *g += dv;
                        }
                    }
                }
            }
            Op::Sub { a, b } => {
                if self.nodes[a.idx()].needs_grad {
                    let buf = delta_buf!(a);
                    for (g, &dv) in buf.iter_mut().zip(d) {
                        *g += dv;
                    }
                }
                if self.nodes[b.idx()].needs_grad {
                    let buf = delta_buf!(b);
                    for (g, &dv) in buf.iter_mut().zip(d) {
                        *g -= dv;
                    }
                }
            }
            Op::Mul { a, b } => {
                if self.nodes[a.idx()].needs_grad {
                    let buf = delta_buf!(a);
                    let bd = &self.nodes[b.idx()].data;
                    for ((g, &dv), &bv) in buf.iter_mut().zip(d).zip(bd) {
                        *g += dv * bv;
                    }
                }
                if self.nodes[b.idx()].needs_grad {
                    let buf = delta_buf!(b);
                    let ad = &self.nodes[a.idx()].data;
                    for ((g, &dv), &av) in buf.iter_mut().zip(d).zip(ad) {
                        *g += dv * av;
                    }
                }
            }
            Op::Scale { a, factor } => {
                let buf = delta_buf!(a);
                for (g, &dv) in buf.iter_mut().zip(d) {
                    *g += factor * dv;
                }
            }
            Op::Sum { input } => {
                let buf = delta_buf!(input);
                for g in buf.iter_mut() {
                    *g += d[0];
                }
            }
            Op::MaskedBce {
                scores,
                label,
                mask,
                kept,
            } => {
                if kept == 0 || !self.nodes[scores.idx()].needs_grad {
                    return;
                }
                let g0 = d[0] / kept as f32;
                let buf = delta_buf!(scores);
                let sd = &self.nodes[scores.idx()].data;
                let md = &self.nodes[mask.idx()].data;
                for ((g, &s), &m) in buf.iter_mut().zip(sd).zip(md) {
                    if m == 0.0 {
                        continue;
                    }
                    // evaluate at the clamped score so saturated cells keep a
                    // (large, finite) restoring gradient
                    let s = s.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
                    *g += g0 * (-label / s + (1.0 - label) / (1.0 - s));
                }
            }
            Op::MaskedBceLogits {
                logits,
                label,
                mask,
                kept,
            } => {
                if kept == 0 || !self.nodes[logits.idx()].needs_grad {
                    return;
                }
                let g0 = d[0] / kept as f32;
                let buf = delta_buf!(logits);
                let zd = &self.nodes[logits.idx()].data;
                let md = &self.nodes[mask.idx()].data;
                for ((g, &z), &m) in buf.iter_mut().zip(zd).zip(md) {
                    if m == 0.0 {
                        continue;
                    }
                    let s = 1.0 / (1.0 + (-z).exp());
                    *g += g0 * (s - label);
                }
            }
            Op::MaskedL1 {
                a,
                target,
                mask,
                kept,
            } => {
                if kept == 0 || !self.nodes[a.idx()].needs_grad {
                    return;
                }
                let g0 = d[0] / kept as f32;
                let npix = self.nodes[mask.idx()].data.len();
                let channels = self.nodes[a.idx()].data.len() / npix;
                let buf = delta_buf!(a);
                let ad = &self.nodes[a.idx()].data;
                let td = &self.nodes[target.idx()].data;
                let md = &self.nodes[mask.idx()].data;
                for p in 0..npix {
                    if md[p] == 0.0 {
                        continue;
                    }
                    for ch in 0..channels {
                        let idx = ch * npix + p;
                        buf[idx] += g0 * signum_zero(ad[idx] - td[idx]);
                    }
                }
            }
        }
    }
}

const BCE_CLAMP: f32 = 1e-7;

/// Subgradient of |x| with the convention sign(0) = 0.
fn signum_zero(x: f32) -> f32 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Clamps a sample position to the source rectangle; reports whether it was
/// out of range.
fn clamp_coord(y: f32, x: f32, h: usize, w: usize) -> (f32, f32, bool) {
    let (max_y, max_x) = ((h - 1) as f32, (w - 1) as f32);
    let oob = y < 0.0 || y > max_y || x < 0.0 || x > max_x;
    (y.clamp(0.0, max_y), x.clamp(0.0, max_x), oob)
}

/// Integer corner and fractional offsets of a clamped sample position.
fn corner(y: f32, x: f32, h: usize, w: usize) -> (usize, usize, f32, f32) {
    let y0 = (y.floor() as usize).min(h.saturating_sub(2));
    let x0 = (x.floor() as usize).min(w.saturating_sub(2));
    (y0, x0, y - y0 as f32, x - x0 as f32)
}
