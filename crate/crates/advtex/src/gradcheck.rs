//! Finite-difference verification of every differentiable operation.
//!
//! The oracles here are independent scalar re-implementations of each
//! forward computation in f64; they share no code with the f32 graph ops
//! they check. Central differences of the oracle are compared against the
//! analytic gradients produced by `Graph::backward`.

use crate::disc;
use crate::tensor::Graph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Result of one operation's randomized gradient check.
#[derive(Debug, Clone)]
pub struct OpReport {
    pub name: &'static str,
    pub instances: usize,
    pub checks: usize,
    pub max_rel_err: f64,
}

impl OpReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

/// Central-difference step; forwards are evaluated in f64 so truncation
/// dominates and stays near eps^2.
const FD_EPS: f64 = 1e-4;

/// rel(a, b) with an absolute floor so exactly-zero gradients compare
/// cleanly.
fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-3)
}

fn central_diff(f: &mut dyn FnMut(&[f64]) -> f64, x: &mut [f64], i: usize) -> f64 {
    let orig = x[i];
    x[i] = orig + FD_EPS;
    let fp = f(x);
    x[i] = orig - FD_EPS;
    let fm = f(x);
    x[i] = orig;
    (fp - fm) / (2.0 * FD_EPS)
}

// ── f64 oracle forwards ─────────────────────────────────────────────────

pub mod oracle {
    /// Plain quadruple-loop convolution, f64.
    #[allow(clippy::too_many_arguments)]
    pub fn conv2d(
        input: &[f64],
        weight: &[f64],
        bias: &[f64],
        c_in: usize,
        h: usize,
        w: usize,
        c_out: usize,
        kh: usize,
        kw: usize,
        stride: usize,
        padding: usize,
    ) -> Vec<f64> {
        let oh = (h + 2 * padding - kh) / stride + 1;
        let ow = (w + 2 * padding - kw) / stride + 1;
        let mut out = vec![0.0; c_out * oh * ow];
        for co in 0..c_out {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bias[co];
                    for ci in 0..c_in {
                        for ky in 0..kh {
                            let iy = (oy * stride + ky) as isize - padding as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for kx in 0..kw {
                                let ix = (ox * stride + kx) as isize - padding as isize;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                acc += input[(ci * h + iy as usize) * w + ix as usize]
                                    * weight[((co * c_in + ci) * kh + ky) * kw + kx];
                            }
                        }
                    }
                    out[(co * oh + oy) * ow + ox] = acc;
                }
            }
        }
        out
    }

    pub fn leaky_relu(x: &[f64], slope: f64) -> Vec<f64> {
        x.iter().map(|&v| if v >= 0.0 { v } else { slope * v }).collect()
    }

    pub fn sigmoid(x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| 1.0 / (1.0 + (-v).exp())).collect()
    }

    /// Bilinear gather; coords are (row plane, col plane) in pixel units.
    pub fn bilinear(
        source: &[f64],
        coords: &[f64],
        valid: &[f64],
        c: usize,
        h: usize,
        w: usize,
        npix: usize,
    ) -> Vec<f64> {
        let mut out = vec![0.0; c * npix];
        for p in 0..npix {
            if valid[p] == 0.0 {
                continue;
            }
            let y = coords[p].clamp(0.0, (h - 1) as f64);
            let x = coords[npix + p].clamp(0.0, (w - 1) as f64);
            let y0 = (y.floor() as usize).min(h.saturating_sub(2));
            let x0 = (x.floor() as usize).min(w.saturating_sub(2));
            let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
            let (fy, fx) = (y - y0 as f64, x - x0 as f64);
            for ch in 0..c {
                let plane = &source[ch * h * w..(ch + 1) * h * w];
                let top = plane[y0 * w + x0] * (1.0 - fx) + plane[y0 * w + x1] * fx;
                let bot = plane[y1 * w + x0] * (1.0 - fx) + plane[y1 * w + x1] * fx;
                out[ch * npix + p] = top * (1.0 - fy) + bot * fy;
            }
        }
        out
    }

    pub fn masked_bce_logits(logits: &[f64], label: f64, mask: &[f64]) -> f64 {
        let mut total = 0.0;
        let mut kept = 0usize;
        for (&z, &m) in logits.iter().zip(mask) {
            if m == 0.0 {
                continue;
            }
            kept += 1;
            total += z.max(0.0) - z * label + (-z.abs()).exp().ln_1p();
        }
        if kept == 0 {
            0.0
        } else {
            total / kept as f64
        }
    }

    pub fn masked_bce(scores: &[f64], label: f64, mask: &[f64]) -> f64 {
        let mut total = 0.0;
        let mut kept = 0usize;
        for (&s, &m) in scores.iter().zip(mask) {
            if m == 0.0 {
                continue;
            }
            kept += 1;
            let s = s.clamp(1e-7, 1.0 - 1e-7);
            total -= label * s.ln() + (1.0 - label) * (1.0 - s).ln();
        }
        if kept == 0 {
            0.0
        } else {
            total / kept as f64
        }
    }

    pub fn masked_l1(a: &[f64], b: &[f64], mask: &[f64], channels: usize) -> f64 {
        let npix = mask.len();
        let mut total = 0.0;
        let mut kept = 0usize;
        for p in 0..npix {
            if mask[p] == 0.0 {
                continue;
            }
            kept += 1;
            for ch in 0..channels {
                total += (a[ch * npix + p] - b[ch * npix + p]).abs();
            }
        }
        if kept == 0 {
            0.0
        } else {
            total / (kept * channels) as f64
        }
    }
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

// ── Per-op randomized checks ────────────────────────────────────────────

fn check_conv2d(seed: u64, instances: usize) -> OpReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_err = 0.0f64;
    let mut checks = 0usize;
    for _ in 0..instances {
        let c_in = rng.gen_range(1..=3);
        let c_out = rng.gen_range(1..=3);
        let h = rng.gen_range(4..=8);
        let w = rng.gen_range(4..=8);
        let stride = if rng.gen_bool(0.5) { 1 } else { 2 };
        let mut input: Vec<f64> = (0..c_in * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut weight: Vec<f64> =
            (0..c_out * c_in * 16).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let mut bias: Vec<f64> = (0..c_out).map(|_| rng.gen_range(-0.5..0.5)).collect();

        // analytic gradients of sum(conv(input))
        let mut g = Graph::new();
        let ti = g.leaf_with_grad(&to_f32(&input), &[c_in, h, w]);
        let tw = g.leaf_with_grad(&to_f32(&weight), &[c_out, c_in, 4, 4]);
        let tb = g.leaf_with_grad(&to_f32(&bias), &[c_out]);
        let out = g.conv2d(ti, tw, tb, stride, 1).unwrap();
        let loss = g.sum(out);
        g.backward(loss).unwrap();
        let (gi, gw, gb) = (
            g.grad(ti).unwrap().to_vec(),
            g.grad(tw).unwrap().to_vec(),
            g.grad(tb).unwrap().to_vec(),
        );

        let input0 = input.clone();
        let weight0 = weight.clone();
        let bias0 = bias.clone();
        for (which, analytic) in [(0usize, &gi), (1, &gw), (2, &gb)] {
            let x = match which {
                0 => &mut input,
                1 => &mut weight,
                _ => &mut bias,
            };
            let n = x.len();
            for i in (0..n).step_by(1 + n / 24) {
                let mut f = |x: &[f64]| -> f64 {
                    let (inp, wgt, bia) = match which {
                        0 => (x, weight0.as_slice(), bias0.as_slice()),
                        1 => (input0.as_slice(), x, bias0.as_slice()),
                        _ => (input0.as_slice(), weight0.as_slice(), x),
                    };
                    oracle::conv2d(inp, wgt, bia, c_in, h, w, c_out, 4, 4, stride, 1)
                        .iter()
                        .sum()
                };
                let numeric = central_diff(&mut f, x, i);
                max_err = max_err.max(rel_err(analytic[i] as f64, numeric));
                checks += 1;
            }
        }
    }
    OpReport {
        name: "conv2d",
        instances,
        checks,
        max_rel_err: max_err,
    }
}

fn check_elementwise(seed: u64, instances: usize, which: &'static str) -> OpReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_err = 0.0f64;
    let mut checks = 0usize;
    for _ in 0..instances {
        let n = rng.gen_range(8..64);
        // keep sigmoid in its responsive range; keep leaky_relu away from
        // the kink at 0
        let mut x: Vec<f64> = (0..n)
            .map(|_| loop {
                let v = rng.gen_range(-2.0..2.0);
                if which != "leaky_relu" || (v as f64).abs() > 1e-3 {
                    break v;
                }
            })
            .collect();
        let slope = 0.2;

        let mut g = Graph::new();
        let t = g.leaf_with_grad(&to_f32(&x), &[n]);
        let y = match which {
            "leaky_relu" => g.leaky_relu(t, slope as f32).unwrap(),
            _ => g.sigmoid(t),
        };
        let loss = g.sum(y);
        g.backward(loss).unwrap();
        let analytic = g.grad(t).unwrap().to_vec();

        for i in 0..n {
            let mut f = |x: &[f64]| -> f64 {
                match which {
                    "leaky_relu" => oracle::leaky_relu(x, slope).iter().sum(),
                    _ => oracle::sigmoid(x).iter().sum(),
                }
            };
            let numeric = central_diff(&mut f, &mut x, i);
            max_err = max_err.max(rel_err(analytic[i] as f64, numeric));
            checks += 1;
        }
    }
    OpReport {
        name: which,
        instances,
        checks,
        max_rel_err: max_err,
    }
}

fn check_bilinear(seed: u64, instances: usize) -> OpReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_err = 0.0f64;
    let mut checks = 0usize;
    for _ in 0..instances {
        let (c, h, w) = (3usize, 5usize, 5usize);
        let (oh, ow) = (rng.gen_range(2..5), rng.gen_range(2..5));
        let npix = oh * ow;
        let mut source: Vec<f64> = (0..c * h * w).map(|_| rng.gen_range(0.0..1.0)).collect();
        // sample positions away from exact texel centers (gradient kinks)
        let coords: Vec<f64> = (0..2 * npix)
            .map(|i| {
                let lim = if i < npix { h - 1 } else { w - 1 };
                rng.gen_range(0..lim) as f64 + rng.gen_range(0.1..0.9)
            })
            .collect();
        let valid: Vec<f64> = (0..npix).map(|_| f64::from(rng.gen_bool(0.8))).collect();

        let mut g = Graph::new();
        let ts = g.leaf_with_grad(&to_f32(&source), &[c, h, w]);
        let tc = g.leaf(&to_f32(&coords), &[2, oh, ow]);
        let tv = g.leaf(&to_f32(&valid), &[oh, ow]);
        let (out, _) = g.bilinear_sample(ts, tc, tv).unwrap();
        let loss = g.sum(out);
        g.backward(loss).unwrap();
        let analytic = g.grad(ts).unwrap().to_vec();

        for i in 0..source.len() {
            let mut f = |x: &[f64]| -> f64 {
                oracle::bilinear(x, &coords, &valid, c, h, w, npix).iter().sum()
            };
            let numeric = central_diff(&mut f, &mut source, i);
            max_err = max_err.max(rel_err(analytic[i] as f64, numeric));
            checks += 1;
        }
    }
    OpReport {
        name: "bilinear_sample",
        instances,
        checks,
        max_rel_err: max_err,
    }
}

fn check_losses(seed: u64, instances: usize, which: &'static str) -> OpReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_err = 0.0f64;
    let mut checks = 0usize;
    for _ in 0..instances {
        let npix = rng.gen_range(6..30);
        let mask: Vec<f64> = (0..npix).map(|_| f64::from(rng.gen_bool(0.7))).collect();
        if which == "masked_bce_loss" {
            let mut scores: Vec<f64> = (0..npix).map(|_| rng.gen_range(0.05..0.95)).collect();
            let label = f64::from(rng.gen_bool(0.5));
            let mut g = Graph::new();
            let ts = g.leaf_with_grad(&to_f32(&scores), &[npix]);
            let tm = g.leaf(&to_f32(&mask), &[npix]);
            let (loss, _) = g.masked_bce_loss(ts, label as f32, tm).unwrap();
            g.backward(loss).unwrap();
            let analytic = g.grad(ts).unwrap().to_vec();
            for i in 0..npix {
                let mut f = |x: &[f64]| oracle::masked_bce(x, label, &mask);
                let numeric = central_diff(&mut f, &mut scores, i);
                max_err = max_err.max(rel_err(analytic[i] as f64, numeric));
                checks += 1;
            }
        } else {
            let channels = 3usize;
            // keep |a - b| away from 0 so the subgradient kink is avoided
            let target: Vec<f64> = (0..channels * npix).map(|_| rng.gen_range(0.0..1.0)).collect();
            let mut a: Vec<f64> = target
                .iter()
                .map(|&t| {
                    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                    t + sign * rng.gen_range(0.05..0.4)
                })
                .collect();
            let mut g = Graph::new();
            let ta = g.leaf_with_grad(&to_f32(&a), &[channels, npix]);
            let tt = g.leaf(&to_f32(&target), &[channels, npix]);
            let tm = g.leaf(&to_f32(&mask), &[npix]);
            let (loss, _) = g.l1_loss(ta, tt, tm).unwrap();
            g.backward(loss).unwrap();
            let analytic = g.grad(ta).unwrap().to_vec();
            for i in 0..a.len() {
                let mut f = |x: &[f64]| oracle::masked_l1(x, &target, &mask, channels);
                let numeric = central_diff(&mut f, &mut a, i);
                max_err = max_err.max(rel_err(analytic[i] as f64, numeric));
                checks += 1;
            }
        }
    }
    OpReport {
        name: which,
        instances,
        checks,
        max_rel_err: max_err,
    }
}

/// Channel plan for the composite check: the production stack's structure
/// (residual-concat entry, five 4x4 conv blocks, strides (2,2,2,1,1),
/// leaky ReLU / sigmoid gates, masked BCE) at reduced channel widths so the
/// scalar f64 oracle stays fast. Width coverage comes from the conv2d
/// check; this one verifies the composition.
const COMPOSITE_CHANNELS: [usize; 6] = [6, 8, 10, 12, 14, 1];

/// The discriminator composition, gradient-checked at a reduced spatial
/// size with sampled coordinates per tensor. A finite difference that
/// straddles a leaky-ReLU kink is not an estimate of the derivative, so
/// each coordinate is measured at two step sizes and skipped when they
/// disagree (the bracket is not smooth there).
fn check_discriminator_composite(seed: u64, instances: usize) -> OpReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_err = 0.0f64;
    let mut checks = 0usize;
    let mut skipped = 0usize;
    let (h, w) = (32usize, 32usize);
    let strides = disc::STRIDES;

    for inst in 0..instances {
        let mut init_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1000 + inst as u64));
        // tensors: [candidate, w1, b1, ..., w5, b5] as f64
        let mut shapes: Vec<Vec<usize>> = vec![vec![3, h, w]];
        for b in 0..5 {
            let (c_in, c_out) = (COMPOSITE_CHANNELS[b], COMPOSITE_CHANNELS[b + 1]);
            shapes.push(vec![c_out, c_in, 4, 4]);
            shapes.push(vec![c_out]);
        }
        let mut tensors: Vec<Vec<f64>> = shapes
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let n: usize = s.iter().product();
                let scale = if i == 0 { 1.0 } else { 0.15 };
                (0..n).map(|_| init_rng.gen_range(-scale..scale)).collect()
            })
            .collect();
        let condition: Vec<f64> = (0..3 * h * w).map(|_| rng.gen_range(0.0..1.0)).collect();
        let label = 1.0f64;
        let (mut h5, mut w5) = (h, w);
        for s in strides {
            h5 = (h5 + 2 - 4) / s + 1;
            w5 = (w5 + 2 - 4) / s + 1;
        }
        let mask: Vec<f64> = (0..h5 * w5).map(|_| f64::from(rng.gen_bool(0.85))).collect();

        // analytic gradients from the graph
        let mut g = Graph::new();
        let cond_id = g.leaf(&to_f32(&condition), &[3, h, w]);
        let cand_id = g.leaf_with_grad(&to_f32(&tensors[0]), &[3, h, w]);
        let residual = g.sub(cand_id, cond_id).unwrap();
        let mut x = g.concat_channels(cond_id, residual).unwrap();
        let mut ids = vec![cand_id];
        for b in 0..5 {
            let tw = g.leaf_with_grad(&to_f32(&tensors[1 + 2 * b]), &shapes[1 + 2 * b]);
            let tb = g.leaf_with_grad(&to_f32(&tensors[2 + 2 * b]), &shapes[2 + 2 * b]);
            ids.push(tw);
            ids.push(tb);
            x = g.conv2d(x, tw, tb, strides[b], 1).unwrap();
            if b + 1 < 5 {
                x = g.leaky_relu(x, disc::LEAKY_SLOPE).unwrap();
            }
        }
        let tm = g.leaf(&to_f32(&mask), &[h5 * w5]);
        let (loss, _) = g.masked_bce_with_logits(x, label as f32, tm).unwrap();
        g.backward(loss).unwrap();
        let analytic: Vec<Vec<f32>> = ids
            .iter()
            .map(|&id| g.grad(id).map(|s| s.to_vec()).unwrap_or_default())
            .collect();

        // f64 oracle of the whole composition over the tensor list
        let oracle_forward = |tensors: &[Vec<f64>]| -> f64 {
            let cand = &tensors[0];
            let mut x: Vec<f64> = Vec::with_capacity(6 * h * w);
            x.extend_from_slice(&condition);
            for (cv, dv) in cand.iter().zip(&condition) {
                x.push(cv - dv);
            }
            let (mut ch, mut hh, mut ww) = (6usize, h, w);
            for b in 0..5 {
                let c_out = COMPOSITE_CHANNELS[b + 1];
                x = oracle::conv2d(
                    &x,
                    &tensors[1 + 2 * b],
                    &tensors[2 + 2 * b],
                    ch,
                    hh,
                    ww,
                    c_out,
                    4,
                    4,
                    strides[b],
                    1,
                );
                hh = (hh + 2 - 4) / strides[b] + 1;
                ww = (ww + 2 - 4) / strides[b] + 1;
                ch = c_out;
                if b + 1 < 5 {
                    x = oracle::leaky_relu(&x, disc::LEAKY_SLOPE as f64);
                }
            }
            oracle::masked_bce_logits(&x, label, &mask)
        };

        // sampled coordinates per tensor, two step sizes
        for t in 0..tensors.len() {
            let n = tensors[t].len();
            for _ in 0..4 {
                let i = rng.gen_range(0..n);
                let orig = tensors[t][i];
                let mut fd = |eps: f64| {
                    tensors[t][i] = orig + eps;
                    let fp = oracle_forward(&tensors);
                    tensors[t][i] = orig - eps;
                    let fm = oracle_forward(&tensors);
                    tensors[t][i] = orig;
                    (fp - fm) / (2.0 * eps)
                };
                let d1 = fd(FD_EPS);
                let d2 = fd(FD_EPS / 2.0);
                if (d1 - d2).abs() > 1e-3 * d1.abs().max(d2.abs()).max(1e-4) {
                    skipped += 1; // non-smooth bracket (activation kink)
                    continue;
                }
                // the half-step bracket is less likely to contain a kink
                max_err = max_err.max(rel_err(analytic[t][i] as f64, d2));
                checks += 1;
            }
        }
    }
    assert!(
        skipped * 5 < checks,
        "too many kink-skipped coordinates: {skipped} of {}",
        checks + skipped
    );
    OpReport {
        name: "discriminator_composite",
        instances,
        checks,
        max_rel_err: max_err,
    }
}

/// Runs the whole gradient suite: every differentiable op plus the
/// discriminator composition, `instances` randomized instances each.
pub fn run_gradient_suite(seed: u64, instances: usize) -> Vec<OpReport> {
    vec![
        check_conv2d(seed, instances),
        check_elementwise(seed.wrapping_add(1), instances, "leaky_relu"),
        check_elementwise(seed.wrapping_add(2), instances, "sigmoid"),
        check_bilinear(seed.wrapping_add(3), instances),
        check_losses(seed.wrapping_add(4), instances, "masked_bce_loss"),
        check_losses(seed.wrapping_add(5), instances, "l1_loss"),
        check_discriminator_composite(seed.wrapping_add(6), instances),
    ]
}
