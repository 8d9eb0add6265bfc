//! Times backward-pass building blocks at the B2/B4 shapes (128x128 input).

use advtex::tensor::gemm::{gemm_nn, gemm_nt, gemm_tn};
use std::time::Instant;

fn time<F: FnMut()>(label: &str, flops: f64, mut f: F) {
    let reps = (2e9 / flops).ceil().clamp(2.0, 50.0) as usize;
    for _ in 0..2 { f(); }
    let t = Instant::now();
    for _ in 0..reps { f(); }
    let dt = t.elapsed().as_secs_f64() / reps as f64;
    println!("{label:<32} {:.2} ms  ({:.1} GFLOP/s)", dt * 1e3, flops / dt / 1e9);
}

fn main() {
    // B4 backward shapes: c_out=512, k=4096, npix=225
    let (m, k, n) = (512usize, 4096usize, 225usize);
    let delta = vec![0.1f32; m * n];
    let cols = vec![0.2f32; k * n];
    let w = vec![0.3f32; m * k];
    let mut dw = vec![0.0f32; m * k];
    let mut dcols = vec![0.0f32; k * n];
    let fl = 2.0 * (m * k * n) as f64;
    time("B4 fwd gemm_nn (512x4096x225)", fl, || {
        let mut out = vec![0.0f32; m * n];
        gemm_nn(&mut out, &w, &cols, m, k, n);
    });
    time("B4 dW gemm_nt (512x225x4096)", fl, || {
        dw.fill(0.0);
        gemm_nt(&mut dw, &delta, &cols, m, n, k);
    });
    time("B4 dIn gemm_tn (4096x512x225)", fl, || {
        dcols.fill(0.0);
        gemm_tn(&mut dcols, &w, &delta, k, m, n);
    });

    // B2 shapes: c_out=128, k=1024, npix=1024
    let (m, k, n) = (128usize, 1024usize, 1024usize);
    let delta = vec![0.1f32; m * n];
    let cols = vec![0.2f32; k * n];
    let w = vec![0.3f32; m * k];
    let mut dw = vec![0.0f32; m * k];
    let mut dcols = vec![0.0f32; k * n];
    let fl = 2.0 * (m * k * n) as f64;
    time("B2 fwd gemm_nn (128x1024x1024)", fl, || {
        let mut out = vec![0.0f32; m * n];
        gemm_nn(&mut out, &w, &cols, m, k, n);
    });
    time("B2 dW gemm_nt (128x1024x1024)", fl, || {
        dw.fill(0.0);
        gemm_nt(&mut dw, &delta, &cols, m, n, k);
    });
    time("B2 dIn gemm_tn (1024x128x1024)", fl, || {
        dcols.fill(0.0);
        gemm_tn(&mut dcols, &w, &delta, k, m, n);
    });

    // im2col / col2im at B2 (c_in=64, 64x64 -> 32x32) and B4
    let (c_in, h, w2) = (64usize, 64usize, 64usize);
    let input = vec![0.5f32; c_in * h * w2];
    let oh = (h + 2 - 4) / 2 + 1;
    let mut cols2 = vec![0.0f32; c_in * 16 * oh * oh];
    time("B2 im2col", (c_in * 16 * oh * oh) as f64, || {
        advtex::tensor::conv::im2col(&mut cols2, &input, c_in, h, w2, 4, 4, 2, 1);
    });
    let mut dinput = vec![0.0f32; c_in * h * w2];
    time("B2 col2im", (c_in * 16 * oh * oh) as f64, || {
        dinput.fill(0.0);
        advtex::tensor::conv::col2im(&mut dinput, &cols2, c_in, h, w2, 4, 4, 2, 1);
    });
    let (c_in, h, w4) = (256usize, 16usize, 16usize);
    let input = vec![0.5f32; c_in * h * w4];
    let oh = h + 2 - 4 + 1;
    let mut cols4 = vec![0.0f32; c_in * 16 * oh * oh];
    time("B4 im2col", (c_in * 16 * oh * oh) as f64, || {
        advtex::tensor::conv::im2col(&mut cols4, &input, c_in, h, w4, 4, 4, 1, 1);
    });
    let mut dinput = vec![0.0f32; c_in * h * w4];
    time("B4 col2im", (c_in * 16 * oh * oh) as f64, || {
        dinput.fill(0.0);
        advtex::tensor::conv::col2im(&mut dinput, &cols4, c_in, h, w4, 4, 4, 1, 1);
    });
}
