//! Minimal misalignment-tolerance check: two observations of a step-edge
//! pattern shifted apart; the adversarial texture should converge near ONE
//! of them (sharp) instead of their mean (blurred ramp).
//!
//! Usage: minimal_two_obs STEPS [SHIFT] [SIZE]

use advtex::io::Image;
use advtex::optim::{self, OptimConfig, OptimInput};

fn stripes(size: usize, phase: i32, period: usize) -> Image {
    let mut img = Image::zeros(size, size);
    let npix = size * size;
    for y in 0..size {
        for x in 0..size {
            let v = if ((x as i32 + phase).rem_euclid(period as i32) as usize) < period / 2 {
                0.9
            } else {
                0.1
            };
            let p = y * size + x;
            img.data[p] = v;
            img.data[npix + p] = v;
            img.data[2 * npix + p] = v;
        }
    }
    img
}

fn mean_abs(a: &Image, b: &Image) -> f64 {
    a.data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y).abs() as f64)
        .sum::<f64>()
        / a.data.len() as f64
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let steps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3000);
    let shift: i32 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(3);
    let size: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(70);

    let period = 20usize;
    let obs_a = stripes(size, shift, period);
    let obs_b = stripes(size, -shift, period);
    let mean = {
        let mut m = obs_a.clone();
        for (v, w) in m.data.iter_mut().zip(&obs_b.data) {
            *v = (*v + w) / 2.0;
        }
        m
    };
    let observations = vec![obs_a.clone(), obs_b.clone()];
    let input = OptimInput::TwoD {
        observations: &observations,
    };
    let config = OptimConfig {
        total_steps: steps,
        texture_size: size,
        seed: 1,
        snapshot_interval: 500,
        ..OptimConfig::default()
    };
    let t0 = std::time::Instant::now();
    let mut observer = |snap: optim::Snapshot| {
        let img = Image::from_planes(size, size, snap.texture.image.data.clone());
        eprintln!(
            "step {:>6} lambda {:.3} | dist A {:.4}  B {:.4}  mean {:.4} | L1 {:.4} G {:.3} Dr {:.3} Df {:.3} [{:.0?}]",
            snap.step,
            snap.row.lambda,
            mean_abs(&img, &obs_a),
            mean_abs(&img, &obs_b),
            mean_abs(&img, &mean),
            snap.row.loss_l1,
            snap.row.loss_g_adv,
            snap.row.loss_d_real,
            snap.row.loss_d_fake,
            t0.elapsed()
        );
    };
    let (texture, _) = optim::optimize_texture(&input, &config, Some(&mut observer)).unwrap();
    let img = Image::from_planes(size, size, texture.image.data.clone());
    println!(
        "final: dist_to_A={:.4} dist_to_B={:.4} dist_to_mean={:.4}",
        mean_abs(&img, &obs_a),
        mean_abs(&img, &obs_b),
        mean_abs(&img, &mean)
    );
    if let Some(out) = args.get(4) {
        advtex::io::write_png(std::path::Path::new(out), &img).unwrap();
    }
}
