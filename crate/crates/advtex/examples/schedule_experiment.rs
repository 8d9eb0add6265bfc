//! Tests lambda-schedule scaling on the desk-scale 2D experiment.
//! Usage: schedule_experiment STEPS LAMBDA_INTERVAL [OUT_PNG]

use advtex::io::Image;
use advtex::metrics;
use advtex::optim::{self, OptimConfig, OptimInput};
use advtex::render::TextureState;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let steps: usize = args[1].parse().unwrap();
    let interval: usize = args[2].parse().unwrap();

    let gt = advtex::synth::test_pattern(128, 4242);
    let observations: Vec<Image> = advtex::synth::make_2d_dataset(&gt, 8, 8, 0)
        .unwrap()
        .into_iter()
        .map(|(img, _)| img)
        .collect();
    let input = OptimInput::TwoD {
        observations: &observations,
    };
    let config = OptimConfig {
        total_steps: steps,
        texture_size: 128,
        seed: 0,
        lambda_interval: interval,
        snapshot_interval: 1000,
        ..OptimConfig::default()
    };
    let t0 = std::time::Instant::now();
    let mut observer = |snap: optim::Snapshot| {
        eprintln!(
            "step {:>6} lambda {:.4} L1 {:.4} G {:.3} Dr {:.3} Df {:.3} [{:.0?}]",
            snap.step,
            snap.row.lambda,
            snap.row.loss_l1,
            snap.row.loss_g_adv,
            snap.row.loss_d_real,
            snap.row.loss_d_fake,
            t0.elapsed()
        );
    };
    let (texture, _) = optim::optimize_texture(&input, &config, Some(&mut observer)).unwrap();
    let to_image = |t: &TextureState| Image::from_planes(t.size, t.size, t.image.data.clone());
    let img = to_image(&texture);
    if let Some(out) = args.get(3) {
        advtex::io::write_png(std::path::Path::new(out), &img).unwrap();
    }
    let nearest = metrics::nearest_patch_loss(&img, &gt, 7, 12).unwrap();
    let exact = metrics::exact_patch_loss(&img, &gt, 7).unwrap();
    let gi = metrics::gradient_intensity(&img);
    println!("steps={steps} interval={interval}: nearest={nearest:.4} exact={exact:.4} gradint={gi:.4}");
}
