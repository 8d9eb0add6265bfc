//! Compares optimizer variants on the desk-scale 2D experiment at reduced
//! step counts. Usage: variant_experiment STEPS BETA1_TEX BETA1_DISC OUT_PNG

use advtex::disc;
use advtex::io::Image;
use advtex::metrics;
use advtex::optim::{self, OptimConfig, OptimInput, StepDiagnostics};
use advtex::render::{clamp_texture, TextureState};
use advtex::tensor::{AdamState, Graph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let steps: usize = args[1].parse().unwrap();
    let beta1_tex: f32 = args[2].parse().unwrap();
    let beta1_disc: f32 = args[3].parse().unwrap();

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
        ..OptimConfig::default()
    };
    let views = optim::prepare_views(&input, true).unwrap();

    let mut texture = TextureState::new(128);
    texture.adam = AdamState::new(config.lr_texture, texture.image.len()).with_betas(beta1_tex, 0.999);
    let mut d = disc::init_discriminator(6, config.seed).unwrap();
    for b in &mut d.blocks {
        b.weight_adam = AdamState::new(config.lr_discriminator, b.weight.len()).with_betas(beta1_disc, 0.999);
        b.bias_adam = AdamState::new(config.lr_discriminator, b.bias.len()).with_betas(beta1_disc, 0.999);
    }
    let _ = clamp_texture;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut g = Graph::new();
    let n = observations.len();
    let t0 = std::time::Instant::now();
    for step in 0..steps {
        let si = rng.gen_range(0..n);
        let mut ai = rng.gen_range(0..n - 1);
        if ai >= si {
            ai += 1;
        }
        let mut diag = StepDiagnostics::default();
        optim::discriminator_step(&mut g, &texture, &mut d, &input, &views, si, ai, &config, &mut diag).unwrap();
        optim::texture_step(&mut g, &mut texture, Some(&d), &input, &views, si, step, &config, &mut diag).unwrap();
        if (step + 1) % 1000 == 0 {
            eprintln!(
                "step {:>6} L1 {:.4} G {:.3} Dr {:.3} Df {:.3} [{:.0?}]",
                step + 1, diag.loss_l1, diag.loss_g_adv, diag.loss_d_real, diag.loss_d_fake, t0.elapsed()
            );
        }
    }
    let img = Image::from_planes(128, 128, texture.image.data.clone());
    if let Some(out) = args.get(4) {
        advtex::io::write_png(std::path::Path::new(out), &img).unwrap();
    }
    let nearest = metrics::nearest_patch_loss(&img, &gt, 7, 12).unwrap();
    let exact = metrics::exact_patch_loss(&img, &gt, 7).unwrap();
    let gi = metrics::gradient_intensity(&img);
    println!(
        "steps={steps} beta1_tex={beta1_tex} beta1_disc={beta1_disc}: nearest={nearest:.4} exact={exact:.4} gradint={gi:.4}"
    );
}
