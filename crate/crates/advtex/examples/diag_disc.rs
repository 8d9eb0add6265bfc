//! Diagnoses discriminator training health on the minimal 2-observation
//! problem: weight norms, logit ranges, gradient magnitudes per step.

use advtex::disc;
use advtex::io::Image;
use advtex::optim::{self, OptimConfig, OptimInput, StepDiagnostics};
use advtex::render::TextureState;
use advtex::tensor::Graph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

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

fn main() {
    let size = 70usize;
    let observations = vec![stripes(size, 3, 20), stripes(size, -3, 20)];
    let input = OptimInput::TwoD {
        observations: &observations,
    };
    let config = OptimConfig {
        total_steps: 1200,
        texture_size: size,
        seed: 1,
        ..OptimConfig::default()
    };
    let views = optim::prepare_views(&input, true).unwrap();
    let mut d = disc::init_discriminator(6, config.seed).unwrap();
    d.set_learning_rate(config.lr_discriminator);
    let mut texture = TextureState::new(size);
    texture.adam.learning_rate = config.lr_texture;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut g = Graph::new();

    for step in 0..config.total_steps {
        let si = rng.gen_range(0..2);
        let ai = 1 - si;
        let mut diag = StepDiagnostics::default();
        optim::discriminator_step(&mut g, &texture, &mut d, &input, &views, si, ai, &config, &mut diag).unwrap();
        // gradient norms collected BEFORE adam cleared them are gone; re-probe below
        optim::texture_step(&mut g, &mut texture, Some(&d), &input, &views, si, step, &config, &mut diag).unwrap();

        if step % 100 == 0 || step < 5 {
            // probe: fresh forward of real and fake logits
            g.clear();
            let handles = d.attach(&mut g, true);
            let vd = &views[si];
            let cond = g.leaf(&vd.condition, &[3, size, size]);
            let tex_leaf = g.leaf_param(&texture.image, true);
            let fake_logits = d.forward_logits(&mut g, &handles, cond, tex_leaf).unwrap();
            let aux = g.leaf(&views[ai].color, &[3, size, size]);
            let real_logits = d.forward_logits(&mut g, &handles, cond, aux).unwrap();
            let stats = |v: &[f32]| {
                let (mut lo, mut hi, mut s) = (f32::MAX, f32::MIN, 0.0f64);
                for &x in v {
                    lo = lo.min(x);
                    hi = hi.max(x);
                    s += x as f64;
                }
                (lo, hi, s / v.len() as f64)
            };
            let (flo, fhi, fmean) = stats(g.data(fake_logits));
            let (rlo, rhi, rmean) = stats(g.data(real_logits));
            let wnorms: Vec<f32> = d
                .blocks
                .iter()
                .map(|b| (b.weight.data.iter().map(|v| v * v).sum::<f32>()).sqrt())
                .collect();
            println!(
                "step {step:>5} Dr {:.3} Df {:.3} G {:.3} | fake z [{flo:.2},{fhi:.2}] mean {fmean:.2} | real z [{rlo:.2},{rhi:.2}] mean {rmean:.2} | |w| {:?}",
                diag.loss_d_real, diag.loss_d_fake, diag.loss_g_adv, wnorms
            );
        }
    }
}
