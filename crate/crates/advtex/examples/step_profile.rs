//! Times the pieces of one optimization step at 128x128.

use advtex::disc;
use advtex::io::Image;
use advtex::optim::{self, OptimConfig, OptimInput, StepDiagnostics};
use advtex::render::TextureState;
use advtex::tensor::Graph;
use std::time::Instant;

fn main() {
    let size = 128;
    let mut obs = Vec::new();
    for k in 0..4 {
        let mut img = Image::zeros(size, size);
        for (i, v) in img.data.iter_mut().enumerate() {
            *v = ((i * (k + 3)) % 251) as f32 / 251.0;
        }
        obs.push(img);
    }
    let input = OptimInput::TwoD { observations: &obs };
    let config = OptimConfig {
        texture_size: size,
        ..OptimConfig::default()
    };
    let views = optim::prepare_views(&input, true).unwrap();
    let mut d = disc::init_discriminator(6, 1).unwrap();
    let mut texture = TextureState::new(size);
    let mut g = Graph::new();

    // warmup
    for step in 0..3 {
        let mut diag = StepDiagnostics::default();
        optim::discriminator_step(&mut g, &texture, &mut d, &input, &views, 0, 1, &config, &mut diag).unwrap();
        optim::texture_step(&mut g, &mut texture, Some(&d), &input, &views, 0, step, &config, &mut diag).unwrap();
    }

    let reps = 10;
    let t = Instant::now();
    for step in 0..reps {
        let mut diag = StepDiagnostics::default();
        optim::discriminator_step(&mut g, &texture, &mut d, &input, &views, 0, 1, &config, &mut diag).unwrap();
        optim::texture_step(&mut g, &mut texture, Some(&d), &input, &views, 0, step, &config, &mut diag).unwrap();
    }
    let full = t.elapsed().as_secs_f64() / reps as f64;

    let t = Instant::now();
    for _ in 0..reps {
        let mut diag = StepDiagnostics::default();
        optim::discriminator_step(&mut g, &texture, &mut d, &input, &views, 0, 1, &config, &mut diag).unwrap();
    }
    let d_step = t.elapsed().as_secs_f64() / reps as f64;

    let t = Instant::now();
    for step in 0..reps {
        let mut diag = StepDiagnostics::default();
        optim::texture_step(&mut g, &mut texture, Some(&d), &input, &views, 0, step, &config, &mut diag).unwrap();
    }
    let t_step = t.elapsed().as_secs_f64() / reps as f64;

    // forward only
    let t = Instant::now();
    for _ in 0..reps {
        g.clear();
        let handles = d.attach(&mut g, true);
        let cond = g.leaf(&views[0].condition, &[3, size, size]);
        let cand = g.leaf(&obs[1].data, &[3, size, size]);
        let _ = d.forward(&mut g, &handles, cond, cand).unwrap();
    }
    let fwd = t.elapsed().as_secs_f64() / reps as f64;

    // attach cost alone
    let t = Instant::now();
    for _ in 0..reps {
        g.clear();
        let _ = d.attach(&mut g, true);
    }
    let attach = t.elapsed().as_secs_f64() / reps as f64;

    // adam on all D params
    let t = Instant::now();
    for _ in 0..reps {
        for b in &mut d.blocks {
            b.weight.grad = Some(vec![1e-6; b.weight.len()]);
            b.bias.grad = Some(vec![1e-6; b.bias.len()]);
        }
        d.adam_step_all().unwrap();
    }
    let adam = t.elapsed().as_secs_f64() / reps as f64;

    println!("full step:      {:.1} ms", full * 1e3);
    println!("  disc step:    {:.1} ms", d_step * 1e3);
    println!("  texture step: {:.1} ms", t_step * 1e3);
    println!("  fwd only:     {:.1} ms", fwd * 1e3);
    println!("  attach only:  {:.1} ms", attach * 1e3);
    println!("  adam all:     {:.1} ms", adam * 1e3);
    println!("  est 10k-step run: {:.1} min", full * 10000.0 / 60.0);
}
