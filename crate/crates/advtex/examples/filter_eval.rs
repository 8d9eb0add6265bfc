//! Evaluates a texture before/after a mild 3x3 mean filter, to separate
//! per-texel noise from structural misalignment.

use advtex::io::{self, Image};
use advtex::metrics;
use std::path::Path;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let img = io::read_png(Path::new(&args[1])).unwrap();
    let gt = io::read_png(Path::new(&args[2])).unwrap();
    let (w, h) = (img.width, img.height);
    let mut filtered = Image::zeros(w, h);
    for ch in 0..3 {
        for y in 0..h as i32 {
            for x in 0..w as i32 {
                let mut acc = 0.0;
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let sx = (x + dx).clamp(0, w as i32 - 1) as usize;
                        let sy = (y + dy).clamp(0, h as i32 - 1) as usize;
                        acc += img.get(ch, sx, sy);
                    }
                }
                filtered.set(ch, x as usize, y as usize, acc / 9.0);
            }
        }
    }
    for (name, im) in [("raw", &img), ("3x3-mean", &filtered)] {
        let nearest = metrics::nearest_patch_loss(im, &gt, 7, 12).unwrap();
        let exact = metrics::exact_patch_loss(im, &gt, 7).unwrap();
        let gi = metrics::gradient_intensity(im);
        println!("{name}: nearest={nearest:.4} exact={exact:.4} gradint={gi:.4}");
    }
}
