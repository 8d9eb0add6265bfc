//! Splits texture-vs-ground-truth error into flat-interior and near-edge
//! pixels, to localize where an optimization run disagrees.

use advtex::io;
use std::path::Path;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let gen = io::read_png(Path::new(&args[1])).unwrap();
    let gt = io::read_png(Path::new(&args[2])).unwrap();
    let margin: i32 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(9);
    let (w, h) = (gt.width, gt.height);
    let npix = w * h;

    // edge map of gt: strong local contrast
    let mut edge = vec![false; npix];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let mut g = 0.0f32;
            for ch in 0..3 {
                let gx = gt.get(ch, x + 1, y) - gt.get(ch, x - 1, y);
                let gy = gt.get(ch, x, y + 1) - gt.get(ch, x, y - 1);
                g += gx.abs() + gy.abs();
            }
            if g > 0.15 {
                edge[y * w + x] = true;
            }
        }
    }
    // dilate by the shift margin
    let mut near_edge = vec![false; npix];
    for y in 0..h as i32 {
        for x in 0..w as i32 {
            'scan: for dy in -margin..=margin {
                for dx in -margin..=margin {
                    let (sx, sy) = (x + dx, y + dy);
                    if sx >= 0 && sy >= 0 && (sx as usize) < w && (sy as usize) < h
                        && edge[sy as usize * w + sx as usize]
                    {
                        near_edge[y as usize * w + x as usize] = true;
                        break 'scan;
                    }
                }
            }
        }
    }

    let (mut flat_err, mut flat_n, mut edge_err, mut edge_n) = (0.0f64, 0usize, 0.0f64, 0usize);
    for p in 0..npix {
        let mut e = 0.0f64;
        for ch in 0..3 {
            e += (gen.data[ch * npix + p] - gt.data[ch * npix + p]).abs() as f64;
        }
        if near_edge[p] {
            edge_err += e;
            edge_n += 1;
        } else {
            flat_err += e;
            flat_n += 1;
        }
    }
    println!(
        "near-edge pixels: {} ({}%), mean |err| = {:.4}",
        edge_n,
        100 * edge_n / npix,
        edge_err / edge_n.max(1) as f64 / 3.0
    );
    println!(
        "flat pixels:      {} ({}%), mean |err| = {:.4}",
        flat_n,
        100 * flat_n / npix,
        flat_err / flat_n.max(1) as f64 / 3.0
    );
}
