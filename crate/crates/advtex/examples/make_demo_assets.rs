//! Writes demo inputs for the CLI walkthrough: a procedural ground-truth
//! pattern PNG and a UV-mapped sphere OBJ.
//!
//! Usage: cargo run --release -p advtex --example make_demo_assets -- OUTDIR [SIZE] [SEED]

use std::path::Path;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let out = args.get(1).map(String::as_str).unwrap_or("demo_assets");
    let size: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(128);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(42);

    let dir = Path::new(out);
    std::fs::create_dir_all(dir).unwrap();
    let pattern = advtex::synth::test_pattern(size, seed);
    advtex::io::write_png(&dir.join("pattern.png"), &pattern).unwrap();
    let sphere = advtex::synth::uv_sphere(24, 32, 0.6);
    advtex::io::write_obj(&dir.join("sphere.obj"), &sphere).unwrap();
    println!("wrote pattern.png ({size}x{size}) and sphere.obj to {out}/");
}
