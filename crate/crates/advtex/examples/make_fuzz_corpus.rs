//! Writes the seed corpus for the fuzz targets.

use advtex::geom::camera::{Camera, Intrinsics};
use advtex::geom::vec3;
use std::fs;
use std::path::Path;

fn main() {
    let root = Path::new("fuzz/corpus");

    // obj: a textured quad and a tiny strip
    let obj_dir = root.join("fuzz_obj");
    fs::create_dir_all(&obj_dir).unwrap();
    fs::write(
        obj_dir.join("quad.obj"),
        "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 1 1\nvt 0 1\nvn 0 0 1\nf 1/1/1 2/2/1 3/3/1 4/4/1\n",
    )
    .unwrap();
    fs::write(
        obj_dir.join("tri.obj"),
        "# comment\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n",
    )
    .unwrap();
    let sphere = advtex::synth::uv_sphere(4, 6, 1.0);
    advtex::io::write_obj(&obj_dir.join("sphere.obj"), &sphere).unwrap();

    // camera json
    let cam_dir = root.join("fuzz_camera_json");
    fs::create_dir_all(&cam_dir).unwrap();
    let cam = Camera::look_at(Intrinsics::square(64, 60.0), vec3(1.0, 2.0, 1.5), vec3(0.0, 0.0, 0.0));
    advtex::io::write_camera_json(&cam_dir.join("camera.json"), &cam).unwrap();

    // depth plane
    let depth_dir = root.join("fuzz_depth_plane");
    fs::create_dir_all(&depth_dir).unwrap();
    advtex::io::write_depth(&depth_dir.join("depth.f32"), &[0.0, 1.5, 2.25, 0.75], 2, 2).unwrap();

    // uv plane
    let uv_dir = root.join("fuzz_uv_plane");
    fs::create_dir_all(&uv_dir).unwrap();
    advtex::io::write_uv(
        &uv_dir.join("uv.f32"),
        &[0.0, 0.5, 1.0, 0.25, 0.1, 0.2, 0.3, 0.4],
        &[1, 0, 1, 1],
        2,
        2,
    )
    .unwrap();

    // tensor container: a discriminator-checkpoint-shaped file, downsized
    let t_dir = root.join("fuzz_tensor_container");
    fs::create_dir_all(&t_dir).unwrap();
    advtex::io::write_tensors(
        &t_dir.join("tensors.attn"),
        &[(&[2, 3][..], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0][..]), (&[2][..], &[0.5, -0.5][..])],
    )
    .unwrap();

    // manifest: real 2d manifest
    let m_dir = root.join("fuzz_manifest");
    fs::create_dir_all(&m_dir).unwrap();
    let tmp = tempfile_dir();
    let gt = advtex::synth::test_pattern(16, 3);
    let obs = advtex::synth::make_2d_dataset(&gt, 2, 2, 0).unwrap();
    advtex::io::save_2d_dataset(&tmp, &obs, Some(&gt), 0).unwrap();
    fs::copy(tmp.join("meta.json"), m_dir.join("meta.json")).unwrap();
    fs::remove_dir_all(&tmp).ok();

    println!("corpus written under {}", root.display());
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("advtex-corpus-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
