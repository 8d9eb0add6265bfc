//! Synthetic dataset generation with controlled camera/geometry errors.
//!
//! Two families: a 2D micro-translation set (a ground-truth image observed
//! under random integer shifts) and a 3D virtual scan (a textured mesh
//! rendered from hemisphere views, where the optimizer is handed perturbed
//! poses and perturbed geometry while observations come from the true ones).
//!
//! All randomness is ChaCha8 keyed by the dataset seed; per-item streams are
//! derived as (seed, item index) so parallel generation cannot reorder draws.

use crate::error::{Error, Result};
use crate::geom::camera::{Camera, Intrinsics};
use crate::geom::math::{vec3, Mat3, Pose, Vec3};
use crate::geom::mesh::{compute_vertex_normals, laplacian_smooth_scalars, TriMesh};
use crate::geom::raster::rasterize_mesh;
use crate::geom::ViewSample;
use crate::io::Image;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Camera/geometry error bounds for one severity level.
///
/// Derived from a severity exponent n as e_t = 0.01 * 1.5^n meters,
/// e_a = 5 degrees, e_g = 0.02 * 1.5^n meters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PerturbationSpec {
    pub n: f64,
    pub e_t: f64,
    pub e_a_deg: f64,
    pub e_g: f64,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn from_severity(n: f64, seed: u64) -> PerturbationSpec {
        PerturbationSpec {
            n,
            e_t: 0.01 * 1.5f64.powf(n),
            e_a_deg: 5.0,
            e_g: 0.02 * 1.5f64.powf(n),
            seed,
        }
    }

    pub fn zero(seed: u64) -> PerturbationSpec {
        PerturbationSpec {
            n: f64::NEG_INFINITY,
            e_t: 0.0,
            e_a_deg: 0.0,
            e_g: 0.0,
            seed,
        }
    }
}

/// Uniform draw from [-bound, bound]; exact zero when the bound is zero.
fn uniform_sym<R: Rng>(rng: &mut R, bound: f64) -> f64 {
    if bound == 0.0 {
        0.0
    } else {
        rng.gen_range(-bound..=bound)
    }
}

// ── 2D micro-translation dataset ────────────────────────────────────────

/// Observations of `ground_truth` translated by integer offsets drawn
/// uniformly from [-max_shift, max_shift]^2; out-of-frame regions are edge
/// clamped. Offset (dx,dy) means observation pixel (x,y) shows ground-truth
/// pixel (x-dx, y-dy).
pub fn make_2d_dataset(
    ground_truth: &Image,
    num_observations: usize,
    max_shift: i32,
    seed: u64,
) -> Result<Vec<(Image, [i32; 2])>> {
    if num_observations < 2 {
        return Err(Error::invalid_argument(
            "make_2d_dataset",
            format!("need at least 2 observations, got {num_observations}"),
        ));
    }
    if max_shift < 0 {
        return Err(Error::invalid_argument("make_2d_dataset", "max_shift < 0".to_string()));
    }
    let (w, h) = (ground_truth.width, ground_truth.height);
    if (w as i32) < 2 * max_shift || (h as i32) < 2 * max_shift {
        return Err(Error::invalid_argument(
            "make_2d_dataset",
            format!("image {w}x{h} smaller than 2*max_shift = {}", 2 * max_shift),
        ));
    }

    let mut out = Vec::with_capacity(num_observations);
    for i in 0..num_observations {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let dx = if max_shift == 0 { 0 } else { rng.gen_range(-max_shift..=max_shift) };
        let dy = if max_shift == 0 { 0 } else { rng.gen_range(-max_shift..=max_shift) };
        out.push((translate_image(ground_truth, dx, dy), [dx, dy]));
    }
    Ok(out)
}

/// Shifts image content by (dx, dy) with edge clamping.
pub fn translate_image(src: &Image, dx: i32, dy: i32) -> Image {
    let (w, h) = (src.width, src.height);
    let mut out = Image::zeros(w, h);
    let npix = w * h;
    for ch in 0..3 {
        let sp = &src.data[ch * npix..(ch + 1) * npix];
        let op = &mut out.data[ch * npix..(ch + 1) * npix];
        for y in 0..h {
            let sy = (y as i32 - dy).clamp(0, h as i32 - 1) as usize;
            for x in 0..w {
                let sx = (x as i32 - dx).clamp(0, w as i32 - 1) as usize;
                op[y * w + x] = sp[sy * w + sx];
            }
        }
    }
    out
}

// ── Hemisphere view sampling ────────────────────────────────────────────

/// Icosahedron subdivided `level` times, vertices normalized to the unit
/// sphere. Vertex count is 10 * 4^level + 2.
pub fn subdivided_icosphere(level: u32) -> Vec<Vec3> {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ]
    .iter()
    .map(|a| Vec3::from_array(*a).normalized())
    .collect();

    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    use std::collections::HashMap;
    for _ in 0..level {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mid = |a: u32, b: u32, verts: &mut Vec<Vec3>, cache: &mut HashMap<(u32, u32), u32>| {
                let key = (a.min(b), a.max(b));
                *cache.entry(key).or_insert_with(|| {
                    let m = ((verts[a as usize] + verts[b as usize]) * 0.5).normalized();
                    verts.push(m);
                    (verts.len() - 1) as u32
                })
            };
            let ab = mid(f[0], f[1], &mut verts, &mut midpoints);
            let bc = mid(f[1], f[2], &mut verts, &mut midpoints);
            let ca = mid(f[2], f[0], &mut verts, &mut midpoints);
            next.extend_from_slice(&[
                [f[0], ab, ca],
                [f[1], bc, ab],
                [f[2], ca, bc],
                [ab, bc, ca],
            ]);
        }
        faces = next;
    }
    verts
}

/// Cameras on the upper (z >= 0) hemisphere of a subdivided icosahedron,
/// at distance `radius` from `target`, looking at `target`.
pub fn sample_hemisphere_views(
    subdivision_level: u32,
    radius: f64,
    target: Vec3,
    intrinsics: Intrinsics,
) -> Vec<Camera> {
    subdivided_icosphere(subdivision_level)
        .into_iter()
        .filter(|v| v.z >= 0.0)
        .map(|v| Camera::look_at(intrinsics, target + v * radius, target))
        .collect()
}

// ── Perturbations ───────────────────────────────────────────────────────

/// Adds uniform noise in [-e_t, e_t] to each translation component and
/// composes the rotation with an intrinsic-XYZ Euler rotation whose angles
/// are uniform in [-e_a, e_a] degrees. Camera i draws from stream
/// (seed, i): order tx, ty, tz, ax, ay, az.
pub fn perturb_cameras(cameras: &[Camera], e_t: f64, e_a_deg: f64, seed: u64) -> Vec<Camera> {
    cameras
        .iter()
        .enumerate()
        .map(|(i, cam)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let dt = vec3(
                uniform_sym(&mut rng, e_t),
                uniform_sym(&mut rng, e_t),
                uniform_sym(&mut rng, e_t),
            );
            let ax = uniform_sym(&mut rng, e_a_deg).to_radians();
            let ay = uniform_sym(&mut rng, e_a_deg).to_radians();
            let az = uniform_sym(&mut rng, e_a_deg).to_radians();
            let noise = Mat3::from_euler_xyz(ax, ay, az);
            let mut out = *cam;
            out.cam_to_world = Pose::new(
                cam.cam_to_world.rotation.matmul(&noise),
                cam.cam_to_world.translation + dt,
            );
            out
        })
        .collect()
}

/// Displaces each vertex along its normal by a random scalar in
/// [-e_g, e_g], smoothed over the mesh with 3 Laplacian steps.
/// Connectivity and UVs are untouched.
pub fn perturb_geometry(mesh: &TriMesh, e_g: f64, seed: u64) -> Result<TriMesh> {
    if mesh.normals.len() != mesh.positions.len() {
        return Err(Error::InvalidMesh(
            "perturb_geometry requires per-vertex normals".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scalars: Vec<f64> = (0..mesh.positions.len())
        .map(|_| uniform_sym(&mut rng, e_g))
        .collect();
    let smoothed = laplacian_smooth_scalars(&scalars, mesh, 3);
    let mut out = mesh.clone();
    for ((p, n), s) in out.positions.iter_mut().zip(&mesh.normals).zip(&smoothed) {
        let q = Vec3::from_array(*p) + Vec3::from_array(*n) * *s;
        *p = q.to_array();
    }
    Ok(out)
}

// ── 3D virtual scan ─────────────────────────────────────────────────────

/// Ground-truth records kept aside for evaluation only.
pub struct GroundTruth3d {
    pub texture: Image,
    pub cameras: Vec<Camera>,
}

/// Builds the 3D experiment dataset: color observations rendered from the
/// TRUE mesh and TRUE poses; each view's stored camera is the PERTURBED
/// pose, and its depth/uv/foreground maps come from rasterizing the
/// PERTURBED mesh under that perturbed pose - the reconstruction the
/// optimizer is allowed to see.
pub fn make_3d_dataset(
    mesh: &TriMesh,
    texture: &Image,
    views: &[Camera],
    spec: &PerturbationSpec,
) -> Result<(Vec<ViewSample>, GroundTruth3d)> {
    if !mesh.has_uvs() {
        return Err(Error::InvalidMesh("3d dataset requires a UV-mapped mesh".into()));
    }
    if views.is_empty() {
        return Err(Error::invalid_argument("make_3d_dataset", "no views".to_string()));
    }
    if texture.width != texture.height {
        return Err(Error::invalid_argument(
            "make_3d_dataset",
            "texture must be square".to_string(),
        ));
    }

    let mut true_mesh = mesh.clone();
    if true_mesh.normals.len() != true_mesh.positions.len() {
        let (normals, _) = compute_vertex_normals(&true_mesh);
        true_mesh.normals = normals;
    }
    let perturbed_cams = perturb_cameras(views, spec.e_t, spec.e_a_deg, spec.seed);
    let perturbed_mesh = perturb_geometry(&true_mesh, spec.e_g, spec.seed.wrapping_add(1))?;

    let mut samples = Vec::with_capacity(views.len());
    for (true_cam, fake_cam) in views.iter().zip(&perturbed_cams) {
        // observation: true geometry, true pose, true texture
        let true_maps = rasterize_mesh(&true_mesh, true_cam)?;
        let npix = true_cam.width * true_cam.height;
        let mut color = vec![0.0f32; 3 * npix];
        for p in 0..npix {
            if true_maps.mask[p] == 0 {
                continue;
            }
            let (u, v) = (true_maps.uv[p], true_maps.uv[npix + p]);
            let rgb = sample_image_bilinear(texture, u, v);
            color[p] = rgb[0];
            color[npix + p] = rgb[1];
            color[2 * npix + p] = rgb[2];
        }

        // reconstruction: perturbed geometry under the perturbed pose
        let recon = rasterize_mesh(&perturbed_mesh, fake_cam)?;
        samples.push(ViewSample {
            color,
            depth: recon.depth,
            foreground: recon.mask.clone(),
            camera: *fake_cam,
            uv: recon.uv,
            uv_valid: recon.mask,
        });
    }

    Ok((
        samples,
        GroundTruth3d {
            texture: texture.clone(),
            cameras: views.to_vec(),
        },
    ))
}

/// Bilinear lookup of a [0,1]^2 texture coordinate; uv (0,0) is the center
/// of texel (0,0), uv (1,1) the center of the last texel.
pub fn sample_image_bilinear(img: &Image, u: f32, v: f32) -> [f32; 3] {
    let (w, h) = (img.width, img.height);
    let x = (u as f64 * (w - 1) as f64).clamp(0.0, (w - 1) as f64);
    let y = (v as f64 * (h - 1) as f64).clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = ((x - x0 as f64) as f32, (y - y0 as f64) as f32);
    let npix = w * h;
    let mut out = [0.0f32; 3];
    for (ch, o) in out.iter_mut().enumerate() {
        let p = &img.data[ch * npix..(ch + 1) * npix];
        let top = p[y0 * w + x0] + fx * (p[y0 * w + x1] - p[y0 * w + x0]);
        let bot = p[y1 * w + x0] + fx * (p[y1 * w + x1] - p[y1 * w + x0]);
        *o = top + fy * (bot - top);
    }
    out
}

/// A UV sphere with poles along +z, used by the synthetic experiments and
/// tests (the pipeline itself takes meshes from OBJ files).
pub fn uv_sphere(rings: usize, segments: usize, radius: f64) -> TriMesh {
    assert!(rings >= 2 && segments >= 3);
    let mut positions = Vec::new();
    let mut uvs = Vec::new();
    for r in 0..=rings {
        let theta = std::f64::consts::PI * r as f64 / rings as f64;
        for s in 0..=segments {
            let phi = std::f64::consts::TAU * s as f64 / segments as f64;
            positions.push([
                radius * theta.sin() * phi.cos(),
                radius * theta.sin() * phi.sin(),
                radius * theta.cos(),
            ]);
            uvs.push([s as f64 / segments as f64, r as f64 / rings as f64]);
        }
    }
    let stride = segments + 1;
    let mut faces = Vec::new();
    for r in 0..rings {
        for s in 0..segments {
            let a = (r * stride + s) as u32;
            let b = (r * stride + s + 1) as u32;
            let c = ((r + 1) * stride + s) as u32;
            let d = ((r + 1) * stride + s + 1) as u32;
            if r > 0 {
                faces.push([a, b, c]);
            }
            if r + 1 < rings {
                faces.push([b, d, c]);
            }
        }
    }
    let mut mesh = TriMesh {
        positions,
        uvs,
        normals: vec![],
        faces,
    };
    let (normals, _) = compute_vertex_normals(&mesh);
    // poles have degenerate fan normals; point them along +-z
    mesh.normals = normals
        .into_iter()
        .enumerate()
        .map(|(i, n)| {
            if Vec3::from_array(n).norm() == 0.0 {
                let z = mesh.positions[i][2];
                [0.0, 0.0, if z >= 0.0 { 1.0 } else { -1.0 }]
            } else {
                n
            }
        })
        .collect();
    mesh
}

/// Procedural ground-truth pattern for the controlled experiments: a
/// Voronoi mosaic of saturated cells with dark cell borders - piecewise
/// constant with sharp edges, so misalignment blur is clearly measurable.
/// Cell size scales with the image (roughly 40 px across) to keep feature
/// size large against the injected shifts.
pub fn test_pattern(size: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = 6.max(size * size / 1600);
    let sites: Vec<(f32, f32, [f32; 3])> = (0..cells)
        .map(|_| {
            (
                rng.gen_range(0.0..size as f32),
                rng.gen_range(0.0..size as f32),
                [
                    rng.gen_range(0.1..0.95),
                    rng.gen_range(0.1..0.95),
                    rng.gen_range(0.1..0.95),
                ],
            )
        })
        .collect();
    let mut img = Image::zeros(size, size);
    let npix = size * size;
    for y in 0..size {
        for x in 0..size {
            let (mut d1, mut d2, mut color) = (f32::MAX, f32::MAX, [0.0f32; 3]);
            for (sx, sy, c) in &sites {
                let d = (x as f32 - sx).powi(2) + (y as f32 - sy).powi(2);
                if d < d1 {
                    d2 = d1;
                    d1 = d;
                    color = *c;
                } else if d < d2 {
                    d2 = d;
                }
            }
            // dark line where two cells meet
            let border = d2.sqrt() - d1.sqrt() < 1.2;
            let p = y * size + x;
            for ch in 0..3 {
                img.data[ch * npix + p] = if border { 0.05 } else { color[ch] };
            }
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_image(size: usize) -> Image {
        let mut img = Image::zeros(size, size);
        let npix = size * size;
        for j in 0..size {
            for i in 0..size {
                img.data[j * size + i] = i as f32 / size as f32;
                img.data[npix + j * size + i] = j as f32 / size as f32;
                img.data[2 * npix + j * size + i] = ((i + j) % 7) as f32 / 7.0;
            }
        }
        img
    }

    #[test]
    fn zero_shift_reproduces_ground_truth() {
        let gt = ramp_image(16);
        let obs = make_2d_dataset(&gt, 4, 0, 9).unwrap();
        for (img, off) in &obs {
            assert_eq!(*off, [0, 0]);
            assert_eq!(img.data, gt.data);
        }
    }

    #[test]
    fn translation_definition_on_interior() {
        let gt = ramp_image(16);
        let shifted = translate_image(&gt, 2, 0);
        for y in 0..16 {
            for x in 2..16 {
                assert_eq!(
                    shifted.data[y * 16 + x],
                    gt.data[y * 16 + x - 2],
                    "column {x} must come from column {}",
                    x - 2
                );
            }
        }
    }

    #[test]
    fn offsets_respect_bounds_and_seeding() {
        let gt = ramp_image(64);
        let a = make_2d_dataset(&gt, 16, 16, 7).unwrap();
        let b = make_2d_dataset(&gt, 16, 16, 7).unwrap();
        for ((ia, oa), (ib, ob)) in a.iter().zip(&b) {
            assert_eq!(oa, ob);
            assert_eq!(ia.data, ib.data);
            assert!(oa[0].abs() <= 16 && oa[1].abs() <= 16);
        }
        let c = make_2d_dataset(&gt, 16, 16, 8).unwrap();
        assert!(a.iter().zip(&c).any(|((_, oa), (_, oc))| oa != oc));
    }

    #[test]
    fn dataset_rejects_bad_arguments() {
        let gt = ramp_image(16);
        assert!(make_2d_dataset(&gt, 1, 4, 0).is_err());
        assert!(make_2d_dataset(&gt, 4, 9, 0).is_err()); // 16 < 18
    }

    #[test]
    fn icosphere_vertex_counts() {
        for level in 0..5 {
            let verts = subdivided_icosphere(level);
            assert_eq!(verts.len(), 10 * 4usize.pow(level) + 2, "level {level}");
            for v in &verts {
                assert!((v.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn level_zero_hemisphere_keeps_upper_vertices() {
        let intr = Intrinsics::square(32, 60.0);
        let cams = sample_hemisphere_views(0, 2.0, Vec3::ZERO, intr);
        let expected = subdivided_icosphere(0).iter().filter(|v| v.z >= 0.0).count();
        assert_eq!(cams.len(), expected);
        for cam in &cams {
            assert!(cam.cam_to_world.translation.z >= 0.0);
            assert!((cam.cam_to_world.translation.norm() - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn level_four_hemisphere_exceeds_900_views() {
        let intr = Intrinsics::square(32, 60.0);
        let cams = sample_hemisphere_views(4, 2.5, Vec3::ZERO, intr);
        assert!(cams.len() > 900, "got {}", cams.len());
    }

    #[test]
    fn zero_noise_preserves_cameras() {
        let intr = Intrinsics::square(32, 60.0);
        let cams = sample_hemisphere_views(1, 2.0, Vec3::ZERO, intr);
        let out = perturb_cameras(&cams, 0.0, 0.0, 3);
        for (a, b) in cams.iter().zip(&out) {
            assert_eq!(a.cam_to_world, b.cam_to_world);
        }
    }

    #[test]
    fn perturbed_rotations_stay_orthonormal_and_bounded() {
        let intr = Intrinsics::square(32, 60.0);
        let cams = sample_hemisphere_views(1, 2.0, Vec3::ZERO, intr);
        let e_t = 0.01 * 1.5f64.powi(2);
        let out = perturb_cameras(&cams, e_t, 5.0, 11);
        for (a, b) in cams.iter().zip(&out) {
            assert!(b.cam_to_world.rotation.orthonormality_error() < 1e-5);
            let dt = b.cam_to_world.translation - a.cam_to_world.translation;
            assert!(dt.x.abs() <= e_t && dt.y.abs() <= e_t && dt.z.abs() <= e_t);
            // rotation difference stays within the Euler-angle bound: the
            // composed noise rotation has angle <= sum of |euler| <= 3*5 deg
            let rel = a.cam_to_world.rotation.transpose().matmul(&b.cam_to_world.rotation);
            let trace = rel.rows[0][0] + rel.rows[1][1] + rel.rows[2][2];
            let angle = ((trace - 1.0) / 2.0).clamp(-1.0, 1.0).acos().to_degrees();
            assert!(angle <= 15.0 + 1e-9, "noise angle {angle}");
        }
    }

    #[test]
    fn severity_formula_values() {
        let s = PerturbationSpec::from_severity(2.0, 0);
        assert!((s.e_t - 0.0225).abs() < 1e-12);
        let s = PerturbationSpec::from_severity(1.5, 0);
        assert!((s.e_g - 0.02 * 1.5f64.powf(1.5)).abs() < 1e-12);
        assert!((s.e_g - 0.0367).abs() < 1e-3);
    }

    #[test]
    fn zero_displacement_preserves_mesh() {
        let mesh = uv_sphere(8, 12, 1.0);
        let out = perturb_geometry(&mesh, 0.0, 5).unwrap();
        assert_eq!(mesh.positions, out.positions);
        assert_eq!(mesh.uvs, out.uvs);
        assert_eq!(mesh.faces, out.faces);
    }

    #[test]
    fn displacement_bounded_by_e_g() {
        let mesh = uv_sphere(8, 12, 1.0);
        let e_g = 0.05;
        let out = perturb_geometry(&mesh, e_g, 5).unwrap();
        for (a, b) in mesh.positions.iter().zip(&out.positions) {
            let d = (Vec3::from_array(*a) - Vec3::from_array(*b)).norm();
            assert!(d <= e_g + 1e-12, "vertex moved {d} > {e_g}");
        }
        assert_eq!(mesh.faces, out.faces);
        assert_eq!(mesh.uvs, out.uvs);
    }

    #[test]
    fn make_3d_dataset_separates_truth_from_reconstruction() {
        let mesh = uv_sphere(8, 12, 0.5);
        let texture = ramp_image(32);
        let intr = Intrinsics::square(48, 60.0);
        let views: Vec<Camera> = sample_hemisphere_views(0, 2.0, Vec3::ZERO, intr);
        let spec = PerturbationSpec::from_severity(2.0, 13);
        let (samples, gt) = make_3d_dataset(&mesh, &texture, &views, &spec).unwrap();
        assert_eq!(samples.len(), views.len());
        assert_eq!(gt.cameras.len(), views.len());

        let perturbed = perturb_cameras(&views, spec.e_t, spec.e_a_deg, spec.seed);
        for ((sample, true_cam), fake_cam) in samples.iter().zip(&views).zip(&perturbed) {
            // the stored camera is the perturbed one
            assert_eq!(sample.camera.cam_to_world, fake_cam.cam_to_world);
            assert_ne!(sample.camera.cam_to_world, true_cam.cam_to_world);
            // the stored foreground equals the perturbed-mesh coverage
            sample.validate().unwrap();
        }
    }

    #[test]
    fn error_free_dataset_is_self_consistent() {
        let mesh = uv_sphere(10, 14, 0.5);
        let texture = ramp_image(32);
        let intr = Intrinsics::square(48, 60.0);
        let views: Vec<Camera> = sample_hemisphere_views(0, 2.0, Vec3::ZERO, intr)
            .into_iter()
            .take(4)
            .collect();
        let spec = PerturbationSpec::zero(3);
        let (samples, _) = make_3d_dataset(&mesh, &texture, &views, &spec).unwrap();
        // with zero perturbation, re-sampling the ground-truth texture at
        // the cached uvs must reproduce the observed color exactly
        for s in &samples {
            let npix = s.pixel_count();
            for p in 0..npix {
                if s.foreground[p] == 0 {
                    continue;
                }
                let rgb = sample_image_bilinear(&texture, s.uv[p], s.uv[npix + p]);
                for ch in 0..3 {
                    assert!((s.color[ch * npix + p] - rgb[ch]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn dataset_requires_uvs() {
        let mut mesh = uv_sphere(6, 8, 0.5);
        mesh.uvs.clear();
        let texture = ramp_image(16);
        let intr = Intrinsics::square(32, 60.0);
        let views = sample_hemisphere_views(0, 2.0, Vec3::ZERO, intr);
        let spec = PerturbationSpec::zero(0);
        assert!(make_3d_dataset(&mesh, &texture, &views, &spec).is_err());
    }
}
