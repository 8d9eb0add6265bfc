//! Dataset directories and their manifest.
//!
//! Layout: `meta.json` at the root, per-view files under `views/`
//! (`NNNN.color.png`, and for 3D sets `NNNN.depth.f32`, `NNNN.uv.f32`,
//! `NNNN.camera.json`), optional `ground_truth/` with the true texture and
//! cameras. The foreground mask of a view is the UV validity plane (a pixel
//! is foreground exactly when a ray through it hits the reconstructed
//! geometry). Loading is read-only and validates that every referenced file
//! exists with the declared dimensions.

use super::{camera_json, plane, png_io, Image};
use crate::error::{Error, Result};
use crate::geom::{Camera, ViewSample};
use crate::synth::{GroundTruth3d, PerturbationSpec};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetMode {
    TwoD,
    ThreeD,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViewPaths {
    pub color: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uv: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub camera: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruthPaths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub texture: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cameras: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub mode: DatasetMode,
    pub view_count: usize,
    pub image_width: usize,
    pub image_height: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub texture_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_z: Option<f64>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offsets: Option<Vec<[i32; 2]>>,
    pub views: Vec<ViewPaths>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruthPaths>,
}

/// A dataset loaded into memory.
#[derive(Debug)]
pub enum Dataset {
    TwoD {
        manifest: Manifest,
        observations: Vec<Image>,
        offsets: Vec<[i32; 2]>,
        ground_truth: Option<Image>,
    },
    ThreeD {
        manifest: Manifest,
        views: Vec<ViewSample>,
        ground_truth_texture: Option<Image>,
        ground_truth_cameras: Option<Vec<Camera>>,
    },
}

impl Dataset {
    pub fn manifest(&self) -> &Manifest {
        match self {
            Dataset::TwoD { manifest, .. } => manifest,
            Dataset::ThreeD { manifest, .. } => manifest,
        }
    }
}

fn json_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Json {
        path: path.to_path_buf(),
        detail: e.to_string(),
    }
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<PathBuf> {
    let path = dir.join("meta.json");
    let text = serde_json::to_string_pretty(manifest).map_err(|e| json_err(&path, e))?;
    super::write_file(&path, text.as_bytes())?;
    Ok(path)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("meta.json");
    let bytes = super::read_file(&path)?;
    serde_json::from_slice(&bytes).map_err(|e| json_err(&path, e))
}

/// Writes a 2D micro-translation dataset.
pub fn save_2d_dataset(
    dir: &Path,
    observations: &[(Image, [i32; 2])],
    ground_truth: Option<&Image>,
    seed: u64,
) -> Result<()> {
    let (w, h) = observations
        .first()
        .map(|(img, _)| (img.width, img.height))
        .ok_or_else(|| Error::InvalidDataset("no observations".into()))?;
    let mut views = Vec::new();
    for (i, (img, _)) in observations.iter().enumerate() {
        let rel = format!("views/{i:04}.color.png");
        png_io::write_png(&dir.join(&rel), img)?;
        views.push(ViewPaths {
            color: rel,
            depth: None,
            uv: None,
            camera: None,
        });
    }
    let ground_truth_paths = match ground_truth {
        Some(img) => {
            let rel = "ground_truth/original.png".to_string();
            png_io::write_png(&dir.join(&rel), img)?;
            Some(GroundTruthPaths {
                texture: None,
                cameras: None,
                image: Some(rel),
            })
        }
        None => None,
    };
    let manifest = Manifest {
        mode: DatasetMode::TwoD,
        view_count: observations.len(),
        image_width: w,
        image_height: h,
        texture_size: None,
        theta_z: None,
        seed,
        perturbation: None,
        offsets: Some(observations.iter().map(|(_, o)| *o).collect()),
        views,
        ground_truth: ground_truth_paths,
    };
    write_manifest(dir, &manifest)?;
    Ok(())
}

/// Writes a 3D virtual-scan dataset.
pub fn save_3d_dataset(
    dir: &Path,
    views: &[ViewSample],
    ground_truth: Option<&GroundTruth3d>,
    texture_size: usize,
    theta_z: f64,
    perturbation: &PerturbationSpec,
) -> Result<()> {
    let (w, h) = views
        .first()
        .map(|v| (v.width(), v.height()))
        .ok_or_else(|| Error::InvalidDataset("no views".into()))?;
    let mut view_paths = Vec::new();
    for (i, view) in views.iter().enumerate() {
        let color_rel = format!("views/{i:04}.color.png");
        let depth_rel = format!("views/{i:04}.depth.f32");
        let uv_rel = format!("views/{i:04}.uv.f32");
        let cam_rel = format!("views/{i:04}.camera.json");
        let img = Image::from_planes(w, h, view.color.clone());
        png_io::write_png(&dir.join(&color_rel), &img)?;
        plane::write_depth(&dir.join(&depth_rel), &view.depth, w, h)?;
        plane::write_uv(&dir.join(&uv_rel), &view.uv, &view.uv_valid, w, h)?;
        camera_json::write_camera_json(&dir.join(&cam_rel), &view.camera)?;
        view_paths.push(ViewPaths {
            color: color_rel,
            depth: Some(depth_rel),
            uv: Some(uv_rel),
            camera: Some(cam_rel),
        });
    }
    let ground_truth_paths = match ground_truth {
        Some(gt) => {
            let tex_rel = "ground_truth/texture.png".to_string();
            png_io::write_png(&dir.join(&tex_rel), &gt.texture)?;
            let cams_rel = "ground_truth/cameras.json".to_string();
            let cams: Vec<camera_json::CameraFile> =
                gt.cameras.iter().map(camera_json::CameraFile::from_camera).collect();
            let path = dir.join(&cams_rel);
            let text = serde_json::to_string_pretty(&cams).map_err(|e| json_err(&path, e))?;
            super::write_file(&path, text.as_bytes())?;
            Some(GroundTruthPaths {
                texture: Some(tex_rel),
                cameras: Some(cams_rel),
                image: None,
            })
        }
        None => None,
    };
    let manifest = Manifest {
        mode: DatasetMode::ThreeD,
        view_count: views.len(),
        image_width: w,
        image_height: h,
        texture_size: Some(texture_size),
        theta_z: Some(theta_z),
        seed: perturbation.seed,
        perturbation: Some(*perturbation),
        offsets: None,
        views: view_paths,
        ground_truth: ground_truth_paths,
    };
    write_manifest(dir, &manifest)?;
    Ok(())
}

/// Loads a dataset directory, validating sizes against the manifest.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest = read_manifest(dir)?;
    if manifest.views.len() != manifest.view_count {
        return Err(Error::InvalidDataset(format!(
            "manifest declares {} views but lists {}",
            manifest.view_count,
            manifest.views.len()
        )));
    }
    let (w, h) = (manifest.image_width, manifest.image_height);
    match manifest.mode {
        DatasetMode::TwoD => {
            let mut observations = Vec::with_capacity(manifest.views.len());
            for v in &manifest.views {
                let img = png_io::read_png(&dir.join(&v.color))?;
                if img.width != w || img.height != h {
                    return Err(Error::InvalidDataset(format!(
                        "{} is {}x{}, manifest declares {}x{}",
                        v.color, img.width, img.height, w, h
                    )));
                }
                observations.push(img);
            }
            let offsets = manifest.offsets.clone().ok_or_else(|| {
                Error::InvalidDataset("2d dataset manifest lacks offsets".into())
            })?;
            if offsets.len() != observations.len() {
                return Err(Error::InvalidDataset(format!(
                    "{} offsets for {} observations",
                    offsets.len(),
                    observations.len()
                )));
            }
            let ground_truth = manifest
                .ground_truth
                .as_ref()
                .and_then(|g| g.image.as_ref())
                .map(|rel| png_io::read_png(&dir.join(rel)))
                .transpose()?;
            Ok(Dataset::TwoD {
                manifest,
                observations,
                offsets,
                ground_truth,
            })
        }
        DatasetMode::ThreeD => {
            let mut views = Vec::with_capacity(manifest.views.len());
            for v in &manifest.views {
                let color = png_io::read_png(&dir.join(&v.color))?;
                let missing = |what: &str| {
                    Error::InvalidDataset(format!("3d view lacks a {what} file: {}", v.color))
                };
                let depth_rel = v.depth.as_ref().ok_or_else(|| missing("depth"))?;
                let uv_rel = v.uv.as_ref().ok_or_else(|| missing("uv"))?;
                let cam_rel = v.camera.as_ref().ok_or_else(|| missing("camera"))?;
                let (depth, dw, dh) = plane::read_depth(&dir.join(depth_rel))?;
                let (uv, uv_valid, uw, uh) = plane::read_uv(&dir.join(uv_rel))?;
                let camera = camera_json::read_camera_json(&dir.join(cam_rel))?;
                for (name, (aw, ah)) in [
                    ("color", (color.width, color.height)),
                    ("depth", (dw, dh)),
                    ("uv", (uw, uh)),
                    ("camera", (camera.width, camera.height)),
                ] {
                    if (aw, ah) != (w, h) {
                        return Err(Error::InvalidDataset(format!(
                            "{name} of {} is {aw}x{ah}, manifest declares {w}x{h}",
                            v.color
                        )));
                    }
                }
                let view = ViewSample {
                    color: color.data,
                    depth,
                    foreground: uv_valid.clone(),
                    camera,
                    uv,
                    uv_valid,
                };
                view.validate()?;
                views.push(view);
            }
            let mut ground_truth_texture = None;
            let mut ground_truth_cameras = None;
            if let Some(gt) = &manifest.ground_truth {
                if let Some(rel) = &gt.texture {
                    ground_truth_texture = Some(png_io::read_png(&dir.join(rel))?);
                }
                if let Some(rel) = &gt.cameras {
                    let path = dir.join(rel);
                    let bytes = super::read_file(&path)?;
                    let files: Vec<camera_json::CameraFile> =
                        serde_json::from_slice(&bytes).map_err(|e| json_err(&path, e))?;
                    ground_truth_cameras = Some(
                        files
                            .into_iter()
                            .map(|f| f.into_camera(&path))
                            .collect::<Result<Vec<_>>>()?,
                    );
                }
            }
            Ok(Dataset::ThreeD {
                manifest,
                views,
                ground_truth_texture,
                ground_truth_cameras,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::math::Vec3;
    use crate::geom::Intrinsics;
    use crate::synth;

    fn checker(size: usize) -> Image {
        let mut img = Image::zeros(size, size);
        for y in 0..size {
            for x in 0..size {
                let v = if (x / 4 + y / 4) % 2 == 0 { 0.9 } else { 0.1 };
                img.set(0, x, y, v);
                img.set(1, x, y, 1.0 - v);
                img.set(2, x, y, 0.5);
            }
        }
        img
    }

    #[test]
    fn two_d_dataset_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let gt = checker(32);
        let obs = synth::make_2d_dataset(&gt, 4, 4, 11).unwrap();
        save_2d_dataset(dir.path(), &obs, Some(&gt), 11).unwrap();
        let loaded = load_dataset(dir.path()).unwrap();
        match loaded {
            Dataset::TwoD {
                observations,
                offsets,
                ground_truth,
                manifest,
            } => {
                assert_eq!(observations.len(), 4);
                assert_eq!(offsets, obs.iter().map(|(_, o)| *o).collect::<Vec<_>>());
                assert!(ground_truth.is_some());
                assert_eq!(manifest.seed, 11);
                // png is 8-bit: equality within one level
                for ((a, _), b) in obs.iter().zip(&observations) {
                    for (x, y) in a.data.iter().zip(&b.data) {
                        assert!((x - y).abs() <= 1.0 / 255.0 + 1e-6);
                    }
                }
            }
            _ => panic!("expected 2d dataset"),
        }
    }

    #[test]
    fn three_d_dataset_roundtrips_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = synth::uv_sphere(8, 12, 0.5);
        let texture = checker(32);
        let intr = Intrinsics::square(48, 60.0);
        let views: Vec<_> = synth::sample_hemisphere_views(0, 2.0, Vec3::ZERO, intr)
            .into_iter()
            .take(3)
            .collect();
        let spec = synth::PerturbationSpec::from_severity(2.0, 5);
        let (samples, gt) = synth::make_3d_dataset(&mesh, &texture, &views, &spec).unwrap();
        save_3d_dataset(dir.path(), &samples, Some(&gt), 32, 0.03, &spec).unwrap();

        let loaded = load_dataset(dir.path()).unwrap();
        match loaded {
            Dataset::ThreeD {
                views: loaded_views,
                ground_truth_texture,
                ground_truth_cameras,
                manifest,
            } => {
                assert_eq!(loaded_views.len(), 3);
                assert_eq!(manifest.theta_z, Some(0.03));
                assert!(ground_truth_texture.is_some());
                assert_eq!(ground_truth_cameras.unwrap().len(), 3);
                for (a, b) in samples.iter().zip(&loaded_views) {
                    // depth and uv are bit-exact containers
                    assert_eq!(a.depth, b.depth);
                    assert_eq!(a.uv, b.uv);
                    assert_eq!(a.uv_valid, b.uv_valid);
                    assert_eq!(a.camera.cam_to_world, b.camera.cam_to_world);
                }
            }
            _ => panic!("expected 3d dataset"),
        }
    }

    #[test]
    fn missing_file_is_a_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let gt = checker(16);
        let obs = synth::make_2d_dataset(&gt, 2, 2, 0).unwrap();
        save_2d_dataset(dir.path(), &obs, None, 0).unwrap();
        std::fs::remove_file(dir.path().join("views/0001.color.png")).unwrap();
        assert!(load_dataset(dir.path()).is_err());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let gt = checker(16);
        let obs = synth::make_2d_dataset(&gt, 2, 2, 0).unwrap();
        save_2d_dataset(dir.path(), &obs, None, 0).unwrap();
        // overwrite one observation with a different size
        png_io::write_png(&dir.path().join("views/0001.color.png"), &checker(8)).unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(err.to_string().contains("manifest declares"), "{err}");
    }
}
