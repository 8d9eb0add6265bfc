//! Camera JSON: {fx, fy, cx, cy, width, height, cam_to_world: 16 row-major
//! floats}. Loading validates intrinsics and rotation orthonormality.

use crate::error::{Error, Result};
use crate::geom::camera::Camera;
use crate::geom::math::Pose;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
pub struct CameraFile {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub cam_to_world: Vec<f64>,
}

impl CameraFile {
    pub fn from_camera(cam: &Camera) -> CameraFile {
        CameraFile {
            fx: cam.fx,
            fy: cam.fy,
            cx: cam.cx,
            cy: cam.cy,
            width: cam.width,
            height: cam.height,
            cam_to_world: cam.cam_to_world.to_row_major_4x4().to_vec(),
        }
    }

    pub fn into_camera(self, path: &Path) -> Result<Camera> {
        if self.cam_to_world.len() != 16 {
            return Err(Error::Json {
                path: path.to_path_buf(),
                detail: format!(
                    "cam_to_world must have 16 entries, found {}",
                    self.cam_to_world.len()
                ),
            });
        }
        let mut m = [0.0f64; 16];
        m.copy_from_slice(&self.cam_to_world);
        for (i, expect) in [(12usize, 0.0), (13, 0.0), (14, 0.0), (15, 1.0)] {
            if (m[i] - expect).abs() > 1e-9 {
                return Err(Error::InvalidCamera(format!(
                    "cam_to_world bottom row must be [0 0 0 1], entry {i} is {}",
                    m[i]
                )));
            }
        }
        let cam = Camera {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            width: self.width,
            height: self.height,
            cam_to_world: Pose::from_row_major_4x4(&m),
        };
        cam.validate()?;
        Ok(cam)
    }
}

pub fn write_camera_json(path: &Path, cam: &Camera) -> Result<()> {
    let text = serde_json::to_string_pretty(&CameraFile::from_camera(cam)).map_err(|e| {
        Error::Json {
            path: path.to_path_buf(),
            detail: e.to_string(),
        }
    })?;
    super::write_file(path, text.as_bytes())
}

pub fn read_camera_json(path: &Path) -> Result<Camera> {
    let bytes = super::read_file(path)?;
    let file: CameraFile = serde_json::from_slice(&bytes).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    file.into_camera(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::camera::Intrinsics;
    use crate::geom::math::{vec3, Vec3};

    #[test]
    fn camera_roundtrips_losslessly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cam.json");
        let cam = Camera::look_at(Intrinsics::square(64, 55.0), vec3(1.0, 2.0, 3.0), Vec3::ZERO);
        write_camera_json(&path, &cam).unwrap();
        let back = read_camera_json(&path).unwrap();
        assert_eq!(cam.fx, back.fx);
        assert_eq!(cam.width, back.width);
        for (a, b) in cam
            .cam_to_world
            .to_row_major_4x4()
            .iter()
            .zip(back.cam_to_world.to_row_major_4x4())
        {
            assert_eq!(*a, b);
        }
    }

    #[test]
    fn non_orthonormal_rotation_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cam.json");
        let mut cam = Camera::look_at(Intrinsics::square(64, 55.0), vec3(0.0, 2.0, 1.0), Vec3::ZERO);
        cam.cam_to_world.rotation.rows[0][0] += 1e-2;
        let text = serde_json::to_string(&CameraFile::from_camera(&cam)).unwrap();
        std::fs::write(&path, text).unwrap();
        let err = read_camera_json(&path).unwrap_err();
        assert!(err.to_string().contains("orthonormal"), "{err}");
    }

    #[test]
    fn malformed_json_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cam.json");
        std::fs::write(&path, "{\"fx\": 1.0").unwrap();
        assert!(read_camera_json(&path).is_err());
    }
}
