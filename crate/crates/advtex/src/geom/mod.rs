//! Cameras, meshes, rasterization, and cross-view reprojection.

pub mod camera;
pub mod math;
pub mod mesh;
pub mod raster;
pub mod reproject;

pub use camera::{Camera, Intrinsics};
pub use math::{vec3, Mat3, Pose, Vec3};
pub use mesh::{compute_vertex_normals, laplacian_smooth_scalars, TriMesh};
pub use raster::{rasterize_mesh, RasterMaps};
pub use reproject::{reproject_view, THETA_Z_OBJECT, THETA_Z_SCENE};

use crate::error::{Error, Result};

/// One observation of the scene: what the camera captured plus the cached
/// per-view maps the optimizer needs (depth, foreground, view-to-texture).
///
/// Image payloads are channel planes, row-major: `color` is 3*h*w
/// (r plane, g plane, b plane), `uv` is 2*h*w (u plane, v plane) in texture
/// coordinates [0,1].
#[derive(Debug, Clone)]
pub struct ViewSample {
    pub color: Vec<f32>,
    pub depth: Vec<f32>,
    pub foreground: Vec<u8>,
    pub camera: Camera,
    pub uv: Vec<f32>,
    pub uv_valid: Vec<u8>,
}

impl ViewSample {
    pub fn width(&self) -> usize {
        self.camera.width
    }

    pub fn height(&self) -> usize {
        self.camera.height
    }

    pub fn pixel_count(&self) -> usize {
        self.camera.width * self.camera.height
    }

    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        let npix = self.pixel_count();
        if self.color.len() != 3 * npix
            || self.depth.len() != npix
            || self.foreground.len() != npix
            || self.uv.len() != 2 * npix
            || self.uv_valid.len() != npix
        {
            return Err(Error::InvalidDataset(format!(
                "view buffers do not match {}x{}",
                self.camera.width, self.camera.height
            )));
        }
        for p in 0..npix {
            if self.foreground[p] != 0 {
                if self.depth[p] <= 0.0 {
                    return Err(Error::InvalidDataset(format!(
                        "foreground pixel {p} has non-positive depth {}",
                        self.depth[p]
                    )));
                }
                if self.uv_valid[p] == 0 {
                    return Err(Error::InvalidDataset(format!(
                        "foreground pixel {p} has no texture coordinates"
                    )));
                }
            }
            if self.uv_valid[p] != 0 {
                let (u, v) = (self.uv[p], self.uv[npix + p]);
                if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidDataset(format!(
                        "uv ({u}, {v}) at pixel {p} outside [0,1]^2"
                    )));
                }
            }
        }
        Ok(())
    }
}
