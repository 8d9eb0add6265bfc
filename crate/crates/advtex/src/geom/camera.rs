//! Pinhole camera: intrinsics plus a rigid camera-to-world pose.

use super::math::{vec3, Pose, Vec3};
use crate::error::{Error, Result};

/// Tolerance for the rotation orthonormality check.
pub const ROTATION_TOLERANCE: f64 = 1e-5;

/// Pinhole camera. Looks down +z in its own frame (x right, y down);
/// pixel (u, v) = (fx*x/z + cx, fy*y/z + cy) in continuous image
/// coordinates, where the center of array cell (row j, col i) sits at
/// (i + 0.5, j + 0.5).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub cam_to_world: Pose,
}

impl Camera {
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidCamera(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidCamera(format!(
                "zero image size {}x{}",
                self.width, self.height
            )));
        }
        let err = self.cam_to_world.rotation.orthonormality_error();
        if err > ROTATION_TOLERANCE {
            return Err(Error::InvalidCamera(format!(
                "rotation is not orthonormal with det +1 (error {err:.2e} > {ROTATION_TOLERANCE:.0e})"
            )));
        }
        Ok(())
    }

    /// Projects a camera-space point to continuous pixel coordinates.
    pub fn project(&self, point_cam: Vec3) -> Result<[f64; 2]> {
        if point_cam.z <= 0.0 {
            return Err(Error::BehindCamera { z: point_cam.z });
        }
        Ok([
            self.fx * point_cam.x / point_cam.z + self.cx,
            self.fy * point_cam.y / point_cam.z + self.cy,
        ])
    }

    /// Lifts a pixel at the given depth back to camera space; the result has
    /// z equal to `depth` exactly.
    pub fn unproject(&self, pixel: [f64; 2], depth: f64) -> Result<Vec3> {
        if depth <= 0.0 {
            return Err(Error::InvalidDepth { depth });
        }
        Ok(vec3(
            (pixel[0] - self.cx) / self.fx * depth,
            (pixel[1] - self.cy) / self.fy * depth,
            depth,
        ))
    }

    pub fn world_to_cam(&self) -> Pose {
        self.cam_to_world.inverse()
    }

    /// Camera at `eye` looking at `target`. The up reference is world +z,
    /// switching to +x when the view direction is within 1 degree of ±z
    /// (avoids the degenerate pole).
    pub fn look_at(intr: Intrinsics, eye: Vec3, target: Vec3) -> Camera {
        let forward = (target - eye).normalized();
        let z_axis = vec3(0.0, 0.0, 1.0);
        let cos_limit = (1.0f64.to_radians()).cos();
        let up_ref = if forward.dot(z_axis).abs() > cos_limit {
            vec3(1.0, 0.0, 0.0)
        } else {
            z_axis
        };
        // x right, y down, z forward
        let right = forward.cross(up_ref).normalized();
        let down = forward.cross(right).normalized();
        let rotation = super::math::Mat3::from_cols(right, down, forward);
        Camera {
            fx: intr.fx,
            fy: intr.fy,
            cx: intr.cx,
            cy: intr.cy,
            width: intr.width,
            height: intr.height,
            cam_to_world: Pose::new(rotation, eye),
        }
    }
}

/// Intrinsics bundle for constructing cameras.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    /// Square image with the given horizontal field of view in degrees.
    pub fn square(size: usize, fov_deg: f64) -> Intrinsics {
        let f = 0.5 * size as f64 / (0.5 * fov_deg.to_radians()).tan();
        Intrinsics {
            fx: f,
            fy: f,
            cx: size as f64 / 2.0,
            cy: size as f64 / 2.0,
            width: size,
            height: size,
        }
    }
}
