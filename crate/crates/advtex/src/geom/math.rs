//! Minimal 3D vector/matrix types for the camera and mesh code.
//!
//! Geometry runs in f64; image payloads stay f32. Only what the pipeline
//! needs: no projective matrices, no quaternions.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

pub const fn vec3(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3 { x, y, z }
}

impl Vec3 {
    pub const ZERO: Vec3 = vec3(0.0, 0.0, 0.0);

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        vec3(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        if n == 0.0 {
            Vec3::ZERO
        } else {
            self * (1.0 / n)
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Vec3 {
        vec3(a[0], a[1], a[2])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        vec3(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        vec3(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        vec3(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        vec3(-self.x, -self.y, -self.z)
    }
}

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3 {
    pub rows: [[f64; 3]; 3],
}

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3 {
        rows: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    pub fn from_rows(r0: [f64; 3], r1: [f64; 3], r2: [f64; 3]) -> Mat3 {
        Mat3 { rows: [r0, r1, r2] }
    }

    /// Columns as vectors (the frame axes of a rotation).
    pub fn from_cols(c0: Vec3, c1: Vec3, c2: Vec3) -> Mat3 {
        Mat3 {
            rows: [
                [c0.x, c1.x, c2.x],
                [c0.y, c1.y, c2.y],
                [c0.z, c1.z, c2.z],
            ],
        }
    }

    pub fn transpose(&self) -> Mat3 {
        let r = &self.rows;
        Mat3::from_rows(
            [r[0][0], r[1][0], r[2][0]],
            [r[0][1], r[1][1], r[2][1]],
            [r[0][2], r[1][2], r[2][2]],
        )
    }

    pub fn det(&self) -> f64 {
        let r = &self.rows;
        r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        let r = &self.rows;
        vec3(
            r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
        )
    }

    pub fn matmul(&self, o: &Mat3) -> Mat3 {
        let mut rows = [[0.0; 3]; 3];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.rows[i][k] * o.rows[k][j]).sum();
            }
        }
        Mat3 { rows }
    }

    /// Max deviation from orthonormality: |R^T R - I| entrywise, plus
    /// |det - 1|.
    pub fn orthonormality_error(&self) -> f64 {
        let rtr = self.transpose().matmul(self);
        let mut err: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((rtr.rows[i][j] - target).abs());
            }
        }
        err.max((self.det() - 1.0).abs())
    }

    /// Intrinsic XYZ Euler rotation: R = Rx(ax) * Ry(ay) * Rz(az).
    pub fn from_euler_xyz(ax: f64, ay: f64, az: f64) -> Mat3 {
        let rx = Mat3::from_rows(
            [1.0, 0.0, 0.0],
            [0.0, ax.cos(), -ax.sin()],
            [0.0, ax.sin(), ax.cos()],
        );
        let ry = Mat3::from_rows(
            [ay.cos(), 0.0, ay.sin()],
            [0.0, 1.0, 0.0],
            [-ay.sin(), 0.0, ay.cos()],
        );
        let rz = Mat3::from_rows(
            [az.cos(), -az.sin(), 0.0],
            [az.sin(), az.cos(), 0.0],
            [0.0, 0.0, 1.0],
        );
        rx.matmul(&ry).matmul(&rz)
    }
}

/// Rigid transform (rotation + translation), used for camera-to-world poses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        rotation: Mat3::IDENTITY,
        translation: Vec3::ZERO,
    };

    pub fn new(rotation: Mat3, translation: Vec3) -> Pose {
        Pose {
            rotation,
            translation,
        }
    }

    pub fn transform_point(&self, p: Vec3) -> Vec3 {
        self.rotation.apply(p) + self.translation
    }

    /// Inverse of a rigid transform: (R, t)^-1 = (R^T, -R^T t).
    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -rt.apply(self.translation),
        }
    }

    /// `self` after `other`: (self * other)(p) = self(other(p)).
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation.matmul(&other.rotation),
            translation: self.rotation.apply(other.translation) + self.translation,
        }
    }

    /// Row-major 4x4 flattening with an implicit [0 0 0 1] last row.
    pub fn to_row_major_4x4(&self) -> [f64; 16] {
        let r = &self.rotation.rows;
        let t = self.translation;
        [
            r[0][0], r[0][1], r[0][2], t.x, //
            r[1][0], r[1][1], r[1][2], t.y, //
            r[2][0], r[2][1], r[2][2], t.z, //
            0.0, 0.0, 0.0, 1.0,
        ]
    }

    pub fn from_row_major_4x4(m: &[f64; 16]) -> Pose {
        Pose {
            rotation: Mat3::from_rows(
                [m[0], m[1], m[2]],
                [m[4], m[5], m[6]],
                [m[8], m[9], m[10]],
            ),
            translation: vec3(m[3], m[7], m[11]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pose_inverse_roundtrip() {
        let r = Mat3::from_euler_xyz(0.3, -0.8, 1.1);
        let p = Pose::new(r, vec3(1.0, -2.0, 0.5));
        let q = p.compose(&p.inverse());
        for (a, b) in q.to_row_major_4x4().iter().zip(Pose::IDENTITY.to_row_major_4x4()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn euler_rotations_are_orthonormal() {
        for &(a, b, c) in &[(0.0, 0.0, 0.0), (0.5, 1.2, -0.7), (-3.0, 0.1, 2.9)] {
            let r = Mat3::from_euler_xyz(a, b, c);
            assert!(r.orthonormality_error() < 1e-12);
        }
    }

    #[test]
    fn pose_4x4_roundtrip() {
        let p = Pose::new(Mat3::from_euler_xyz(0.2, 0.4, 0.6), vec3(3.0, 2.0, 1.0));
        let q = Pose::from_row_major_4x4(&p.to_row_major_4x4());
        assert_eq!(p, q);
    }
}
