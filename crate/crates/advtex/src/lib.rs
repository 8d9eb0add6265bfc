//! Adversarial texture optimization for RGB-D scans.
//!
//! Reconstructs sharp color textures for triangle meshes from multi-view
//! color+depth observations whose camera poses and geometry are only
//! approximately known. Instead of averaging misaligned observations (which
//! blurs), the texture is optimized jointly with a learned patch-level
//! discriminator that treats reprojections of other views as real examples,
//! so the objective tolerates the misalignment present in the input data.
//!
//! The crate is organized around the optimization pipeline:
//!
//! - [`tensor`]: dense f32 tensors with reverse-mode autodiff and Adam.
//! - [`disc`]: the conditional patch discriminator (70x70 receptive field).
//! - [`geom`]: cameras, meshes, a software rasterizer, depth reprojection.
//! - [`render`]: differentiable texture-to-view rendering.
//! - [`synth`]: synthetic 2D/3D dataset generation with controlled errors.
//! - [`optim`]: the alternating texture/discriminator optimization loop.
//! - [`metrics`]: patch-based evaluation metrics against ground truth.
//! - [`io`]: on-disk formats (PNG, raw float planes, OBJ, camera JSON).

pub mod disc;
pub mod error;
pub mod geom;
pub mod gradcheck;
pub mod io;
pub mod metrics;
pub mod optim;
pub mod render;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
