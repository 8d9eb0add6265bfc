//! Differentiable texture-to-view rendering.
//!
//! A view's precomputed UV map makes rendering a fixed bilinear sampling of
//! the texture image, so gradients of any image-space loss flow straight
//! into the texels that produced each pixel.

use crate::error::{Error, Result};
use crate::geom::ViewSample;
use crate::tensor::{AdamState, Graph, Param, TensorId};

/// Default texture learning rate.
pub const LEARNING_RATE: f32 = 1e-3;

/// The optimized texture image [3,S,S] with its Adam state. Values are held
/// in [0,1] by clamping after each optimizer step; initialization is all
/// zeros.
pub struct TextureState {
    pub image: Param,
    pub adam: AdamState,
    pub size: usize,
}

impl TextureState {
    pub fn new(size: usize) -> TextureState {
        let image = Param::zeros(&[3, size, size]);
        TextureState {
            adam: AdamState::new(LEARNING_RATE, image.len()),
            image,
            size,
        }
    }

    /// UV (0,0) maps to texel center (0,0) and (1,1) to (S-1,S-1).
    pub fn uv_to_texel_scale(&self) -> f32 {
        (self.size - 1) as f32
    }
}

/// Renders the texture into the view through its cached UV map. Returns the
/// rendered [3,H,W] node (gradients reach the texture leaf `texture_id`)
/// and the render-validity mask, which is the UV map's validity.
pub fn render_texture(
    g: &mut Graph,
    texture: &TextureState,
    texture_id: TensorId,
    view: &ViewSample,
) -> Result<(TensorId, Vec<u8>)> {
    let npix = view.pixel_count();
    if view.uv.len() != 2 * npix || view.uv_valid.len() != npix {
        return Err(Error::invalid_argument(
            "render_texture",
            "view has no usable uv_map".to_string(),
        ));
    }
    let scale = texture.uv_to_texel_scale();
    // uv planes are (u, v) = (x, y); sampling coords are (row, col)
    let mut coords = vec![0.0f32; 2 * npix];
    for p in 0..npix {
        coords[p] = view.uv[npix + p] * scale; // row from v
        coords[npix + p] = view.uv[p] * scale; // col from u
    }
    let validity: Vec<f32> = view.uv_valid.iter().map(|&v| f32::from(v)).collect();

    let (h, w) = (view.height(), view.width());
    let coords_id = g.leaf(&coords, &[2, h, w]);
    let valid_id = g.leaf(&validity, &[h, w]);
    let (out, _oob) = g.bilinear_sample(texture_id, coords_id, valid_id)?;
    Ok((out, view.uv_valid.clone()))
}

/// Clamps the texture image to [0,1]; call after each optimizer step.
pub fn clamp_texture(texture: &mut TextureState) {
    for v in &mut texture.image.data {
        *v = v.clamp(0.0, 1.0);
    }
}
