//! Patch-based evaluation against ground truth.
//!
//! The exact patch loss compares co-centered patches; the nearest patch
//! loss searches a window of reference patch centers and keeps the best
//! match, so content that is realistic but locally shifted is not
//! penalized. Gradient intensity measures sharpness. Pixel values are in
//! [0,1]; per-channel distances combine by root-sum-square. Patches are
//! clipped at image borders; a nearest-search candidate compares over the
//! offsets valid for both centers.

use crate::error::{Error, Result};
use crate::io::Image;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Default evaluation parameters.
pub const DEFAULT_PATCH_SIZE: usize = 7;
pub const DEFAULT_SEARCH_WINDOW: usize = 24;

/// Evaluation summary emitted by the `evaluate` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub exact_patch: f64,
    pub nearest_patch: f64,
    pub gradient_intensity_generated: f64,
    pub gradient_intensity_reference: f64,
    pub patch_size: usize,
    pub search_window: usize,
}

impl MetricReport {
    pub fn compute(
        generated: &Image,
        reference: &Image,
        patch_size: usize,
        search_window: usize,
    ) -> Result<MetricReport> {
        Ok(MetricReport {
            exact_patch: exact_patch_loss(generated, reference, patch_size)?,
            nearest_patch: nearest_patch_loss(generated, reference, patch_size, search_window)?,
            gradient_intensity_generated: gradient_intensity(generated),
            gradient_intensity_reference: gradient_intensity(reference),
            patch_size,
            search_window,
        })
    }

    pub fn table(&self) -> String {
        format!(
            "metric                         value\n\
             exact patch loss               {:.6}\n\
             nearest patch loss             {:.6}\n\
             gradient intensity (generated) {:.6}\n\
             gradient intensity (reference) {:.6}\n\
             patch size                     {}\n\
             search window                  {}\n",
            self.exact_patch,
            self.nearest_patch,
            self.gradient_intensity_generated,
            self.gradient_intensity_reference,
            self.patch_size,
            self.search_window
        )
    }
}

fn check_inputs(generated: &Image, reference: &Image, patch_size: usize) -> Result<()> {
    if generated.width != reference.width || generated.height != reference.height {
        return Err(Error::shape(
            "patch_loss",
            format!(
                "{}x{} vs {}x{}",
                generated.width, generated.height, reference.width, reference.height
            ),
        ));
    }
    if patch_size.is_multiple_of(2) || patch_size == 0 {
        return Err(Error::invalid_argument(
            "patch_loss",
            format!("patch_size {patch_size} must be odd"),
        ));
    }
    Ok(())
}

/// L2 distance between the patches centered at (x, y) in `a` and at
/// (x + sx, y + sy) in `b`, over offsets where both patches are inside
/// their images.
#[allow(clippy::too_many_arguments)]
fn patch_distance(
    a: &Image,
    b: &Image,
    x: usize,
    y: usize,
    sx: isize,
    sy: isize,
    half: isize,
) -> f64 {
    let (w, h) = (a.width as isize, a.height as isize);
    let (x, y) = (x as isize, y as isize);
    let npix = a.pixel_count();
    let mut sum = 0.0f64;
    for dy in -half..=half {
        let ay = y + dy;
        let by = y + sy + dy;
        if ay < 0 || ay >= h || by < 0 || by >= h {
            continue;
        }
        for dx in -half..=half {
            let ax = x + dx;
            let bx = x + sx + dx;
            if ax < 0 || ax >= w || bx < 0 || bx >= w {
                continue;
            }
            let pa = (ay * w + ax) as usize;
            let pb = (by * w + bx) as usize;
            for ch in 0..3 {
                let d = (a.data[ch * npix + pa] - b.data[ch * npix + pb]) as f64;
                sum += d * d;
            }
        }
    }
    sum.sqrt()
}

/// Mean over pixels of the L2 distance between co-centered patches
/// (border patches clipped).
pub fn exact_patch_loss(generated: &Image, reference: &Image, patch_size: usize) -> Result<f64> {
    check_inputs(generated, reference, patch_size)?;
    let half = (patch_size / 2) as isize;
    let (w, h) = (generated.width, generated.height);
    let total: f64 = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut row = 0.0;
            for x in 0..w {
                row += patch_distance(generated, reference, x, y, 0, 0, half);
            }
            row
        })
        .sum();
    Ok(total / (w * h) as f64)
}

/// Mean over pixels of the minimum L2 distance between the generated patch
/// and reference patches centered within +-search_window of its location.
/// The co-centered candidate is always in the search set, so this never
/// exceeds the exact patch loss.
pub fn nearest_patch_loss(
    generated: &Image,
    reference: &Image,
    patch_size: usize,
    search_window: usize,
) -> Result<f64> {
    check_inputs(generated, reference, patch_size)?;
    let half = (patch_size / 2) as isize;
    let win = search_window as isize;
    let (w, h) = (generated.width, generated.height);
    let total: f64 = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut row = 0.0;
            for x in 0..w {
                let mut best = f64::INFINITY;
                for sy in -win..=win {
                    for sx in -win..=win {
                        let cx = x as isize + sx;
                        let cy = y as isize + sy;
                        if cx < 0 || cx >= w as isize || cy < 0 || cy >= h as isize {
                            continue;
                        }
                        let d = patch_distance(generated, reference, x, y, sx, sy, half);
                        if d < best {
                            best = d;
                        }
                    }
                }
                row += best;
            }
            row
        })
        .sum();
    Ok(total / (w * h) as f64)
}

/// Mean over interior pixels and channels of the central-difference
/// gradient magnitude.
pub fn gradient_intensity(img: &Image) -> f64 {
    let (w, h) = (img.width, img.height);
    if w < 3 || h < 3 {
        return 0.0;
    }
    let npix = img.pixel_count();
    let mut total = 0.0f64;
    let mut count = 0usize;
    for ch in 0..3 {
        let plane = &img.data[ch * npix..(ch + 1) * npix];
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let gx = (plane[y * w + x + 1] - plane[y * w + x - 1]) as f64 / 2.0;
                let gy = (plane[(y + 1) * w + x] - plane[(y - 1) * w + x]) as f64 / 2.0;
                total += (gx * gx + gy * gy).sqrt();
                count += 1;
            }
        }
    }
    total / count as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(size: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut img = Image::zeros(size, size);
        for v in &mut img.data {
            *v = rng.gen_range(0.0..1.0);
        }
        img
    }

    #[test]
    fn identical_images_have_zero_losses() {
        let img = random_image(16, 1);
        assert_eq!(exact_patch_loss(&img, &img, 7).unwrap(), 0.0);
        assert_eq!(nearest_patch_loss(&img, &img, 7, 5).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset_gives_analytic_interior_distance() {
        let size = 32;
        let reference = random_image(size, 2);
        let mut generated = reference.clone();
        for v in &mut generated.data {
            *v += 0.1;
        }
        // interior pixels: d = sqrt(49 * 3 * 0.01) = 0.7 * sqrt(3)
        let half = 3isize;
        let expect_interior = (49.0 * 3.0 * 0.01f64).sqrt();
        let loss = exact_patch_loss(&generated, &reference, 7).unwrap();
        // border-clipped patches lower the mean slightly
        assert!(loss <= expect_interior + 1e-9);
        assert!(loss > expect_interior * 0.8, "{loss}");
        // spot-check one interior pixel against the formula
        let d = super::patch_distance(&generated, &reference, 16, 16, 0, 0, half);
        assert!((d - expect_interior).abs() < 1e-4, "{d} vs {expect_interior}");
    }

    #[test]
    fn exact_matches_nested_loop_oracle() {
        let a = random_image(16, 3);
        let b = random_image(16, 4);
        let got = exact_patch_loss(&a, &b, 7).unwrap();
        // oracle: direct per-pixel patch loops
        let npix = 16 * 16;
        let mut total = 0.0f64;
        for y in 0..16isize {
            for x in 0..16isize {
                let mut sum = 0.0f64;
                for dy in -3..=3isize {
                    for dx in -3..=3isize {
                        let (px, py) = (x + dx, y + dy);
                        if px < 0 || px >= 16 || py < 0 || py >= 16 {
                            continue;
                        }
                        let p = (py * 16 + px) as usize;
                        for ch in 0..3 {
                            let d = (a.data[ch * npix + p] - b.data[ch * npix + p]) as f64;
                            sum += d * d;
                        }
                    }
                }
                total += sum.sqrt();
            }
        }
        let oracle = total / npix as f64;
        assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
    }

    #[test]
    fn shifted_copy_recovered_within_window() {
        let reference = random_image(32, 5);
        let generated = crate::synth::translate_image(&reference, 2, 0);
        // with window >= 2, pixels whose shifted patch is fully inside match
        let loss2 = nearest_patch_loss(&generated, &reference, 7, 2).unwrap();
        let loss0 = nearest_patch_loss(&generated, &reference, 7, 0).unwrap();
        assert!(loss0 > 0.05, "zero window must not find the shift: {loss0}");
        assert!(loss2 < loss0 * 0.2, "window 2 must mostly recover: {loss2} vs {loss0}");
        // interior pixel: exactly zero
        let d = super::patch_distance(&generated, &reference, 16, 16, -2, 0, 3);
        assert_eq!(d, 0.0);
    }

    #[test]
    fn nearest_never_exceeds_exact() {
        for seed in 0..3 {
            let a = random_image(20, 100 + seed);
            let b = random_image(20, 200 + seed);
            let exact = exact_patch_loss(&a, &b, 5).unwrap();
            for window in [0usize, 1, 3] {
                let nearest = nearest_patch_loss(&a, &b, 5, window).unwrap();
                assert!(nearest <= exact + 1e-12, "window {window}");
            }
        }
    }

    #[test]
    fn nearest_is_monotone_in_window() {
        let a = random_image(20, 9);
        let b = random_image(20, 10);
        let mut prev = f64::INFINITY;
        for window in [0usize, 1, 2, 4] {
            let v = nearest_patch_loss(&a, &b, 5, window).unwrap();
            assert!(v <= prev + 1e-12);
            prev = v;
        }
    }

    #[test]
    fn gradient_intensity_basics() {
        let flat = Image::zeros(16, 16);
        assert_eq!(gradient_intensity(&flat), 0.0);

        // horizontal ramp with slope s per pixel
        let mut ramp = Image::zeros(16, 16);
        let s = 0.02f32;
        for y in 0..16 {
            for x in 0..16 {
                for ch in 0..3 {
                    ramp.set(ch, x, y, s * x as f32);
                }
            }
        }
        let g = gradient_intensity(&ramp);
        assert!((g - s as f64).abs() < 1e-7, "{g}");
    }

    #[test]
    fn blur_reduces_gradient_intensity() {
        let img = random_image(24, 8);
        let mut blurred = Image::zeros(24, 24);
        for ch in 0..3 {
            for y in 0..24i32 {
                for x in 0..24i32 {
                    let mut acc = 0.0;
                    for dy in -1..=1 {
                        for dx in -1..=1 {
                            let sx = (x + dx).clamp(0, 23) as usize;
                            let sy = (y + dy).clamp(0, 23) as usize;
                            acc += img.get(ch, sx, sy);
                        }
                    }
                    blurred.set(ch, x as usize, y as usize, acc / 9.0);
                }
            }
        }
        assert!(gradient_intensity(&blurred) < gradient_intensity(&img));
    }

    #[test]
    fn channel_permutation_invariance() {
        let a = random_image(12, 30);
        let b = random_image(12, 31);
        let permute = |img: &Image| {
            let npix = img.pixel_count();
            let mut out = img.clone();
            out.data[..npix].copy_from_slice(&img.data[npix..2 * npix]);
            out.data[npix..2 * npix].copy_from_slice(&img.data[2 * npix..]);
            out.data[2 * npix..].copy_from_slice(&img.data[..npix]);
            out
        };
        let before = exact_patch_loss(&a, &b, 5).unwrap();
        let after = exact_patch_loss(&permute(&a), &permute(&b), 5).unwrap();
        assert!((before - after).abs() < 1e-12);
        let before = nearest_patch_loss(&a, &b, 5, 2).unwrap();
        let after = nearest_patch_loss(&permute(&a), &permute(&b), 5, 2).unwrap();
        assert!((before - after).abs() < 1e-12);
    }

    #[test]
    fn exact_patch_loss_is_homogeneous() {
        let size = 12;
        let b = random_image(size, 40);
        let mut diff = random_image(size, 41);
        for v in &mut diff.data {
            *v = (*v - 0.5) * 0.2;
        }
        let make_a = |scale: f32| {
            let mut a = b.clone();
            for (av, dv) in a.data.iter_mut().zip(&diff.data) {
                *av += scale * dv;
            }
            a
        };
        let l1 = exact_patch_loss(&make_a(1.0), &b, 5).unwrap();
        let l2 = exact_patch_loss(&make_a(2.0), &b, 5).unwrap();
        assert!((l2 - 2.0 * l1).abs() < 1e-5, "{l2} vs {}", 2.0 * l1);
    }

    #[test]
    fn size_mismatch_rejected() {
        let a = random_image(8, 0);
        let b = random_image(9, 0);
        assert!(exact_patch_loss(&a, &b, 5).is_err());
        assert!(nearest_patch_loss(&a, &b, 5, 2).is_err());
    }
}
