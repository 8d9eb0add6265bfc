//! im2col / col2im plumbing for the convolution layers.

/// Output spatial size of a convolution along one axis.
pub fn conv_out_size(input: usize, kernel: usize, stride: usize, padding: usize) -> usize {
    (input + 2 * padding - kernel) / stride + 1
}

/// Valid output range [lo, hi) along one axis for kernel tap `kt`:
/// the positions where `o*stride + kt - padding` lands inside [0, len).
#[inline]
fn tap_range(len: usize, out_len: usize, kt: usize, stride: usize, padding: usize) -> (usize, usize) {
    let lo = if kt >= padding {
        0
    } else {
        (padding - kt).div_ceil(stride)
    };
    // largest o with o*stride + kt - padding <= len - 1
    let hi = if len + padding > kt {
        (((len + padding - kt - 1) / stride) + 1).min(out_len)
    } else {
        0
    };
    (lo.min(out_len), hi)
}

/// Unfolds `input[c_in, h, w]` into `col[c_in*kh*kw, oh*ow]` so that the
/// convolution becomes a single matrix product. Padding taps are written as
/// zero; every cell of `col` is written. Interior spans copy contiguously
/// for stride 1 and gather with a fixed stride otherwise.
#[allow(clippy::too_many_arguments)]
pub fn im2col(
    col: &mut [f32],
    input: &[f32],
    c_in: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: usize,
) {
    let oh = conv_out_size(h, kh, stride, padding);
    let ow = conv_out_size(w, kw, stride, padding);
    debug_assert_eq!(col.len(), c_in * kh * kw * oh * ow);

    for c in 0..c_in {
        let plane = &input[c * h * w..(c + 1) * h * w];
        for ky in 0..kh {
            let (oy_lo, oy_hi) = tap_range(h, oh, ky, stride, padding);
            for kx in 0..kw {
                let row = &mut col[((c * kh + ky) * kw + kx) * oh * ow..][..oh * ow];
                let (ox_lo, ox_hi) = tap_range(w, ow, kx, stride, padding);
                row[..oy_lo * ow].fill(0.0);
                row[oy_hi * ow..].fill(0.0);
                for oy in oy_lo..oy_hi {
                    let iy = oy * stride + ky - padding;
                    let in_row = &plane[iy * w..(iy + 1) * w];
                    let out_row = &mut row[oy * ow..(oy + 1) * ow];
                    out_row[..ox_lo].fill(0.0);
                    out_row[ox_hi..].fill(0.0);
                    if ox_lo >= ox_hi {
                        continue;
                    }
                    let ix0 = ox_lo * stride + kx - padding;
                    if stride == 1 {
                        out_row[ox_lo..ox_hi]
                            .copy_from_slice(&in_row[ix0..ix0 + (ox_hi - ox_lo)]);
                    } else {
                        let src = &in_row[ix0..];
                        for (q, o) in out_row[ox_lo..ox_hi].iter_mut().enumerate() {
                            *o = src[q * stride];
                        }
                    }
                }
            }
        }
    }
}

/// Folds `col[c_in*kh*kw, oh*ow]` back into `dinput[c_in, h, w]`,
/// accumulating overlapping taps. The adjoint scatter of [`im2col`].
#[allow(clippy::too_many_arguments)]
pub fn col2im(
    dinput: &mut [f32],
    col: &[f32],
    c_in: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: usize,
) {
    let oh = conv_out_size(h, kh, stride, padding);
    let ow = conv_out_size(w, kw, stride, padding);
    debug_assert_eq!(col.len(), c_in * kh * kw * oh * ow);
    debug_assert_eq!(dinput.len(), c_in * h * w);

    for c in 0..c_in {
        let plane = &mut dinput[c * h * w..(c + 1) * h * w];
        for ky in 0..kh {
            let (oy_lo, oy_hi) = tap_range(h, oh, ky, stride, padding);
            for kx in 0..kw {
                let row = &col[((c * kh + ky) * kw + kx) * oh * ow..][..oh * ow];
                let (ox_lo, ox_hi) = tap_range(w, ow, kx, stride, padding);
                if ox_lo >= ox_hi {
                    continue;
                }
                for oy in oy_lo..oy_hi {
                    let iy = oy * stride + ky - padding;
                    let in_row = &mut plane[iy * w..(iy + 1) * w];
                    let src = &row[oy * ow..(oy + 1) * ow];
                    let ix0 = ox_lo * stride + kx - padding;
                    if stride == 1 {
                        for (d, s) in in_row[ix0..ix0 + (ox_hi - ox_lo)]
                            .iter_mut()
                            .zip(&src[ox_lo..ox_hi])
                        {
                            *d += s;
                        }
                    } else {
                        for (q, s) in src[ox_lo..ox_hi].iter().enumerate() {
                            in_row[ix0 + q * stride] += s;
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_size_matches_floor_formula() {
        for h in 2..40 {
            for stride in [1usize, 2] {
                let expect = ((h + 2 - 4) as f64 / stride as f64).floor() as usize + 1;
                assert_eq!(conv_out_size(h, 4, stride, 1), expect, "h={h} s={stride}");
            }
        }
    }

    /// Reference unfold with per-element bounds checks.
    #[allow(clippy::too_many_arguments)]
    fn im2col_reference(
        col: &mut [f32],
        input: &[f32],
        c_in: usize,
        h: usize,
        w: usize,
        kh: usize,
        kw: usize,
        stride: usize,
        padding: usize,
    ) {
        let oh = conv_out_size(h, kh, stride, padding);
        let ow = conv_out_size(w, kw, stride, padding);
        for c in 0..c_in {
            for ky in 0..kh {
                for kx in 0..kw {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let iy = (oy * stride + ky) as isize - padding as isize;
                            let ix = (ox * stride + kx) as isize - padding as isize;
                            let v = if iy < 0 || iy >= h as isize || ix < 0 || ix >= w as isize {
                                0.0
                            } else {
                                input[(c * h + iy as usize) * w + ix as usize]
                            };
                            col[(((c * kh + ky) * kw + kx) * oh + oy) * ow + ox] = v;
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn fast_im2col_matches_reference() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for &(c, h, w, s) in &[(2usize, 7usize, 6usize, 2usize), (1, 4, 4, 2), (3, 9, 11, 1), (1, 2, 2, 1)] {
            let input: Vec<f32> = (0..c * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let oh = conv_out_size(h, 4, s, 1);
            let ow = conv_out_size(w, 4, s, 1);
            let mut fast = vec![9.0f32; c * 16 * oh * ow];
            let mut reference = vec![0.0f32; c * 16 * oh * ow];
            im2col(&mut fast, &input, c, h, w, 4, 4, s, 1);
            im2col_reference(&mut reference, &input, c, h, w, 4, 4, s, 1);
            assert_eq!(fast, reference, "c={c} h={h} w={w} s={s}");
        }
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), y> == <x, col2im(y)> for random x, y.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for &(c, h, w, s) in &[(2usize, 7usize, 6usize, 2usize), (2, 10, 9, 1)] {
            let oh = conv_out_size(h, 4, s, 1);
            let ow = conv_out_size(w, 4, s, 1);
            let x: Vec<f32> = (0..c * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f32> = (0..c * 16 * oh * ow).map(|_| rng.gen_range(-1.0..1.0)).collect();

            let mut cx = vec![0.0; c * 16 * oh * ow];
            im2col(&mut cx, &x, c, h, w, 4, 4, s, 1);
            let mut cty = vec![0.0; c * h * w];
            col2im(&mut cty, &y, c, h, w, 4, 4, s, 1);

            let lhs: f64 = cx.iter().zip(&y).map(|(a, b)| (a * b) as f64).sum();
            let rhs: f64 = x.iter().zip(&cty).map(|(a, b)| (a * b) as f64).sum();
            assert!((lhs - rhs).abs() < 1e-3, "{lhs} vs {rhs}");
        }
    }
}
