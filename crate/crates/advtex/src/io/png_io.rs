//! PNG read/write for color images and textures (8-bit RGB).

use super::Image;
use crate::error::{Error, Result};
use std::path::Path;

/// Reads a PNG into f32 planes; grayscale and alpha inputs are converted
/// to RGB (alpha dropped).
pub fn read_png(path: &Path) -> Result<Image> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(std::io::BufReader::new(file));
    let mut reader = decoder.read_info().map_err(|e| png_err(path, e))?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| png_err(path, e))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Png {
            path: path.to_path_buf(),
            detail: format!("unsupported bit depth {:?} (expected 8)", info.bit_depth),
        });
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let npix = w * h;
    let mut img = Image::zeros(w, h);
    let put = |img: &mut Image, p: usize, r: u8, g: u8, b: u8| {
        img.data[p] = r as f32 / 255.0;
        img.data[npix + p] = g as f32 / 255.0;
        img.data[2 * npix + p] = b as f32 / 255.0;
    };
    let bytes = &buf[..info.buffer_size()];
    match info.color_type {
        png::ColorType::Rgb => {
            for p in 0..npix {
                put(&mut img, p, bytes[3 * p], bytes[3 * p + 1], bytes[3 * p + 2]);
            }
        }
        png::ColorType::Rgba => {
            for p in 0..npix {
                put(&mut img, p, bytes[4 * p], bytes[4 * p + 1], bytes[4 * p + 2]);
            }
        }
        png::ColorType::Grayscale => {
            for p in 0..npix {
                put(&mut img, p, bytes[p], bytes[p], bytes[p]);
            }
        }
        png::ColorType::GrayscaleAlpha => {
            for p in 0..npix {
                put(&mut img, p, bytes[2 * p], bytes[2 * p], bytes[2 * p]);
            }
        }
        other => {
            return Err(Error::Png {
                path: path.to_path_buf(),
                detail: format!("unsupported color type {other:?}"),
            })
        }
    }
    Ok(img)
}

/// Writes an image as 8-bit RGB; values are clamped to [0,1] and rounded.
pub fn write_png(path: &Path, img: &Image) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(
        std::io::BufWriter::new(file),
        img.width as u32,
        img.height as u32,
    );
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header().map_err(|e| png_err(path, e))?;
    let npix = img.pixel_count();
    let mut bytes = vec![0u8; 3 * npix];
    for p in 0..npix {
        for ch in 0..3 {
            bytes[3 * p + ch] = (img.data[ch * npix + p].clamp(0.0, 1.0) * 255.0).round() as u8;
        }
    }
    writer.write_image_data(&bytes).map_err(|e| png_err(path, e))?;
    Ok(())
}

fn png_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Png {
        path: path.to_path_buf(),
        detail: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_within_one_level() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        let mut img = Image::zeros(5, 3);
        for (i, v) in img.data.iter_mut().enumerate() {
            *v = (i % 11) as f32 / 10.0;
        }
        write_png(&path, &img).unwrap();
        let back = read_png(&path).unwrap();
        assert_eq!((back.width, back.height), (5, 3));
        for (a, b) in img.data.iter().zip(&back.data) {
            assert!((a - b).abs() <= 1.0 / 255.0 + 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn corrupt_png_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.png");
        std::fs::write(&path, b"definitely not a png").unwrap();
        assert!(read_png(&path).is_err());
    }
}
