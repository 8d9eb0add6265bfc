//! Raw float-plane containers for depth maps and UV caches.
//!
//! Depth ("ATDP"): 16-byte header (magic, version=1, width, height) then
//! height*width f32 LE, row-major, meters, 0 = invalid.
//!
//! UV ("ATUV"): same header, then the u plane and v plane (each
//! height*width f32 LE in [0,1]) followed by a validity byte plane
//! (nonzero = pixel has texture coordinates).

use super::{read_file, write_file, ByteReader};
use crate::error::{Error, Result};
use std::path::Path;

pub const DEPTH_MAGIC: &[u8; 4] = b"ATDP";
pub const UV_MAGIC: &[u8; 4] = b"ATUV";
pub const VERSION: u32 = 1;

/// Upper bound on declared dimensions, to reject absurd headers before
/// allocating.
const MAX_DIM: u32 = 1 << 16;

fn check_dims(r: &ByteReader, path: &Path, w: u32, h: u32) -> Result<()> {
    if w == 0 || h == 0 || w > MAX_DIM || h > MAX_DIM {
        return Err(Error::ParseBinary {
            path: path.to_path_buf(),
            offset: r.offset(),
            field: "dimensions",
            detail: format!("unreasonable size {w}x{h}"),
        });
    }
    Ok(())
}

fn check_version(r: &ByteReader, path: &Path, v: u32) -> Result<()> {
    if v != VERSION {
        return Err(Error::ParseBinary {
            path: path.to_path_buf(),
            offset: r.offset(),
            field: "version",
            detail: format!("unknown version {v}, expected {VERSION}"),
        });
    }
    Ok(())
}

pub fn write_depth(path: &Path, depth: &[f32], width: usize, height: usize) -> Result<()> {
    assert_eq!(depth.len(), width * height);
    let mut out = Vec::with_capacity(16 + 4 * depth.len());
    out.extend_from_slice(DEPTH_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(width as u32).to_le_bytes());
    out.extend_from_slice(&(height as u32).to_le_bytes());
    for v in depth {
        out.extend_from_slice(&v.to_le_bytes());
    }
    write_file(path, &out)
}

pub fn read_depth(path: &Path) -> Result<(Vec<f32>, usize, usize)> {
    let buf = read_file(path)?;
    parse_depth(&buf, path)
}

/// Byte-level depth parser; `origin` is used in error messages only.
pub fn parse_depth(buf: &[u8], origin: &Path) -> Result<(Vec<f32>, usize, usize)> {
    let path = origin;
    let mut r = ByteReader::new(buf, path);
    r.magic(DEPTH_MAGIC)?;
    let version = r.u32("version")?;
    check_version(&r, path, version)?;
    let w = r.u32("width")?;
    let h = r.u32("height")?;
    check_dims(&r, path, w, h)?;
    let depth = r.f32_vec(w as usize * h as usize, "depth payload")?;
    r.finish("depth payload")?;
    Ok((depth, w as usize, h as usize))
}

pub fn write_uv(
    path: &Path,
    uv: &[f32],
    valid: &[u8],
    width: usize,
    height: usize,
) -> Result<()> {
    let npix = width * height;
    assert_eq!(uv.len(), 2 * npix);
    assert_eq!(valid.len(), npix);
    let mut out = Vec::with_capacity(16 + 8 * npix + npix);
    out.extend_from_slice(UV_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(width as u32).to_le_bytes());
    out.extend_from_slice(&(height as u32).to_le_bytes());
    for v in uv {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(valid);
    write_file(path, &out)
}

#[allow(clippy::type_complexity)]
pub fn read_uv(path: &Path) -> Result<(Vec<f32>, Vec<u8>, usize, usize)> {
    let buf = read_file(path)?;
    parse_uv(&buf, path)
}

/// Byte-level UV-cache parser; `origin` is used in error messages only.
#[allow(clippy::type_complexity)]
pub fn parse_uv(buf: &[u8], origin: &Path) -> Result<(Vec<f32>, Vec<u8>, usize, usize)> {
    let path = origin;
    let mut r = ByteReader::new(buf, path);
    r.magic(UV_MAGIC)?;
    let version = r.u32("version")?;
    check_version(&r, path, version)?;
    let w = r.u32("width")?;
    let h = r.u32("height")?;
    check_dims(&r, path, w, h)?;
    let npix = w as usize * h as usize;
    let uv = r.f32_vec(2 * npix, "uv payload")?;
    let valid = r.bytes(npix, "validity plane")?.to_vec();
    r.finish("validity plane")?;
    Ok((uv, valid, w as usize, h as usize))
}
