//! On-disk formats: PNG images, raw float planes (depth, UV caches), tensor
//! containers for discriminator checkpoints, OBJ meshes, camera JSON, and
//! dataset manifests.
//!
//! Binary formats are little-endian with a 16-byte header (magic, version,
//! width, height); readers reject unknown magics and versions and report
//! parse failures with the byte offset and the field being read. Byte
//! layouts are documented in FORMATS.md at the repository root.

pub mod camera_json;
pub mod dataset;
pub mod obj;
pub mod plane;
pub mod png_io;
pub mod tensorfile;

pub use camera_json::{read_camera_json, write_camera_json};
pub use dataset::{load_dataset, save_2d_dataset, save_3d_dataset, Dataset, Manifest};
pub use obj::{read_obj, write_obj};
pub use plane::{read_depth, read_uv, write_depth, write_uv};
pub use png_io::{read_png, write_png};
pub use tensorfile::{read_tensors, write_tensors};

use crate::error::{Error, Result};
use std::path::Path;

/// RGB image with f32 channel planes (r, g, b), row-major, values in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn zeros(width: usize, height: usize) -> Image {
        Image {
            width,
            height,
            data: vec![0.0; 3 * width * height],
        }
    }

    pub fn from_planes(width: usize, height: usize, data: Vec<f32>) -> Image {
        assert_eq!(data.len(), 3 * width * height);
        Image {
            width,
            height,
            data,
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn plane(&self, ch: usize) -> &[f32] {
        let n = self.pixel_count();
        &self.data[ch * n..(ch + 1) * n]
    }

    pub fn get(&self, ch: usize, x: usize, y: usize) -> f32 {
        self.data[ch * self.pixel_count() + y * self.width + x]
    }

    pub fn set(&mut self, ch: usize, x: usize, y: usize, v: f32) {
        let n = self.pixel_count();
        self.data[ch * n + y * self.width + x] = v;
    }
}

/// Cursor over a byte buffer that reports offsets and field names on error.
pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8], path: &'a Path) -> Self {
        ByteReader { buf, pos: 0, path }
    }

    pub fn offset(&self) -> u64 {
        self.pos as u64
    }

    fn fail(&self, field: &'static str, detail: String) -> Error {
        Error::ParseBinary {
            path: self.path.to_path_buf(),
            offset: self.pos as u64,
            field,
            detail,
        }
    }

    pub fn bytes(&mut self, n: usize, field: &'static str) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(self.fail(
                field,
                format!("need {n} bytes, only {} remain", self.buf.len() - self.pos),
            ));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn magic(&mut self, expect: &'static [u8; 4]) -> Result<()> {
        let got = self.bytes(4, "magic")?;
        if got != expect {
            self.pos -= 4;
            return Err(self.fail(
                "magic",
                format!("expected {:?}, found {:?}", expect, &got[..4.min(got.len())]),
            ));
        }
        Ok(())
    }

    pub fn u32(&mut self, field: &'static str) -> Result<u32> {
        let b = self.bytes(4, field)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn f32_vec(&mut self, n: usize, field: &'static str) -> Result<Vec<f32>> {
        let b = self.bytes(4 * n, field)?;
        Ok(b.chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    pub fn finish(&self, field: &'static str) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(self.fail(
                field,
                format!("{} trailing bytes after payload", self.buf.len() - self.pos),
            ));
        }
        Ok(())
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
