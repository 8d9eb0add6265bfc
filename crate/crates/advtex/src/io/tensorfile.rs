//! Tensor container ("ATTN"): magic, version=1, tensor count, then per
//! tensor a rank, the dims (u32 each), and the f32 LE payload. Used for
//! discriminator checkpoints (10 tensors: weight and bias per block, in
//! block order).

use super::{read_file, write_file, ByteReader};
use crate::disc::DiscriminatorState;
use crate::error::{Error, Result};
use crate::tensor::Param;
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"ATTN";
pub const VERSION: u32 = 1;

const MAX_RANK: u32 = 8;
const MAX_ELEMENTS: u64 = 1 << 28;

pub fn write_tensors(path: &Path, tensors: &[(&[usize], &[f32])]) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (shape, data) in tensors {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in *shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in *data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    write_file(path, &out)
}

pub fn read_tensors(path: &Path) -> Result<Vec<(Vec<usize>, Vec<f32>)>> {
    let buf = read_file(path)?;
    parse_tensors(&buf, path)
}

/// Byte-level container parser; `origin` is used in error messages only.
pub fn parse_tensors(buf: &[u8], origin: &Path) -> Result<Vec<(Vec<usize>, Vec<f32>)>> {
    let path = origin;
    let mut r = ByteReader::new(buf, path);
    r.magic(MAGIC)?;
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::ParseBinary {
            path: path.to_path_buf(),
            offset: r.offset(),
            field: "version",
            detail: format!("unknown version {version}, expected {VERSION}"),
        });
    }
    let count = r.u32("tensor count")?;
    let mut tensors = Vec::new();
    for _ in 0..count {
        let rank = r.u32("rank")?;
        if rank == 0 || rank > MAX_RANK {
            return Err(Error::ParseBinary {
                path: path.to_path_buf(),
                offset: r.offset(),
                field: "rank",
                detail: format!("rank {rank} outside 1..={MAX_RANK}"),
            });
        }
        let mut dims = Vec::with_capacity(rank as usize);
        let mut numel = 1u64;
        for _ in 0..rank {
            let d = r.u32("dim")?;
            numel = numel.saturating_mul(d as u64);
            dims.push(d as usize);
        }
        if numel == 0 || numel > MAX_ELEMENTS {
            return Err(Error::ParseBinary {
                path: path.to_path_buf(),
                offset: r.offset(),
                field: "dims",
                detail: format!("element count {numel} outside 1..={MAX_ELEMENTS}"),
            });
        }
        let data = r.f32_vec(numel as usize, "tensor payload")?;
        tensors.push((dims, data));
    }
    r.finish("tensor payload")?;
    Ok(tensors)
}

/// Writes a discriminator checkpoint: weight, bias per block, block order.
pub fn write_discriminator(path: &Path, disc: &DiscriminatorState) -> Result<()> {
    let tensors: Vec<(&[usize], &[f32])> = disc
        .blocks
        .iter()
        .flat_map(|b| {
            [
                (b.weight.shape.as_slice(), b.weight.data.as_slice()),
                (b.bias.shape.as_slice(), b.bias.data.as_slice()),
            ]
        })
        .collect();
    write_tensors(path, &tensors)
}

/// Restores checkpointed parameters into a freshly initialized state.
pub fn read_discriminator(path: &Path, disc: &mut DiscriminatorState) -> Result<()> {
    let tensors = read_tensors(path)?;
    if tensors.len() != disc.blocks.len() * 2 {
        return Err(Error::ParseBinary {
            path: path.to_path_buf(),
            offset: 0,
            field: "tensor count",
            detail: format!(
                "expected {} tensors, found {}",
                disc.blocks.len() * 2,
                tensors.len()
            ),
        });
    }
    for (i, block) in disc.blocks.iter_mut().enumerate() {
        for (param, (shape, data)) in [
            (&mut block.weight, &tensors[2 * i]),
            (&mut block.bias, &tensors[2 * i + 1]),
        ] {
            if *shape != param.shape {
                return Err(Error::ParseBinary {
                    path: path.to_path_buf(),
                    offset: 0,
                    field: "dims",
                    detail: format!(
                        "checkpoint tensor {i} has shape {shape:?}, expected {:?}",
                        param.shape
                    ),
                });
            }
            *param = Param::new(data.clone(), shape);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensors_roundtrip_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.attn");
        let a = (vec![2usize, 3], vec![1.0f32, -2.0, 0.5, 1e-30, 7.0, 0.0]);
        let b = (vec![4usize], vec![9.0f32, 8.0, 7.0, 6.5]);
        write_tensors(
            &path,
            &[(&a.0, &a.1), (&b.0, &b.1)],
        )
        .unwrap();
        let back = read_tensors(&path).unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn discriminator_checkpoint_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.attn");
        let disc = crate::disc::init_discriminator(6, 99).unwrap();
        write_discriminator(&path, &disc).unwrap();
        let mut fresh = crate::disc::init_discriminator(6, 1).unwrap();
        read_discriminator(&path, &mut fresh).unwrap();
        for (a, b) in disc.blocks.iter().zip(&fresh.blocks) {
            assert_eq!(a.weight.data, b.weight.data);
            assert_eq!(a.bias.data, b.bias.data);
        }
    }

    #[test]
    fn absurd_rank_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.attn");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&VERSION.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&4000u32.to_le_bytes()); // rank
        std::fs::write(&path, &bytes).unwrap();
        assert!(read_tensors(&path).unwrap_err().to_string().contains("rank"));
    }
}
