//! Binary checkpoint: an 8-byte magic, a `u32` format version, then `M`, `N`,
//! `d`, `K` and the category count as `u64`, followed by row-major `f64`
//! tensors (embeddings, each convolution in order, classifier). Everything is
//! little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result, WithPath};

use super::ModelParameters;

pub const MAGIC: &[u8; 8] = b"DGCNCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub num_users: usize,
    pub num_items: usize,
    pub dim: usize,
    pub depth: usize,
    pub num_categories: usize,
}

impl CheckpointHeader {
    pub fn of(params: &ModelParameters) -> Self {
        Self {
            num_users: params.num_users(),
            num_items: params.num_items(),
            dim: params.dim(),
            depth: params.depth(),
            num_categories: params.num_categories(),
        }
    }
}

fn write_tensor<W: Write>(w: &mut W, t: &Array2<f64>) -> Result<()> {
    for x in t.iter() {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_checkpoint<W: Write>(w: &mut W, params: &ModelParameters) -> Result<()> {
    let h = CheckpointHeader::of(params);
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    for v in [h.num_users, h.num_items, h.dim, h.depth, h.num_categories] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    write_tensor(w, &params.embeddings)?;
    for c in &params.conv {
        write_tensor(w, c)?;
    }
    write_tensor(w, &params.classifier)?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<usize> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    usize::try_from(u64::from_le_bytes(b)).map_err(|_| Error::Checkpoint("dimension overflows usize".into()))
}

fn read_tensor<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<Array2<f64>> {
    let mut data = Vec::with_capacity(rows * cols);
    let mut b = [0u8; 8];
    for _ in 0..rows * cols {
        r.read_exact(&mut b)
            .map_err(|_| Error::Checkpoint("truncated tensor data".into()))?;
        data.push(f64::from_le_bytes(b));
    }
    Ok(Array2::from_shape_vec((rows, cols), data).expect("length matches shape"))
}

pub fn read_header<R: Read>(r: &mut R) -> Result<CheckpointHeader> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Checkpoint("file too short".into()))?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v)?;
    let version = u32::from_le_bytes(v);
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    Ok(CheckpointHeader {
        num_users: read_u64(r)?,
        num_items: read_u64(r)?,
        dim: read_u64(r)?,
        depth: read_u64(r)?,
        num_categories: read_u64(r)?,
    })
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<ModelParameters> {
    let h = read_header(r)?;
    let embeddings = read_tensor(r, h.num_users + h.num_items, h.dim)?;
    let conv = (0..h.depth)
        .map(|_| read_tensor(r, h.dim, h.dim))
        .collect::<Result<Vec<_>>>()?;
    let classifier = read_tensor(r, h.num_categories, h.dim)?;
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(Error::Checkpoint("trailing bytes after classifier".into()));
    }
    ModelParameters::from_parts(h.num_users, embeddings, conv, classifier)
        .map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn save_checkpoint(path: &Path, params: &ModelParameters) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_path(path)?);
    write_checkpoint(&mut w, params).with_path(path)?;
    w.flush().with_path(path)
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParameters> {
    let mut r = BufReader::new(File::open(path).with_path(path)?);
    read_checkpoint(&mut r).with_path(path)
}
