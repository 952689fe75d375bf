//! Versioned binary model files.
//!
//! Both formats are little-endian and share a header of magic (4 bytes),
//! format version (u32), and layer count (u32), followed by per-layer
//! blocks that each begin with rows (u32), cols (u32), and an activation
//! tag (u8).
//!
//! * `SND1` (dense): raw row-major weights (rows*cols x f64), then
//!   biases (rows x f64).
//! * `SNZ1` (sparse): nnz (u64), row offsets ((rows+1) x u64), column
//!   indices (nnz x u32), values (nnz x f64), then biases (rows x f64).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Activation, DenseLayer, Network};
use crate::numerics::Matrix;
use crate::sparse::{CsrLayer, SparseModel};

pub const DENSE_MAGIC: &[u8; 4] = b"SND1";
pub const SPARSE_MAGIC: &[u8; 4] = b"SNZ1";
pub const FORMAT_VERSION: u32 = 1;

/// Either model flavor, as identified by a file's magic.
#[derive(Debug, Clone)]
pub enum ModelFile {
    Dense(Network),
    Sparse(SparseModel),
}

// ---------------------------------------------------------------------------
// Writing
// ---------------------------------------------------------------------------

/// Serialize a dense network in `SND1` layout.
pub fn write_dense(net: &Network, out: &mut impl Write) -> Result<()> {
    out.write_all(DENSE_MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(net.layers().len() as u32).to_le_bytes())?;
    for layer in net.layers() {
        out.write_all(&(layer.weights().rows() as u32).to_le_bytes())?;
        out.write_all(&(layer.weights().cols() as u32).to_le_bytes())?;
        out.write_all(&[layer.activation().tag()])?;
        for w in layer.weights().data() {
            out.write_all(&w.to_le_bytes())?;
        }
        for b in layer.biases() {
            out.write_all(&b.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Serialize a sparse model in `SNZ1` layout.
pub fn write_sparse(model: &SparseModel, out: &mut impl Write) -> Result<()> {
    out.write_all(SPARSE_MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(model.layers().len() as u32).to_le_bytes())?;
    for layer in model.layers() {
        out.write_all(&(layer.rows as u32).to_le_bytes())?;
        out.write_all(&(layer.cols as u32).to_le_bytes())?;
        out.write_all(&[layer.activation.tag()])?;
        out.write_all(&(layer.nnz() as u64).to_le_bytes())?;
        for off in &layer.row_offsets {
            out.write_all(&off.to_le_bytes())?;
        }
        for col in &layer.col_indices {
            out.write_all(&col.to_le_bytes())?;
        }
        for v in &layer.values {
            out.write_all(&v.to_le_bytes())?;
        }
        for b in &layer.biases {
            out.write_all(&b.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Write either model flavor to a file path.
pub fn save_model(path: &Path, model: &ModelFile) -> Result<()> {
    let mut buf = Vec::new();
    match model {
        ModelFile::Dense(net) => write_dense(net, &mut buf)?,
        ModelFile::Sparse(model) => write_sparse(model, &mut buf)?,
    }
    fs::write(path, buf)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Reading
// ---------------------------------------------------------------------------

/// Byte cursor that reports the offset of any short read.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Cursor { bytes, pos: 0 }
    }

    fn fail(&self, message: impl Into<String>) -> Error {
        Error::Format {
            offset: self.pos as u64,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(self.fail(format!(
                "truncated: needed {n} bytes, {} remain",
                self.bytes.len() - self.pos
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn take_u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn take_u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn take_u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn take_f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.fail(format!(
                "{} trailing bytes after model payload",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn read_header<'a>(cur: &mut Cursor<'a>, magic: &[u8; 4]) -> Result<u32> {
    let seen = cur.take(4)?;
    if seen != magic {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad magic {seen:?}, expected {magic:?}"),
        });
    }
    let version = cur.take_u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format {
            offset: 4,
            message: format!("unsupported format version {version}"),
        });
    }
    let layer_count = cur.take_u32()?;
    if layer_count == 0 {
        return Err(Error::Format {
            offset: 8,
            message: "zero layers".into(),
        });
    }
    Ok(layer_count)
}

fn read_activation(cur: &mut Cursor<'_>) -> Result<Activation> {
    let at = cur.pos;
    let tag = cur.take_u8()?;
    Activation::from_tag(tag).ok_or(Error::Format {
        offset: at as u64,
        message: format!("unknown activation tag {tag}"),
    })
}

/// Parse a dense network from `SND1` bytes.
pub fn read_dense(bytes: &[u8]) -> Result<Network> {
    let mut cur = Cursor::new(bytes);
    let layer_count = read_header(&mut cur, DENSE_MAGIC)?;
    let mut layers = Vec::with_capacity(layer_count as usize);
    for _ in 0..layer_count {
        let rows = cur.take_u32()? as usize;
        let cols = cur.take_u32()? as usize;
        let activation = read_activation(&mut cur)?;
        let at = cur.pos;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(cur.take_f64()?);
        }
        let weights = Matrix::from_vec(rows, cols, data).map_err(|e| Error::Format {
            offset: at as u64,
            message: e.to_string(),
        })?;
        let mut biases = Vec::with_capacity(rows);
        for _ in 0..rows {
            biases.push(cur.take_f64()?);
        }
        layers.push(DenseLayer::new(weights, biases, activation)?);
    }
    cur.finish()?;
    Network::new(layers).map_err(|e| Error::Format {
        offset: bytes.len() as u64,
        message: e.to_string(),
    })
}

/// Parse a sparse model from `SNZ1` bytes.
pub fn read_sparse(bytes: &[u8]) -> Result<SparseModel> {
    let mut cur = Cursor::new(bytes);
    let layer_count = read_header(&mut cur, SPARSE_MAGIC)?;
    let mut layers = Vec::with_capacity(layer_count as usize);
    for _ in 0..layer_count {
        let rows = cur.take_u32()? as usize;
        let cols = cur.take_u32()? as usize;
        let activation = read_activation(&mut cur)?;
        let block_at = cur.pos;
        let nnz = cur.take_u64()? as usize;
        let mut row_offsets = Vec::with_capacity(rows + 1);
        for _ in 0..rows + 1 {
            row_offsets.push(cur.take_u64()?);
        }
        let mut col_indices = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            col_indices.push(cur.take_u32()?);
        }
        let mut values = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            values.push(cur.take_f64()?);
        }
        let mut biases = Vec::with_capacity(rows);
        for _ in 0..rows {
            biases.push(cur.take_f64()?);
        }
        let layer = CsrLayer {
            rows,
            cols,
            activation,
            row_offsets,
            col_indices,
            values,
            biases,
        };
        layer.validate().map_err(|e| Error::Format {
            offset: block_at as u64,
            message: e.to_string(),
        })?;
        layers.push(layer);
    }
    cur.finish()?;
    SparseModel::new(layers).map_err(|e| Error::Format {
        offset: bytes.len() as u64,
        message: e.to_string(),
    })
}

/// Load either model flavor from a file, dispatching on the magic.
pub fn load_model(path: &Path) -> Result<ModelFile> {
    let bytes = fs::read(path)?;
    match bytes.get(..4) {
        Some(m) if m == DENSE_MAGIC => Ok(ModelFile::Dense(read_dense(&bytes)?)),
        Some(m) if m == SPARSE_MAGIC => Ok(ModelFile::Sparse(read_sparse(&bytes)?)),
        Some(m) => Err(Error::Format {
            offset: 0,
            message: format!("unrecognized magic {m:?}"),
        }),
        None => Err(Error::Format {
            offset: 0,
            message: "file shorter than magic".into(),
        }),
    }
}

// ===========================================================================
// Tests
// ===========================================================================
