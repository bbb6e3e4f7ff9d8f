//! Versioned binary container for named float64 tensors.
//!
//! Layout: 8-byte magic, u32 format version, length-prefixed UTF-8 metadata,
//! u32 tensor count, a table of length-prefixed names with u32 row/col
//! counts, the row-major little-endian float64 payloads in table order, and
//! a trailing SHA-256 digest of everything before it.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::dense::DenseMatrix;
use crate::{Result, SgptError};

pub const FORMAT_VERSION: u32 = 1;

pub fn sha256_hex(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorContainer {
    pub meta: String,
    pub tensors: Vec<(String, DenseMatrix)>,
}

impl TensorContainer {
    pub fn tensor(&self, name: &str) -> Option<&DenseMatrix> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }
}

pub fn write_container(
    path: impl AsRef<Path>,
    magic: &[u8; 8],
    meta: &str,
    tensors: &[(String, DenseMatrix)],
) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(magic);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    buf.extend_from_slice(meta.as_bytes());
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(t.rows() as u32).to_le_bytes());
        buf.extend_from_slice(&(t.cols() as u32).to_le_bytes());
    }
    for (_, t) in tensors {
        for &v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    fs::write(path, buf)?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(SgptError::Corrupt(format!(
                "truncated file: wanted {n} bytes at offset {}, have {}",
                self.pos,
                self.data.len() - self.pos
            )));
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn take_u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn take_string(&mut self) -> Result<String> {
        let len = self.take_u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| SgptError::Corrupt("non-UTF-8 string field".into()))
    }
}

pub fn read_container(path: impl AsRef<Path>, magic: &[u8; 8]) -> Result<TensorContainer> {
    let data = fs::read(path)?;
    if data.len() < 32 {
        return Err(SgptError::Corrupt("file shorter than its digest".into()));
    }
    let (body, stored_digest) = data.split_at(data.len() - 32);
    let digest = Sha256::digest(body);
    if digest.as_slice() != stored_digest {
        return Err(SgptError::Corrupt("checksum mismatch".into()));
    }
    let mut cur = Cursor { data: body, pos: 0 };
    let found_magic = cur.take(8)?;
    if found_magic != magic {
        return Err(SgptError::Corrupt(format!(
            "bad magic {found_magic:?}, expected {magic:?}"
        )));
    }
    let version = cur.take_u32()?;
    if version != FORMAT_VERSION {
        return Err(SgptError::Corrupt(format!(
            "unsupported format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let meta = cur.take_string()?;
    let count = cur.take_u32()? as usize;
    let mut shapes = Vec::with_capacity(count);
    for _ in 0..count {
        let name = cur.take_string()?;
        let rows = cur.take_u32()? as usize;
        let cols = cur.take_u32()? as usize;
        shapes.push((name, rows, cols));
    }
    let mut tensors = Vec::with_capacity(count);
    for (name, rows, cols) in shapes {
        let bytes = cur.take(rows * cols * 8)?;
        let data: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
            .collect();
        tensors.push((name, DenseMatrix::from_vec(rows, cols, data)?));
    }
    if cur.pos != body.len() {
        return Err(SgptError::Corrupt(format!(
            "{} trailing bytes after payload",
            body.len() - cur.pos
        )));
    }
    Ok(TensorContainer { meta, tensors })
}
