//! Little-endian tensor container shared by model (`SQZW`) and mel (`SQZM`)
//! files.
//!
//! Layout: 4-byte magic, `u32` version, a format-specific header, `u32`
//! tensor count, then per tensor `u16` name length, UTF-8 name, `u8` rank,
//! `u32` dims and the raw `f32` payload.

use std::collections::HashSet;

use crate::error::{Error, Result};

pub const VERSION: u32 = 1;

/// A named tensor with explicit dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let name = name.into();
        if dims.iter().product::<usize>() != data.len() {
            return Err(Error::Shape(format!(
                "tensor {name}: dims {dims:?} do not hold {} values",
                data.len()
            )));
        }
        Ok(Self { name, dims, data })
    }
}

/// Appends little-endian primitives to a byte buffer.
#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: &[u8; 4]) -> Self {
        let mut w = Self::default();
        w.buf.extend_from_slice(magic);
        w.u32(VERSION);
        w
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    /// Writes the tensor section and returns the finished file.
    pub fn finish(mut self, tensors: &[Tensor]) -> Result<Vec<u8>> {
        self.u32(checked_u32(tensors.len(), "tensor count")?);
        for t in tensors {
            let name = t.name.as_bytes();
            let len = u16::try_from(name.len())
                .map_err(|_| Error::InvalidArgument(format!("tensor name too long: {}", t.name)))?;
            self.u16(len);
            self.buf.extend_from_slice(name);
            let rank = u8::try_from(t.dims.len())
                .map_err(|_| Error::InvalidArgument(format!("tensor {} has rank {}", t.name, t.dims.len())))?;
            self.u8(rank);
            for &d in &t.dims {
                self.u32(checked_u32(d, "dimension")?);
            }
            self.buf.reserve(4 * t.data.len());
            for v in &t.data {
                self.buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(self.buf)
    }
}

pub fn checked_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("{what} {v} does not fit in u32")))
}

/// Bounds-checked cursor; running off the end is a [`Error::Corrupt`].
pub struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    /// Checks magic and version and positions the cursor at the header.
    pub fn open(bytes: &'a [u8], magic: &[u8; 4]) -> Result<Self> {
        let mut r = Self { bytes, pos: 0 };
        let found = r.take(4)?;
        if found != magic {
            return Err(Error::Schema(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(found),
                String::from_utf8_lossy(magic)
            )));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Schema(format!("unsupported format version {version}")));
        }
        Ok(r)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Corrupt(format!(
                "truncated: needed {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            ))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    /// Reads the tensor section, which must end exactly at end of file.
    /// Duplicate names are a schema error.
    pub fn tensors(mut self) -> Result<Vec<Tensor>> {
        let count = self.u32()? as usize;
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for _ in 0..count {
            let len = self.u16()? as usize;
            let name = std::str::from_utf8(self.take(len)?)
                .map_err(|_| Error::Corrupt("tensor name is not UTF-8".into()))?
                .to_string();
            if !seen.insert(name.clone()) {
                return Err(Error::Schema(format!("duplicate tensor {name}")));
            }
            let rank = self.u8()? as usize;
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(self.u32()? as usize);
            }
            let n = dims
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .and_then(|n| n.checked_mul(4))
                .ok_or_else(|| Error::Corrupt(format!("tensor {name} dims {dims:?} overflow")))?;
            let data = self
                .take(n)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            out.push(Tensor { name, dims, data });
        }
        if self.pos != self.bytes.len() {
            return Err(Error::Corrupt(format!(
                "{} trailing bytes after tensor section",
                self.bytes.len() - self.pos
            )));
        }
        Ok(out)
    }
}
