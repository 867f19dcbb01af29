//! Little-endian binary checkpoint of a trained flow.
//!
//! Layout:
//! `b"TTFL"`, version `u32`, `d u32`, `M u32`, `n u32`, `lo f64`, `hi f64`,
//! then per field the `d - 1` internal ranks as `u32` followed by all core
//! entries as `f64` (core by core, row-major over `(left, mode, right)`),
//! then `M` values of `C_t` as `f64`.

use std::path::Path;

use sha1::{Digest, Sha1};

use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::field::{FttVectorField, VelocityField};
use crate::tt::{Core, TensorTrain};

pub const MAGIC: &[u8; 4] = b"TTFL";
pub const VERSION: u32 = 1;

/// The persisted part of a trained flow.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub basis: BasisSet,
    pub fields: Vec<FttVectorField>,
    pub c_t: Vec<f64>,
}

impl Checkpoint {
    pub fn new(basis: BasisSet, fields: Vec<FttVectorField>, c_t: Vec<f64>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::Checkpoint("checkpoint needs at least one field".into()));
        }
        if fields.len() != c_t.len() {
            return Err(Error::Checkpoint(format!("{} fields but {} C_t values", fields.len(), c_t.len())));
        }
        let d = fields[0].dim();
        if fields.iter().any(|f| f.dim() != d || f.basis() != &basis) {
            return Err(Error::Checkpoint("fields disagree on dimension or basis".into()));
        }
        Ok(Self { basis, fields, c_t })
    }

    pub fn dim(&self) -> usize {
        self.fields[0].dim()
    }

    pub fn steps(&self) -> usize {
        self.fields.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let d = self.dim();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        for v in [VERSION, d as u32, self.steps() as u32, self.basis.size() as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let (lo, hi) = self.basis.interval();
        out.extend_from_slice(&lo.to_le_bytes());
        out.extend_from_slice(&hi.to_le_bytes());
        for f in &self.fields {
            for r in f.tt().ranks() {
                out.extend_from_slice(&(r as u32).to_le_bytes());
            }
            for core in f.tt().cores() {
                for v in core.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        for c in &self.c_t {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic, not a TTFL checkpoint".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let (d, m, n) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        if d == 0 || m == 0 || n == 0 {
            return Err(Error::Checkpoint(format!("degenerate header d={d}, M={m}, n={n}")));
        }
        let (lo, hi) = (r.f64()?, r.f64()?);
        let basis = BasisSet::fourier_h2(lo, hi, n).map_err(|e| Error::Checkpoint(format!("basis: {e}")))?;
        let mut fields = Vec::with_capacity(m.min(1 << 16));
        for k in 0..m {
            let mut ranks = Vec::with_capacity(d + 1);
            ranks.push(d);
            for _ in 1..d {
                ranks.push(r.u32()? as usize);
            }
            ranks.push(1);
            let mut cores = Vec::with_capacity(d);
            for c in 0..d {
                let (left, right) = (ranks[c], ranks[c + 1]);
                let len = left
                    .checked_mul(n)
                    .and_then(|v| v.checked_mul(right))
                    .filter(|&len| len <= r.remaining() / 8)
                    .ok_or_else(|| Error::Checkpoint(format!("field {k}: core {c} larger than the file")))?;
                let data = (0..len).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
                cores.push(Core::new(left, n, right, data).map_err(|e| Error::Checkpoint(format!("field {k}: {e}")))?);
            }
            let tt = TensorTrain::new(cores).map_err(|e| Error::Checkpoint(format!("field {k}: {e}")))?;
            fields.push(FttVectorField::new(tt, basis.clone()).map_err(|e| Error::Checkpoint(format!("field {k}: {e}")))?);
        }
        let c_t = (0..m).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        if r.remaining() != 0 {
            return Err(Error::Checkpoint(format!("{} trailing bytes", r.remaining())));
        }
        Self::new(basis, fields, c_t)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Git blob hash: `sha1("blob <len>\0" ++ content)`, lowercase hex.
pub fn git_blob_sha1(content: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.remaining() < len {
            return Err(Error::Checkpoint(format!("truncated checkpoint at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
