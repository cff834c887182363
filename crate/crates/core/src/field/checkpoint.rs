//! Binary checkpoint: network parameters, Boolean tree, normalization.
//!
//! Layout, all integers and floats little-endian:
//!
//! | offset | bytes | content |
//! |---|---|---|
//! | 0 | 4 | magic `NHCK` |
//! | 4 | 4 | version (u32) |
//! | 8 | 8 | SoftPlus sharpness β (f64) |
//! | 16 | 4 | layer count `m` (u32) |
//! | 20 | 4(m+1) | layer sizes (u32) |
//! | | | per layer: weights `out × in` row-major, then biases (f64) |
//! | | 32 | normalization scale and translation (4 × f64) |
//! | | 4 + k | tree expression (u32 length + UTF-8) |
//! | | 4 + k | training configuration echo (u32 length + UTF-8) |
//!
//! The normalization maps input coordinates into the frame the network
//! was trained in.

use std::io::{Read, Write};
use std::path::Path;

use super::NeuralField;
use crate::brep::Similarity;
use crate::error::{Error, Result};
use crate::geom::Vector3;
use crate::tree::BooleanTree;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"NHCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub field: NeuralField,
    pub tree: BooleanTree,
    /// Input frame to training frame.
    pub transform: Similarity,
    pub config: String,
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("invalid UTF-8".into()))
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(64 + 8 * self.field.param_count());
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        buf.extend_from_slice(&self.field.beta.to_le_bytes());
        let sizes = self.field.sizes();
        buf.extend_from_slice(&(self.field.layers.len() as u32).to_le_bytes());
        for s in &sizes {
            buf.extend_from_slice(&(*s as u32).to_le_bytes());
        }
        for v in self.field.to_flat() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let t = &self.transform;
        for v in [t.scale, t.translation.x, t.translation.y, t.translation.z] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        put_str(&mut buf, &self.tree.serialize());
        put_str(&mut buf, &self.config);
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let beta = r.f64()?;
        let m = r.u32()? as usize;
        if m == 0 || m > 64 {
            return Err(Error::Checkpoint(format!("bad layer count {m}")));
        }
        let sizes = (0..=m).map(|_| r.u32().map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
        if sizes[0] != 3 || sizes.iter().any(|&s| s == 0 || s > 1 << 16) {
            return Err(Error::Checkpoint(format!("bad layer sizes {sizes:?}")));
        }
        let mut field = NeuralField::zeros(&sizes, beta);
        let flat = (0..field.param_count()).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        field.set_flat(&flat);
        let (scale, tx, ty, tz) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
        let tree = BooleanTree::parse(&r.string()?)?;
        let config = r.string()?;
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        if tree.slot_count() != field.output_dim() {
            return Err(Error::Checkpoint(format!(
                "tree reads {} slots but the network has {} outputs",
                tree.slot_count(),
                field.output_dim()
            )));
        }
        Ok(Checkpoint { field, tree, transform: Similarity { scale, translation: Vector3::new(tx, ty, tz) }, config })
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(&self.to_bytes())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Checkpoint> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| Error::Checkpoint(e.to_string()))?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
