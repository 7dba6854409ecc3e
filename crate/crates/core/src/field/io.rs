//! Binary map format, little-endian throughout:
//!
//! ```text
//! "ESDF" | version u32 | flags u32 | dims 3*u32 | origin 3*f32 | resolution f32
//! | inflated_by 3*f32 | values n*f32 | [gradients n*3*f32] | crc32 u32
//! ```
//!
//! Flag bit 0 marks the presence of gradients. The CRC covers every byte that
//! precedes it.

use std::fs;
use std::path::Path;

use super::{compute_gradients, DistanceField, GridSpec};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

pub const MAGIC: [u8; 4] = *b"ESDF";
pub const VERSION: u32 = 1;
const FLAG_GRADIENTS: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 12 + 12 + 4 + 12;

pub fn encode_field(field: &DistanceField) -> Vec<u8> {
    let spec = field.spec();
    let n = spec.len();
    let mut buf = Vec::with_capacity(HEADER_LEN + 16 * n + 4);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&FLAG_GRADIENTS.to_le_bytes());
    for d in spec.dims() {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    let put = |buf: &mut Vec<u8>, v: f64| buf.extend_from_slice(&(v as f32).to_le_bytes());
    for v in spec.origin().iter() {
        put(&mut buf, *v);
    }
    put(&mut buf, spec.resolution());
    for v in field.inflated_by().iter() {
        put(&mut buf, *v);
    }
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for g in field.gradients() {
        for c in g {
            buf.extend_from_slice(&c.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

pub fn save_field(field: &DistanceField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_field(field)).map_err(|e| Error::io(path, e))
}

pub fn load_field(path: impl AsRef<Path>) -> Result<DistanceField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_field(&bytes)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn u32(&mut self) -> u32 {
        let v = u32::from_le_bytes(self.bytes[self.pos..self.pos + 4].try_into().unwrap());
        self.pos += 4;
        v
    }

    fn f32(&mut self) -> f32 {
        f32::from_bits(self.u32())
    }
}

pub fn decode_field(bytes: &[u8]) -> Result<DistanceField> {
    if bytes.len() < 12 {
        return Err(Error::Truncated {
            needed: HEADER_LEN + 4,
            found: bytes.len(),
        });
    }
    let mut magic = [0u8; 4];
    magic.copy_from_slice(&bytes[..4]);
    if magic != MAGIC {
        return Err(Error::BadMagic { found: magic });
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32();
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    if bytes.len() < HEADER_LEN + 4 {
        return Err(Error::Truncated {
            needed: HEADER_LEN + 4,
            found: bytes.len(),
        });
    }
    let flags = r.u32();
    let dims = [r.u32() as usize, r.u32() as usize, r.u32() as usize];
    let n = dims.iter().try_fold(1usize, |acc, d| acc.checked_mul(*d));
    let per_cell = if flags & FLAG_GRADIENTS != 0 { 16 } else { 4 };
    let needed = n
        .and_then(|n| n.checked_mul(per_cell))
        .and_then(|b| b.checked_add(HEADER_LEN + 4))
        .ok_or_else(|| Error::InvalidArgument(format!("implausible grid dims {dims:?}")))?;
    if bytes.len() < needed {
        return Err(Error::Truncated {
            needed,
            found: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(Error::InvalidArgument(format!(
            "{} trailing bytes after map payload",
            bytes.len() - needed
        )));
    }
    let stored = u32::from_le_bytes(bytes[needed - 4..].try_into().unwrap());
    let computed = crc32fast::hash(&bytes[..needed - 4]);
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }

    let origin = Vec3::new(r.f32() as f64, r.f32() as f64, r.f32() as f64);
    let resolution = r.f32() as f64;
    let inflated_by = Vec3::new(r.f32() as f64, r.f32() as f64, r.f32() as f64);
    let spec = GridSpec::new(origin, resolution, dims)?;
    let n = spec.len();
    let values: Vec<f32> = (0..n).map(|_| r.f32()).collect();
    let gradients = if flags & FLAG_GRADIENTS != 0 {
        (0..n).map(|_| [r.f32(), r.f32(), r.f32()]).collect()
    } else {
        compute_gradients(&spec, &values)
    };
    Ok(DistanceField::from_parts(
        spec,
        values,
        gradients,
        inflated_by,
    ))
}
