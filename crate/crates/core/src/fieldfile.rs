//! Binary field files.
//!
//! Layout, all integers `u32` little-endian:
//!
//! ```text
//! "HMAF" | version | n | axis count | size_0 … size_{2n−1} | kind | f64 LE samples
//! ```
//!
//! `kind` is 0 for a real scalar, 1 for a complex scalar (re, im per point)
//! and 2 for a Hermitian matrix field (n² complex entries per point,
//! row-major, re then im). Points are in row-major axis order.

use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, ScalarField, TorusGrid};
use crate::hermitian::HermitianField;

pub const MAGIC: &[u8; 4] = b"HMAF";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum FieldData {
    Real(ScalarField),
    Complex(ComplexField),
    Hermitian(HermitianField),
}

impl FieldData {
    pub fn grid(&self) -> &TorusGrid {
        match self {
            FieldData::Real(f) => f.grid(),
            FieldData::Complex(f) => f.grid(),
            FieldData::Hermitian(f) => f.grid(),
        }
    }

    fn kind(&self) -> u32 {
        match self {
            FieldData::Real(_) => 0,
            FieldData::Complex(_) => 1,
            FieldData::Hermitian(_) => 2,
        }
    }

    pub fn into_real(self) -> Result<ScalarField> {
        match self {
            FieldData::Real(f) => Ok(f),
            _ => Err(Error::FieldFormat("expected a real scalar field".into())),
        }
    }
}

pub fn encode(data: &FieldData) -> Vec<u8> {
    let grid = data.grid();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    let mut put = |v: u32| out.extend_from_slice(&v.to_le_bytes());
    put(VERSION);
    put(grid.n() as u32);
    put(grid.axis_count() as u32);
    for &s in grid.sizes() {
        put(s as u32);
    }
    put(data.kind());
    let push_c = |out: &mut Vec<u8>, c: &Complex64| {
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    };
    match data {
        FieldData::Real(f) => {
            for v in f.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        FieldData::Complex(f) => f.values().iter().for_each(|c| push_c(&mut out, c)),
        FieldData::Hermitian(f) => f.values().iter().for_each(|c| push_c(&mut out, c)),
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, len: usize, what: &str) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < len {
            return Err(Error::FieldFormat(format!("truncated file while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<FieldData> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::FieldFormat("bad magic, not a field file".into()));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::FieldFormat(format!("unsupported version {version}")));
    }
    let n = r.u32("n")? as usize;
    let axes = r.u32("axis count")? as usize;
    if axes != 2 * n {
        return Err(Error::FieldFormat(format!("axis count {axes} does not match n = {n}")));
    }
    let sizes = (0..axes)
        .map(|_| r.u32("axis size").map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let grid = TorusGrid::new(n, &sizes).map_err(|e| Error::FieldFormat(e.to_string()))?;
    let kind = r.u32("payload kind")?;
    let per_point = match kind {
        0 => 1,
        1 => 2,
        2 => 2 * n * n,
        k => return Err(Error::FieldFormat(format!("unknown payload kind {k}"))),
    };
    let count = grid.point_count() * per_point;
    let expected = count * 8;
    let remaining = bytes.len() - r.pos;
    if remaining != expected {
        return Err(Error::FieldFormat(format!(
            "payload has {remaining} bytes, header implies {expected}"
        )));
    }
    let samples: Vec<f64> = r
        .take(expected, "payload")?
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let complex = || -> Vec<Complex64> { samples.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect() };
    let map_err = |e: Error| Error::FieldFormat(e.to_string());
    Ok(match kind {
        0 => FieldData::Real(ScalarField::new(grid, samples.clone()).map_err(map_err)?),
        1 => FieldData::Complex(ComplexField::new(grid, complex()).map_err(map_err)?),
        _ => FieldData::Hermitian(HermitianField::new(grid, complex()).map_err(map_err)?),
    })
}

pub fn write_field(path: &Path, data: &FieldData) -> Result<()> {
    std::fs::write(path, encode(data))?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<FieldData> {
    decode(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let g = TorusGrid::new(2, &[4, 6, 4, 8]).unwrap();
        let bytes = encode(&FieldData::Real(ScalarField::constant(&g, 1.5)));
        assert_eq!(&bytes[..4], b"HMAF");
        let words: Vec<u32> = bytes[4..4 + 8 * 4]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(words, vec![1, 2, 4, 4, 6, 4, 8, 0]);
        assert_eq!(bytes.len(), 36 + 8 * g.point_count());
        assert_eq!(&bytes[36..44], &1.5f64.to_le_bytes());
    }

    #[test]
    fn hermitian_round_trip() {
        let g = TorusGrid::uniform(2, 4).unwrap();
        let m = HermitianField::from_fn(&g, |p| {
            let x = g.coords(p);
            crate::hermitian::HMat::from_row_major(
                2,
                &[
                    Complex64::new(1.0 + 0.1 * x[0].sin(), 0.0),
                    Complex64::new(0.2, 0.3 * x[1].cos()),
                    Complex64::new(0.2, -0.3 * x[1].cos()),
                    Complex64::new(2.0, 0.0),
                ],
            )
        });
        let data = FieldData::Hermitian(m);
        assert_eq!(decode(&encode(&data)).unwrap(), data);
    }

    #[test]
    fn rejects_corruption() {
        let g = TorusGrid::uniform(2, 4).unwrap();
        let mut bytes = encode(&FieldData::Real(ScalarField::zeros(&g)));
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(Error::FieldFormat(_))));
    }
}
