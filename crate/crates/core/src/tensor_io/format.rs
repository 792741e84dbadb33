//! Magic-tagged little-endian binary formats.
//!
//! Every file starts with a 4-byte magic and a `u32` format version, followed
//! by `u32` dimensions and a flat payload:
//!
//! | format | magic  | dimensions | payload              |
//! |--------|--------|------------|----------------------|
//! | grid   | `UCFT` | H, W, D    | H·W·D `f32`          |
//! | mask   | `UCMK` | H, W       | H·W bytes, each 0/1  |
//! | heat   | `UCHT` | H, W       | H·W `f32`            |
//! | head   | `UCWT` | D          | D+1 `f32` (w then b) |

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::grid::{BinaryMask, FeatureGrid, HeatMap};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

pub const FEATURE_MAGIC: [u8; 4] = *b"UCFT";
pub const MASK_MAGIC: [u8; 4] = *b"UCMK";
pub const HEAT_MAGIC: [u8; 4] = *b"UCHT";
pub const HEAD_MAGIC: [u8; 4] = *b"UCWT";

pub(crate) fn write_header<W: Write>(sink: &mut W, magic: [u8; 4], dims: &[usize]) -> Result<()> {
    sink.write_all(&magic)?;
    sink.write_all(&FORMAT_VERSION.to_le_bytes())?;
    for &d in dims {
        let d = u32::try_from(d)
            .map_err(|_| Error::InvalidDimensions(format!("dimension {d} exceeds u32")))?;
        sink.write_all(&d.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn write_f32s<W: Write>(sink: &mut W, values: &[f32]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 4);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    sink.write_all(&buf)?;
    Ok(())
}

/// Cursor over an in-memory encoded file.
pub(crate) struct Decoder<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    /// Checks magic and version, then reads `n_dims` u32 dimensions.
    pub(crate) fn open(
        bytes: &'a [u8],
        magic: [u8; 4],
        n_dims: usize,
    ) -> Result<(Self, Vec<usize>)> {
        let mut dec = Decoder { bytes, pos: 0 };
        let found: [u8; 4] = dec.take(4)?.try_into().unwrap();
        if found != magic {
            return Err(Error::BadMagic {
                expected: magic,
                found,
            });
        }
        let version = dec.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let dims = (0..n_dims)
            .map(|_| dec.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        Ok((dec, dims))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(Error::Truncated {
                expected: self.pos.saturating_add(n),
                actual: self.bytes.len(),
            }),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f32s(&mut self, count: usize) -> Result<Vec<f32>> {
        let n = count
            .checked_mul(4)
            .ok_or_else(|| Error::InvalidDimensions(format!("{count} floats overflow")))?;
        let raw = self.take(n)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn bytes(&mut self, count: usize) -> Result<&'a [u8]> {
        self.take(count)
    }

    pub(crate) fn finish(self) -> Result<()> {
        match self.bytes.len() - self.pos {
            0 => Ok(()),
            extra => Err(Error::TrailingBytes(extra)),
        }
    }
}

fn checked_product(dims: &[usize]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::InvalidDimensions(format!("dimensions {dims:?} overflow")))
}

pub fn encode_feature_grid(grid: &FeatureGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + grid.data().len() * 4);
    write_feature_grid(grid, &mut out).expect("writing to a Vec cannot fail");
    out
}

pub fn write_feature_grid<W: Write>(grid: &FeatureGrid, mut sink: W) -> Result<()> {
    write_header(
        &mut sink,
        FEATURE_MAGIC,
        &[grid.height(), grid.width(), grid.dim()],
    )?;
    write_f32s(&mut sink, grid.data())?;
    sink.flush()?;
    Ok(())
}

pub fn decode_feature_grid(bytes: &[u8]) -> Result<FeatureGrid> {
    let (mut dec, dims) = Decoder::open(bytes, FEATURE_MAGIC, 3)?;
    let data = dec.f32s(checked_product(&dims)?)?;
    dec.finish()?;
    FeatureGrid::new(dims[0], dims[1], dims[2], data)
}

pub fn read_feature_grid<R: Read>(mut source: R) -> Result<FeatureGrid> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    decode_feature_grid(&bytes)
}

pub fn encode_mask(mask: &BinaryMask) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + mask.len());
    write_mask(mask, &mut out).expect("writing to a Vec cannot fail");
    out
}

pub fn write_mask<W: Write>(mask: &BinaryMask, mut sink: W) -> Result<()> {
    write_header(&mut sink, MASK_MAGIC, &[mask.height(), mask.width()])?;
    sink.write_all(mask.data())?;
    sink.flush()?;
    Ok(())
}

pub fn decode_mask(bytes: &[u8]) -> Result<BinaryMask> {
    let (mut dec, dims) = Decoder::open(bytes, MASK_MAGIC, 2)?;
    let data = dec.bytes(checked_product(&dims)?)?.to_vec();
    dec.finish()?;
    BinaryMask::new(dims[0], dims[1], data)
}

pub fn read_mask<R: Read>(mut source: R) -> Result<BinaryMask> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    decode_mask(&bytes)
}

pub fn encode_heatmap(heat: &HeatMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + heat.data().len() * 4);
    write_heatmap(heat, &mut out).expect("writing to a Vec cannot fail");
    out
}

pub fn write_heatmap<W: Write>(heat: &HeatMap, mut sink: W) -> Result<()> {
    write_header(&mut sink, HEAT_MAGIC, &[heat.height(), heat.width()])?;
    write_f32s(&mut sink, heat.data())?;
    sink.flush()?;
    Ok(())
}

pub fn decode_heatmap(bytes: &[u8]) -> Result<HeatMap> {
    let (mut dec, dims) = Decoder::open(bytes, HEAT_MAGIC, 2)?;
    let data = dec.f32s(checked_product(&dims)?)?;
    dec.finish()?;
    HeatMap::new(dims[0], dims[1], data)
}

pub fn read_heatmap<R: Read>(mut source: R) -> Result<HeatMap> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    decode_heatmap(&bytes)
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::file(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes).map_err(|e| Error::file(path, e))?;
    w.flush().map_err(|e| Error::file(path, e))
}

pub fn load_feature_grid(path: impl AsRef<Path>) -> Result<FeatureGrid> {
    decode_feature_grid(&read_file(path.as_ref())?)
}

pub fn save_feature_grid(path: impl AsRef<Path>, grid: &FeatureGrid) -> Result<()> {
    write_file(path.as_ref(), &encode_feature_grid(grid))
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    decode_mask(&read_file(path.as_ref())?)
}

pub fn save_mask(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<()> {
    write_file(path.as_ref(), &encode_mask(mask))
}

pub fn load_heatmap(path: impl AsRef<Path>) -> Result<HeatMap> {
    decode_heatmap(&read_file(path.as_ref())?)
}

pub fn save_heatmap(path: impl AsRef<Path>, heat: &HeatMap) -> Result<()> {
    write_file(path.as_ref(), &encode_heatmap(heat))
}
