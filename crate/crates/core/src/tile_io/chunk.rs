use std::hash::Hasher;
use std::io::{Read, Write};

use flate2::read::ZlibDecoder;
use flate2::write::ZlibEncoder;
use flate2::Compression;
use rayon::prelude::*;
use twox_hash::XxHash64;

use super::raster::BandRaster;

pub const CHUNK_MAGIC: &[u8; 4] = b"AWCH";
const HEADER_LEN: usize = 16;
const CHECKSUM_LEN: usize = 8;

/// Lossless payload codec, stored as a single byte in the chunk header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Codec {
    Raw = 0,
    Zlib = 1,
}

impl Codec {
    pub fn from_id(id: u8) -> Option<Codec> {
        match id {
            0 => Some(Codec::Raw),
            1 => Some(Codec::Zlib),
            _ => None,
        }
    }

    fn compress(self, bytes: &[u8]) -> Vec<u8> {
        match self {
            Codec::Raw => bytes.to_vec(),
            Codec::Zlib => {
                let mut enc = ZlibEncoder::new(Vec::with_capacity(bytes.len() / 2), Compression::default());
                enc.write_all(bytes).expect("write to Vec");
                enc.finish().expect("finish to Vec")
            }
        }
    }

    fn decompress(self, payload: &[u8], expected_len: usize) -> Result<Vec<u8>, String> {
        match self {
            Codec::Raw => Ok(payload.to_vec()),
            Codec::Zlib => {
                let mut out = Vec::with_capacity(expected_len);
                let mut dec = ZlibDecoder::new(payload);
                dec.read_to_end(&mut out).map_err(|e| format!("zlib: {e}"))?;
                // Trailing garbage after the zlib stream.
                if dec.total_in() as usize != payload.len() {
                    return Err("trailing bytes after compressed stream".into());
                }
                Ok(out)
            }
        }
    }
}

/// Pixel rectangle of one chunk within its raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkRect {
    pub row_index: u32,
    pub col_index: u32,
    pub x0: u32,
    pub y0: u32,
    pub width: u32,
    pub height: u32,
}

/// Row-major grid of chunk rectangles covering a `width`x`height` raster.
/// Bottom and right chunks are ragged when `chunk_side` does not divide
/// the raster.
pub fn chunk_grid(width: u32, height: u32, chunk_side: u32) -> Vec<ChunkRect> {
    assert!(chunk_side >= 1, "chunk_side must be at least 1");
    let rows = height.div_ceil(chunk_side);
    let cols = width.div_ceil(chunk_side);
    let mut out = Vec::with_capacity((rows * cols) as usize);
    for r in 0..rows {
        for c in 0..cols {
            let x0 = c * chunk_side;
            let y0 = r * chunk_side;
            out.push(ChunkRect {
                row_index: r,
                col_index: c,
                x0,
                y0,
                width: chunk_side.min(width - x0),
                height: chunk_side.min(height - y0),
            });
        }
    }
    out
}

/// A compressed, checksummed block of DNs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    pub row_index: u32,
    pub col_index: u32,
    pub height: u32,
    pub width: u32,
    pub codec: Codec,
    pub payload: Vec<u8>,
    /// XxHash64 of the uncompressed little-endian pixel bytes.
    pub checksum: u64,
}

fn pixel_bytes(pixels: &[u16]) -> Vec<u8> {
    pixels.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub(crate) fn digest(bytes: &[u8]) -> u64 {
    let mut h = XxHash64::with_seed(0);
    h.write(bytes);
    h.finish()
}

impl Chunk {
    pub fn encode(rect: ChunkRect, pixels: &[u16], codec: Codec) -> Chunk {
        assert_eq!(pixels.len(), rect.width as usize * rect.height as usize);
        let raw = pixel_bytes(pixels);
        Chunk {
            row_index: rect.row_index,
            col_index: rect.col_index,
            height: rect.height,
            width: rect.width,
            codec,
            payload: codec.compress(&raw),
            checksum: digest(&raw),
        }
    }

    /// Decompresses and verifies the payload against the stored checksum.
    pub fn decode(&self) -> Result<Vec<u16>, String> {
        let expected = self.width as usize * self.height as usize * 2;
        let raw = self.codec.decompress(&self.payload, expected)?;
        if raw.len() != expected {
            return Err(format!("decompressed {} bytes, expected {expected}", raw.len()));
        }
        if digest(&raw) != self.checksum {
            return Err("checksum of decompressed pixels does not match header".into());
        }
        Ok(raw.chunks_exact(2).map(|b| u16::from_le_bytes([b[0], b[1]])).collect())
    }

    /// Serializes to the on-disk layout: 16-byte header, 8-byte checksum,
    /// payload.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + CHECKSUM_LEN + self.payload.len());
        out.extend_from_slice(CHUNK_MAGIC);
        out.push(self.codec as u8);
        out.extend_from_slice(&[0, 0, 0]);
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.checksum.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Parses the on-disk layout. Grid coordinates are not part of the file
    /// and come from the caller.
    pub fn from_bytes(bytes: &[u8], row_index: u32, col_index: u32) -> Result<Chunk, String> {
        if bytes.len() < HEADER_LEN + CHECKSUM_LEN {
            return Err(format!("file is {} bytes, shorter than the chunk header", bytes.len()));
        }
        if &bytes[0..4] != CHUNK_MAGIC {
            return Err("bad magic".into());
        }
        let codec = Codec::from_id(bytes[4]).ok_or_else(|| format!("unknown codec id {}", bytes[4]))?;
        if bytes[5..8] != [0, 0, 0] {
            return Err("reserved header bytes are not zero".into());
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        Ok(Chunk {
            row_index,
            col_index,
            height: u32_at(8),
            width: u32_at(12),
            codec,
            checksum: u64::from_le_bytes(bytes[16..24].try_into().unwrap()),
            payload: bytes[24..].to_vec(),
        })
    }
}

fn extract(dn: &[u16], raster_width: u32, rect: ChunkRect) -> Vec<u16> {
    let mut px = Vec::with_capacity(rect.width as usize * rect.height as usize);
    for y in rect.y0..rect.y0 + rect.height {
        let start = y as usize * raster_width as usize + rect.x0 as usize;
        px.extend_from_slice(&dn[start..start + rect.width as usize]);
    }
    px
}

/// Splits a raster into row-major chunks, compressing each in parallel.
pub fn chunk_raster(raster: &BandRaster, chunk_side: u32) -> Vec<Chunk> {
    chunk_raster_with(raster, chunk_side, Codec::Zlib)
}

pub(crate) fn chunk_raster_with(raster: &BandRaster, chunk_side: u32, codec: Codec) -> Vec<Chunk> {
    chunk_grid(raster.width(), raster.height(), chunk_side)
        .into_par_iter()
        .map(|rect| Chunk::encode(rect, &extract(raster.dn(), raster.width(), rect), codec))
        .collect()
}

/// Places decoded chunk pixels back into a row-major grid.
///
/// `pieces` pairs each chunk rectangle with its pixels; together they must
/// tile the raster.
pub fn reassemble(width: u32, height: u32, pieces: &[(ChunkRect, Vec<u16>)]) -> Vec<u16> {
    let mut dn = vec![0u16; width as usize * height as usize];
    for (rect, px) in pieces {
        for (dy, row) in px.chunks_exact(rect.width as usize).enumerate() {
            let start = (rect.y0 as usize + dy) * width as usize + rect.x0 as usize;
            dn[start..start + rect.width as usize].copy_from_slice(row);
        }
    }
    dn
}
