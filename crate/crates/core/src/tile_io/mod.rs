//! Band rasters, tile bundles, and the chunked on-disk tile store.

mod chunk;
mod raster;
pub(crate) mod store;

use std::path::PathBuf;

use chrono::NaiveDate;

use crate::band::Band;

pub use chunk::{chunk_grid, chunk_raster, reassemble, Chunk, ChunkRect, Codec, CHUNK_MAGIC};
pub use raster::{assemble_bundle, load_band_raster, qcal_max_for_bits, BandRaster, TileBundle, TileMetadata};
pub use store::{ChunkRef, StoredMeta, TileStore, DEFAULT_CHUNK_SIDE};

#[derive(Debug, thiserror::Error)]
pub enum TileIoError {
    #[error("cannot read {path}: {source}")]
    FileUnreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    WrongPixelFormat { path: PathBuf, reason: String },
    #[error("DN {value} at (x={x}, y={y}) exceeds {max} for {bits}-bit radiometry")]
    DnOutOfRange {
        x: u32,
        y: u32,
        value: u16,
        max: u16,
        bits: u8,
    },
    #[error("band {0} missing from tile bundle")]
    MissingBand(Band),
    #[error("band {0} supplied more than once")]
    DuplicateBand(Band),
    #[error("band {band} is {found_width}x{found_height}, expected {width}x{height}")]
    DimensionMismatch {
        band: Band,
        width: u32,
        height: u32,
        found_width: u32,
        found_height: u32,
    },
    #[error("invalid tile metadata: {0}")]
    InvalidMetadata(String),
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error("I/O failure at {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("tile {tile_id} {capture_date} already stored with different content")]
    AlreadyExistsWithDifferentContent {
        tile_id: String,
        capture_date: NaiveDate,
    },
    #[error("tile {tile_id} {capture_date} not found in store")]
    NotFound {
        tile_id: String,
        capture_date: NaiveDate,
    },
    #[error("chunk {chunk} failed verification: {reason}")]
    ChecksumMismatch { chunk: PathBuf, reason: String },
}

pub type Result<T, E = TileIoError> = std::result::Result<T, E>;
