//! Raster processing and content-based retrieval for multi-band AWiFS tiles.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! - [`tile_io`]: load 16-bit band rasters, chunk and compress them into an
//!   on-disk store, and reassemble them bit-exactly.
//! - [`radiometry`]: convert digital numbers to spectral radiance and
//!   top-of-atmosphere reflectance.
//! - [`features`]: NDVI, brightness and BAIM per pixel, and the sparse feature
//!   vector that keeps only relevant pixels.
//! - [`dss`]: threshold decision trees for water (three classes) and burnt
//!   areas, plus coverage percentages.
//! - [`catalog`]: append-only record log with filtered queries and similarity
//!   ranking.
//!
//! [`pipeline`] wires the stages together over a store, and [`synth`] builds
//! planted test tiles with known ground truth.

pub mod band;
pub mod catalog;
pub mod dss;
pub mod features;
pub mod pipeline;
pub mod radiometry;
pub mod synth;
pub mod tile_io;

pub use band::Band;

/// Reflectance value marking a pixel excluded from analysis.
pub const NODATA: f64 = f64::NAN;

/// Returns true when `v` is the NoData marker.
#[inline]
pub fn is_nodata(v: f64) -> bool {
    v.is_nan()
}
