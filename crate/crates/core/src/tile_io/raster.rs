use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use tiff::decoder::{Decoder, DecodingResult};
use tiff::encoder::{colortype, TiffEncoder};
use tiff::ColorType;

use super::{Result, TileIoError};
use crate::band::Band;

/// Largest legal DN for the given radiometric resolution.
pub fn qcal_max_for_bits(bits: u8) -> u16 {
    ((1u32 << bits) - 1) as u16
}

/// Identity and acquisition geometry of one orthorectified tile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileMetadata {
    pub tile_id: String,
    pub capture_date: NaiveDate,
    pub center_latitude: f64,
    pub center_longitude: f64,
    /// Local solar time in fractional hours, when known.
    pub acquisition_time: Option<f64>,
    pub radiometric_bits: u8,
}

impl TileMetadata {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(TileIoError::InvalidMetadata(msg));
        if self.tile_id.is_empty() || !self.tile_id.chars().all(|c| c.is_ascii_alphanumeric()) {
            return bad(format!("tile_id {:?} must be non-empty alphanumeric", self.tile_id));
        }
        if !(-90.0..=90.0).contains(&self.center_latitude) {
            return bad(format!("latitude {} outside [-90, 90]", self.center_latitude));
        }
        if !(-180.0..=180.0).contains(&self.center_longitude) {
            return bad(format!("longitude {} outside [-180, 180]", self.center_longitude));
        }
        if let Some(t) = self.acquisition_time {
            if !(0.0..24.0).contains(&t) {
                return bad(format!("acquisition_time {t} outside [0, 24)"));
            }
        }
        if !matches!(self.radiometric_bits, 10 | 12) {
            return bad(format!("radiometric_bits {} not in {{10, 12}}", self.radiometric_bits));
        }
        Ok(())
    }
}

/// A single band of quantized digital numbers, row-major.
///
/// Construction validates every DN against the radiometric resolution, so a
/// `BandRaster` never holds a value above `2^bits - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandRaster {
    band: Band,
    width: u32,
    height: u32,
    bits: u8,
    dn: Vec<u16>,
}

impl BandRaster {
    pub fn new(band: Band, width: u32, height: u32, bits: u8, dn: Vec<u16>) -> Result<Self> {
        if !matches!(bits, 10 | 12) {
            return Err(TileIoError::InvalidRaster(format!("radiometric bits {bits} not in {{10, 12}}")));
        }
        if width == 0 || height == 0 {
            return Err(TileIoError::InvalidRaster(format!("empty raster {width}x{height}")));
        }
        if width as usize * height as usize != dn.len() {
            return Err(TileIoError::InvalidRaster(format!(
                "{width}x{height} raster with {} values",
                dn.len()
            )));
        }
        let max = qcal_max_for_bits(bits);
        if let Some(i) = dn.iter().position(|&v| v > max) {
            return Err(TileIoError::DnOutOfRange {
                x: (i % width as usize) as u32,
                y: (i / width as usize) as u32,
                value: dn[i],
                max,
                bits,
            });
        }
        Ok(Self { band, width, height, bits, dn })
    }

    pub fn band(&self) -> Band {
        self.band
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn dn(&self) -> &[u16] {
        &self.dn
    }

    pub fn get(&self, x: u32, y: u32) -> u16 {
        self.dn[y as usize * self.width as usize + x as usize]
    }

    pub fn into_dn(self) -> Vec<u16> {
        self.dn
    }

    /// Writes the raster as a single-channel 16-bit TIFF.
    pub fn write_tiff(&self, path: &Path) -> Result<()> {
        let io_err = |source| TileIoError::IoFailure { path: path.to_path_buf(), source };
        let file = File::create(path).map_err(io_err)?;
        let mut enc = TiffEncoder::new(BufWriter::new(file)).map_err(|e| tiff_io(path, e))?;
        enc.write_image::<colortype::Gray16>(self.width, self.height, &self.dn)
            .map_err(|e| tiff_io(path, e))
    }
}

fn tiff_io(path: &Path, e: tiff::TiffError) -> TileIoError {
    match e {
        tiff::TiffError::IoError(source) => TileIoError::IoFailure { path: path.to_path_buf(), source },
        other => TileIoError::IoFailure {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::Other, other.to_string()),
        },
    }
}

/// Reads a single-channel unsigned 16-bit TIFF into a validated raster.
///
/// Georeferencing tags are ignored; tile metadata comes from the sidecar.
pub fn load_band_raster(path: &Path, band: Band, bits: u8) -> Result<BandRaster> {
    let file = File::open(path).map_err(|source| TileIoError::FileUnreadable { path: path.to_path_buf(), source })?;
    let wrong = |reason: String| TileIoError::WrongPixelFormat { path: path.to_path_buf(), reason };
    let mut decoder = Decoder::new(BufReader::new(file)).map_err(|e| wrong(format!("not a readable TIFF: {e}")))?;
    let color = decoder.colortype().map_err(|e| wrong(e.to_string()))?;
    if color != ColorType::Gray(16) {
        return Err(wrong(format!("expected single-channel 16-bit, found {color:?}")));
    }
    let (width, height) = decoder.dimensions().map_err(|e| wrong(e.to_string()))?;
    let dn = match decoder.read_image().map_err(|e| wrong(e.to_string()))? {
        DecodingResult::U16(v) => v,
        _ => return Err(wrong("expected unsigned 16-bit samples".into())),
    };
    BandRaster::new(band, width, height, bits, dn)
}

/// One tile: metadata plus exactly one raster per band, all the same size.
#[derive(Debug, Clone, PartialEq)]
pub struct TileBundle {
    metadata: TileMetadata,
    bands: [BandRaster; 4],
}

impl TileBundle {
    pub fn metadata(&self) -> &TileMetadata {
        &self.metadata
    }

    pub fn band(&self, band: Band) -> &BandRaster {
        &self.bands[band.index()]
    }

    pub fn bands(&self) -> &[BandRaster; 4] {
        &self.bands
    }

    pub fn width(&self) -> u32 {
        self.bands[0].width
    }

    pub fn height(&self) -> u32 {
        self.bands[0].height
    }
}

pub fn assemble_bundle(rasters: Vec<BandRaster>, metadata: TileMetadata) -> Result<TileBundle> {
    metadata.validate()?;
    let mut slots: [Option<BandRaster>; 4] = Default::default();
    for r in rasters {
        let slot = &mut slots[r.band.index()];
        if slot.is_some() {
            return Err(TileIoError::DuplicateBand(r.band));
        }
        *slot = Some(r);
    }
    let mut bands = Vec::with_capacity(4);
    for (band, slot) in Band::ALL.into_iter().zip(slots) {
        bands.push(slot.ok_or(TileIoError::MissingBand(band))?);
    }
    let (width, height) = (bands[0].width, bands[0].height);
    for r in &bands {
        if r.width != width || r.height != height {
            return Err(TileIoError::DimensionMismatch {
                band: r.band,
                width,
                height,
                found_width: r.width,
                found_height: r.height,
            });
        }
        if r.bits != metadata.radiometric_bits {
            return Err(TileIoError::InvalidRaster(format!(
                "band {} validated at {} bits, metadata says {}",
                r.band, r.bits, metadata.radiometric_bits
            )));
        }
    }
    let bands: [BandRaster; 4] = bands.try_into().expect("four bands");
    Ok(TileBundle { metadata, bands })
}
