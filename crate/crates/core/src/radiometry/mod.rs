//! Digital numbers to spectral radiance to top-of-atmosphere reflectance.

mod config;
mod solar;

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::band::Band;
use crate::tile_io::{BandRaster, TileBundle};
use crate::NODATA;

pub use config::CalibrationSet;
pub use solar::{day_of_year, earth_sun_distance, solar_declination_deg, solar_zenith, tile_geometry, DEFAULT_LOCAL_SOLAR_TIME};

/// Reflectance is rejected when `cos(zenith)` is at or below this value.
pub const ZENITH_COS_EPSILON: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum RadiometryError {
    #[error("QCAL {qcal} outside calibrated range [{min}, {max}]")]
    QcalOutOfRange { qcal: u16, min: u16, max: u16 },
    #[error("solar zenith {zenith_deg:.4} deg leaves cos(zenith) at or below {ZENITH_COS_EPSILON}")]
    ZenithDegenerate { zenith_deg: f64 },
    #[error("sun below horizon (zenith {zenith_deg:.4} deg)")]
    SunBelowHorizon { zenith_deg: f64 },
    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),
    #[error("invalid solar geometry: {0}")]
    InvalidGeometry(String),
    #[error("band {band} is {found_width}x{found_height}, expected {width}x{height}")]
    DimensionMismatch {
        band: Band,
        width: u32,
        height: u32,
        found_width: u32,
        found_height: u32,
    },
    #[error("calibration config: {0}")]
    Config(String),
}

pub type Result<T, E = RadiometryError> = std::result::Result<T, E>;

/// Per-band sensor constants.
///
/// `lmin`, `lmax` and `esun` must share one radiance unit system; the
/// reflectance ratio is unit-free either way.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandCalibration {
    pub lmin: f64,
    pub lmax: f64,
    pub qcal_min: u16,
    pub qcal_max: u16,
    pub esun: f64,
}

impl BandCalibration {
    pub fn new(lmin: f64, lmax: f64, qcal_min: u16, qcal_max: u16, esun: f64) -> Result<Self> {
        let cal = Self { lmin, lmax, qcal_min, qcal_max, esun };
        cal.validate()?;
        Ok(cal)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RadiometryError::InvalidCalibration(m));
        if !(self.lmin.is_finite() && self.lmax.is_finite() && self.esun.is_finite()) {
            return bad("non-finite constant".into());
        }
        if self.lmax <= self.lmin {
            return bad(format!("lmax {} must exceed lmin {}", self.lmax, self.lmin));
        }
        if self.qcal_max <= self.qcal_min {
            return bad(format!("qcal_max {} must exceed qcal_min {}", self.qcal_max, self.qcal_min));
        }
        if self.esun <= 0.0 {
            return bad(format!("esun {} must be positive", self.esun));
        }
        Ok(())
    }

    /// Radiance per DN.
    pub fn gain(&self) -> f64 {
        (self.lmax - self.lmin) / f64::from(self.qcal_max - self.qcal_min)
    }
}

/// Earth-sun distance and solar zenith for one tile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolarGeometry {
    pub earth_sun_distance_au: f64,
    pub solar_zenith_deg: f64,
}

impl SolarGeometry {
    pub fn validate(&self) -> Result<()> {
        let d = self.earth_sun_distance_au;
        if !(d > 0.9 && d < 1.1) {
            return Err(RadiometryError::InvalidGeometry(format!("earth-sun distance {d} AU outside (0.9, 1.1)")));
        }
        if !(self.solar_zenith_deg >= 0.0) {
            return Err(RadiometryError::InvalidGeometry(format!("negative zenith {}", self.solar_zenith_deg)));
        }
        Ok(())
    }
}

/// Linear DN to radiance mapping: `lmin` at `qcal_min`, `lmax` at
/// `qcal_max`, slope [`BandCalibration::gain`].
pub fn spectral_radiance(qcal: u16, cal: &BandCalibration) -> Result<f64> {
    if qcal < cal.qcal_min || qcal > cal.qcal_max {
        return Err(RadiometryError::QcalOutOfRange { qcal, min: cal.qcal_min, max: cal.qcal_max });
    }
    let t = f64::from(qcal - cal.qcal_min) / f64::from(cal.qcal_max - cal.qcal_min);
    // Exact at both endpoints.
    Ok((1.0 - t) * cal.lmin + t * cal.lmax)
}

/// `pi * L * d^2 / (ESUN * cos(zenith))`.
pub fn toa_reflectance(radiance: f64, cal: &BandCalibration, geom: &SolarGeometry) -> Result<f64> {
    geom.validate()?;
    if cal.esun <= 0.0 {
        return Err(RadiometryError::InvalidCalibration(format!("esun {} must be positive", cal.esun)));
    }
    let cos_z = geom.solar_zenith_deg.to_radians().cos();
    if cos_z <= ZENITH_COS_EPSILON {
        return Err(RadiometryError::ZenithDegenerate { zenith_deg: geom.solar_zenith_deg });
    }
    let d = geom.earth_sun_distance_au;
    Ok(PI * radiance * d * d / (cal.esun * cos_z))
}

/// Per-pixel TOA reflectance for one band. NaN marks NoData.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectanceRaster {
    pub band: Band,
    pub width: u32,
    pub height: u32,
    pub rho: Vec<f64>,
}

/// Reflectance for one DN, or NoData when the DN is sensor fill (0), lies
/// outside the calibrated range, or maps to negative radiance.
fn reflectance_or_nodata(dn: u16, cal: &BandCalibration, geom: &SolarGeometry) -> Result<f64> {
    if dn == 0 || dn < cal.qcal_min || dn > cal.qcal_max {
        return Ok(NODATA);
    }
    let rho = toa_reflectance(spectral_radiance(dn, cal)?, cal, geom)?;
    Ok(if rho >= 0.0 { rho } else { NODATA })
}

/// Calibrates a whole band. Every distinct DN is evaluated once through the
/// scalar path, then pixels are mapped in parallel.
pub fn calibrate_band(raster: &BandRaster, cal: &BandCalibration, geom: &SolarGeometry) -> Result<ReflectanceRaster> {
    cal.validate()?;
    // Fails early for degenerate geometry even on an all-fill raster.
    toa_reflectance(0.0, cal, geom)?;
    let top = raster.dn().iter().copied().max().unwrap_or(0);
    let lut = (0..=top)
        .map(|dn| reflectance_or_nodata(dn, cal, geom))
        .collect::<Result<Vec<f64>>>()?;
    let rho = raster.dn().par_iter().map(|&dn| lut[dn as usize]).collect();
    Ok(ReflectanceRaster { band: raster.band(), width: raster.width(), height: raster.height(), rho })
}

/// Four calibrated bands of one tile, equal dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectanceStack {
    width: u32,
    height: u32,
    bands: [ReflectanceRaster; 4],
}

impl ReflectanceStack {
    pub fn new(bands: [ReflectanceRaster; 4]) -> Result<Self> {
        let (width, height) = (bands[0].width, bands[0].height);
        for (expected, r) in Band::ALL.iter().zip(&bands) {
            if r.band != *expected {
                return Err(RadiometryError::InvalidGeometry(format!("band {} in slot for {expected}", r.band)));
            }
            if r.width != width || r.height != height || r.rho.len() != width as usize * height as usize {
                return Err(RadiometryError::DimensionMismatch {
                    band: r.band,
                    width,
                    height,
                    found_width: r.width,
                    found_height: r.height,
                });
            }
        }
        Ok(Self { width, height, bands })
    }

    /// Builds a stack from row-major reflectance grids in band order.
    pub fn from_grids(width: u32, height: u32, grids: [Vec<f64>; 4]) -> Result<Self> {
        let [b2, b3, b4, b5] = grids;
        let mk = |band, rho| ReflectanceRaster { band, width, height, rho };
        Self::new([mk(Band::B2, b2), mk(Band::B3, b3), mk(Band::B4, b4), mk(Band::B5, b5)])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn band(&self, band: Band) -> &ReflectanceRaster {
        &self.bands[band.index()]
    }

    /// `[b2, b3, b4, b5]` at a row-major pixel index.
    #[inline]
    pub fn pixel(&self, index: usize) -> [f64; 4] {
        [
            self.bands[0].rho[index],
            self.bands[1].rho[index],
            self.bands[2].rho[index],
            self.bands[3].rho[index],
        ]
    }
}

pub fn calibrate_tile(bundle: &TileBundle, cals: &CalibrationSet, geom: &SolarGeometry) -> Result<ReflectanceStack> {
    let bands = Band::ALL
        .par_iter()
        .map(|&b| calibrate_band(bundle.band(b), cals.get(b), geom))
        .collect::<Result<Vec<_>>>()?;
    ReflectanceStack::new(bands.try_into().expect("four bands"))
}
