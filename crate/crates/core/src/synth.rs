//! Planted synthetic tiles with known per-pixel ground truth.
//!
//! The calibration is chosen so reflectance is close to `DN * 1e-5` for the
//! tile's own sun geometry. Planted pixels draw DNs from the interior of
//! their class ranges and are re-checked on the reflectance the pipeline
//! will actually compute, so every planted label is unambiguous.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::band::Band;
use crate::dss::{FeatureRange, RangeSet, ThresholdTable, WaterClass, BURNT_NOT, BURNT_SURE};
use crate::features::{FeatureConfig, FeatureError, PixelFeatures};
use crate::radiometry::{
    spectral_radiance, tile_geometry, toa_reflectance, BandCalibration, CalibrationSet, RadiometryError, SolarGeometry,
};
use crate::tile_io::{assemble_bundle, BandRaster, TileBundle, TileIoError, TileMetadata};

const DN_PER_REFLECTANCE: f64 = 1e5;
const QCAL_MAX: u16 = 4095;
/// Fraction of each range width kept clear at both ends.
const INTERIOR_MARGIN: f64 = 0.2;
const MAX_ATTEMPTS: usize = 1_000_000;
const BACKGROUND_DN: std::ops::RangeInclusive<u16> = 3000..=4000;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthetic tile spec: {0}")]
    InvalidSpec(String),
    #[error("no {0:?} pixel found inside the class ranges")]
    Exhausted(PlantedClass),
    #[error(transparent)]
    TileIo(#[from] TileIoError),
    #[error(transparent)]
    Radiometry(#[from] RadiometryError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = SynthError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlantedClass {
    Background,
    ClearWater,
    MuddyWater,
    BurntSure,
}

impl PlantedClass {
    pub fn water_label(self) -> u8 {
        match self {
            PlantedClass::ClearWater => WaterClass::Clear.code(),
            PlantedClass::MuddyWater => WaterClass::Muddy.code(),
            _ => WaterClass::NonWater.code(),
        }
    }

    pub fn burnt_label(self) -> u8 {
        if self == PlantedClass::BurntSure {
            BURNT_SURE
        } else {
            BURNT_NOT
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub tile_id: String,
    pub capture_date: NaiveDate,
    pub width: u32,
    pub height: u32,
    pub clear: usize,
    pub muddy: usize,
    pub burnt_sure: usize,
    pub seed: u64,
    pub center_latitude: f64,
    pub acquisition_time: Option<f64>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            tile_id: "SYN100".into(),
            capture_date: NaiveDate::from_ymd_opt(2013, 3, 22).unwrap(),
            width: 100,
            height: 100,
            clear: 400,
            muddy: 300,
            burnt_sure: 250,
            seed: 42,
            center_latitude: 20.0,
            acquisition_time: Some(10.5),
        }
    }
}

impl SynthSpec {
    pub fn metadata(&self) -> TileMetadata {
        TileMetadata {
            tile_id: self.tile_id.clone(),
            capture_date: self.capture_date,
            center_latitude: self.center_latitude,
            center_longitude: 80.0,
            acquisition_time: self.acquisition_time,
            radiometric_bits: 12,
        }
    }
}

/// A generated tile, the calibration it was made for, and its truth.
#[derive(Debug, Clone)]
pub struct SynthTile {
    pub bundle: TileBundle,
    pub calibration: CalibrationSet,
    pub truth: Vec<PlantedClass>,
}

/// Paths written by [`SynthTile::write_inputs`].
#[derive(Debug, Clone)]
pub struct SynthFiles {
    pub bands: [PathBuf; 4],
    pub meta: PathBuf,
    pub calibration: PathBuf,
}

impl SynthTile {
    pub fn expected_water_labels(&self) -> Vec<u8> {
        self.truth.iter().map(|c| c.water_label()).collect()
    }

    pub fn expected_burnt_labels(&self) -> Vec<u8> {
        self.truth.iter().map(|c| c.burnt_label()).collect()
    }

    pub fn count(&self, class: PlantedClass) -> usize {
        self.truth.iter().filter(|&&c| c == class).count()
    }

    /// Writes `band_B2.tif`..`band_B5.tif`, `meta.json` and
    /// `calibration.toml` into `dir`.
    pub fn write_inputs(&self, dir: &Path) -> Result<SynthFiles> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| SynthError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let bands = Band::ALL.map(|b| dir.join(format!("band_{b}.tif")));
        for (b, path) in Band::ALL.iter().zip(&bands) {
            self.bundle.band(*b).write_tiff(path)?;
        }
        let meta = dir.join("meta.json");
        let json = serde_json::to_string_pretty(self.bundle.metadata()).expect("metadata serializes");
        fs::write(&meta, json).map_err(io(&meta))?;
        let calibration = dir.join("calibration.toml");
        fs::write(&calibration, self.calibration.to_toml_string()).map_err(io(&calibration))?;
        Ok(SynthFiles { bands, meta, calibration })
    }
}

/// Calibration giving reflectance of about `DN * 1e-5` under `geom`.
pub fn calibration_for(geom: &SolarGeometry) -> Result<CalibrationSet> {
    let d = geom.earth_sun_distance_au;
    let esun = PI * 1000.0 * d * d / geom.solar_zenith_deg.to_radians().cos();
    let lmax = f64::from(QCAL_MAX) / 100.0;
    Ok(CalibrationSet::uniform(BandCalibration::new(0.0, lmax, 0, QCAL_MAX, esun)?)?)
}

fn shrink(r: &FeatureRange) -> FeatureRange {
    let m = (r.hi - r.lo) * INTERIOR_MARGIN;
    FeatureRange::closed(r.lo + m, r.hi - m)
}

fn interior(set: &RangeSet) -> RangeSet {
    RangeSet::from_pairs(set.iter().map(|(f, r)| (f, shrink(r))))
}

struct Sampler<'a> {
    cal: &'a CalibrationSet,
    geom: SolarGeometry,
    thresholds: &'a ThresholdTable,
    cfg: FeatureConfig,
}

impl Sampler<'_> {
    fn features(&self, dn: [u16; 4]) -> Result<Option<PixelFeatures>> {
        let mut rho = [0.0; 4];
        for (i, b) in Band::ALL.iter().enumerate() {
            let cal = self.cal.get(*b);
            rho[i] = toa_reflectance(spectral_radiance(dn[i], cal)?, cal, &self.geom)?;
        }
        Ok(PixelFeatures::compute(0, 0, rho, &self.cfg, true)?)
    }

    fn probable(&self, f: &PixelFeatures) -> bool {
        let t = self.thresholds;
        crate::dss::Feature::BANDS
            .iter()
            .all(|b| t.burnt_probable.get(*b).is_some_and(|r| r.contains(b.value(f).unwrap())))
    }

    fn accepts(&self, class: PlantedClass, f: &PixelFeatures) -> bool {
        let t = self.thresholds;
        let clear = t.clear_water.matches(f);
        let muddy = t.muddy_water.matches(f);
        let probable = self.probable(f);
        match class {
            PlantedClass::Background => !clear && !muddy && !probable,
            PlantedClass::ClearWater => interior(&t.clear_water).matches(f) && !muddy && !probable,
            PlantedClass::MuddyWater => interior(&t.muddy_water).matches(f) && !clear && !probable,
            PlantedClass::BurntSure => {
                let bands = RangeSet::from_pairs(
                    t.burnt_probable.iter().map(|(k, r)| (k, shrink(r))),
                );
                bands.matches(f) && interior(&t.burnt_sure).matches(f) && probable && t.burnt_sure.matches(f)
            }
        }
    }

    /// DN bounds per band from the class's band ranges.
    fn dn_bounds(&self, class: PlantedClass) -> [(u16, u16); 4] {
        let t = self.thresholds;
        let set = match class {
            PlantedClass::Background => return [(*BACKGROUND_DN.start(), *BACKGROUND_DN.end()); 4],
            PlantedClass::ClearWater => &t.clear_water,
            PlantedClass::MuddyWater => &t.muddy_water,
            PlantedClass::BurntSure => &t.burnt_probable,
        };
        crate::dss::Feature::BANDS.map(|b| match set.get(b) {
            Some(r) => {
                let r = shrink(r);
                let lo = (r.lo * DN_PER_REFLECTANCE).ceil().max(1.0) as u16;
                let hi = (r.hi * DN_PER_REFLECTANCE).floor().min(f64::from(QCAL_MAX)) as u16;
                (lo, hi.max(lo))
            }
            None => (1, QCAL_MAX),
        })
    }

    fn draw(&self, class: PlantedClass, rng: &mut ChaCha8Rng) -> Result<[u16; 4]> {
        let bounds = self.dn_bounds(class);
        for _ in 0..MAX_ATTEMPTS {
            let dn = bounds.map(|(lo, hi)| rng.gen_range(lo..=hi));
            if let Some(f) = self.features(dn)? {
                if self.accepts(class, &f) {
                    return Ok(dn);
                }
            }
        }
        Err(SynthError::Exhausted(class))
    }
}

/// Builds a tile with `spec.clear`, `spec.muddy` and `spec.burnt_sure`
/// pixels scattered by a seeded permutation over a non-water background.
pub fn generate(spec: &SynthSpec, thresholds: &ThresholdTable) -> Result<SynthTile> {
    let total = spec.width as usize * spec.height as usize;
    let planted = spec.clear + spec.muddy + spec.burnt_sure;
    if total == 0 || planted > total {
        return Err(SynthError::InvalidSpec(format!(
            "{planted} planted pixels do not fit a {}x{} tile",
            spec.width, spec.height
        )));
    }
    let meta = spec.metadata();
    meta.validate()?;
    let (geom, _) = tile_geometry(&meta)?;
    let calibration = calibration_for(&geom)?;
    let sampler = Sampler { cal: &calibration, geom, thresholds, cfg: FeatureConfig::default() };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut rng);
    let mut truth = vec![PlantedClass::Background; total];
    let classes = [
        (PlantedClass::ClearWater, spec.clear),
        (PlantedClass::MuddyWater, spec.muddy),
        (PlantedClass::BurntSure, spec.burnt_sure),
    ];
    let mut next = order.iter();
    for (class, n) in classes {
        for &i in next.by_ref().take(n) {
            truth[i] = class;
        }
    }

    let mut dn: [Vec<u16>; 4] = Default::default();
    for band in dn.iter_mut() {
        band.reserve(total);
    }
    for class in &truth {
        let px = sampler.draw(*class, &mut rng)?;
        for (band, v) in dn.iter_mut().zip(px) {
            band.push(v);
        }
    }
    let rasters = Band::ALL
        .iter()
        .zip(dn)
        .map(|(b, v)| BandRaster::new(*b, spec.width, spec.height, 12, v))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let bundle = assemble_bundle(rasters, meta)?;
    Ok(SynthTile { bundle, calibration, truth })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_spec() {
        let tile = generate(&SynthSpec::default(), &ThresholdTable::default()).unwrap();
        assert_eq!(tile.count(PlantedClass::ClearWater), 400);
        assert_eq!(tile.count(PlantedClass::MuddyWater), 300);
        assert_eq!(tile.count(PlantedClass::BurntSure), 250);
        assert_eq!(tile.count(PlantedClass::Background), 10_000 - 950);
    }

    #[test]
    fn same_seed_same_tile() {
        let spec = SynthSpec { width: 30, height: 20, clear: 10, muddy: 10, burnt_sure: 10, ..SynthSpec::default() };
        let a = generate(&spec, &ThresholdTable::default()).unwrap();
        let b = generate(&spec, &ThresholdTable::default()).unwrap();
        assert_eq!(a.bundle, b.bundle);
        let c = generate(&SynthSpec { seed: 7, ..spec }, &ThresholdTable::default()).unwrap();
        assert_ne!(a.bundle, c.bundle);
    }

    #[test]
    fn calibration_scales_dn_to_reflectance() {
        let meta = SynthSpec::default().metadata();
        let (geom, _) = tile_geometry(&meta).unwrap();
        let cal = calibration_for(&geom).unwrap();
        let b = cal.get(Band::B2);
        let rho = toa_reflectance(spectral_radiance(1234, b).unwrap(), b, &geom).unwrap();
        approx::assert_relative_eq!(rho, 0.01234, max_relative = 1e-12);
    }

    #[test]
    fn overfull_spec_rejected() {
        let spec = SynthSpec { width: 10, height: 10, clear: 101, muddy: 0, burnt_sure: 0, ..SynthSpec::default() };
        assert!(matches!(generate(&spec, &ThresholdTable::default()), Err(SynthError::InvalidSpec(_))));
    }
}
